"""Command-line entry point.

Subcommands: ``run`` (one session), ``ablate`` (condition suite over seeds),
``sessions`` (consecutive sessions sharing an archive and a persisted
policy).  Configuration is a single JSON document; every command is
reproducible from (config, seeds).

Exit codes: 0 converged or budget exhausted, 1 bad configuration,
2 session aborted.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from .agents import DriftSpec
from .archive import Archive
from .errors import DriftguardError
from .pipeline import (SessionConfig, SessionTrace, run_ablation_suite,
                       run_session, write_trace)

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_ABORTED = 2

SESSION_COLUMNS = ("session_id", "seed", "outcome", "best_reward",
                   "iterations_to_best", "iterations_to_converge",
                   "best_estimator", "cp0_match", "cp0_similarity",
                   "cp0_mode", "cp0_screening_first")


class ConfigError(DriftguardError):
    """Configuration file missing, unparsable, or structurally invalid."""


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _drift_from(doc: dict | None) -> DriftSpec:
    if not doc:
        return DriftSpec()
    try:
        return DriftSpec(
            kind=doc.get("kind", "none"),
            target_field=doc.get("target_field", "estimator"),
            replacement_value=doc.get("replacement_value", ""),
            source_value=doc.get("source_value", ""),
            probability=float(doc.get("probability", 0.0)),
            activation_iteration=doc.get("activation_iteration"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad drift spec: {exc}") from exc


def _session_config(doc: dict, seed_override: int | None,
                    **extra) -> SessionConfig:
    if "problem" not in doc:
        raise ConfigError("config lacks a 'problem' object")
    from .estimators import benchmark_catalog
    model_id = doc["problem"].get("model_id", "") \
        if isinstance(doc["problem"], dict) else ""
    if model_id and model_id not in benchmark_catalog():
        raise ConfigError(f"unknown problem model {model_id!r}")
    seed = seed_override if seed_override is not None \
        else int(doc.get("seed", 0))
    try:
        return SessionConfig(
            problem=doc["problem"],
            n_max=int(doc.get("n_max", 5)),
            r_threshold=float(doc.get("r_threshold", 85.0)),
            checkpoint_overrides=doc.get("checkpoint_overrides", {}),
            drift=_drift_from(doc.get("drift")),
            seed=seed,
            session_id=doc.get("session_id", "session"),
            archive_path=doc.get("archive_path"),
            record_to_archive=bool(doc.get("record_to_archive", True)),
            persist_policy=bool(doc.get("persist_policy", False)),
            settings_overrides=doc.get("settings", {}),
            **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad session config: {exc}") from exc


def _archive_for(doc: dict, cfg: SessionConfig) -> Archive | None:
    """Archive from the config path, optionally pre-seeded with one arm."""
    warm = doc.get("warm_start")
    archive = Archive(cfg.archive_path) if cfg.archive_path or warm else None
    if warm:
        from . import action_space, agents
        try:
            ps = agents.coordinator(cfg.problem)
            arm = next(a for a in action_space.filter_feasible(ps.context)
                       if a.estimator == warm["estimator"])
            archive.seed_entry(ps, arm,
                               mean_reward=float(warm["mean_reward"]),
                               count=int(warm.get("count", 3)))
        except (KeyError, StopIteration, TypeError, ValueError) as exc:
            raise ConfigError(f"bad warm_start block: {exc}") from exc
    return archive


def _out_dir(args) -> str:
    out = os.environ.get("DRIFTGUARD_OUT") or args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _trace_summary(trace: SessionTrace) -> dict:
    best = max(trace.records, key=lambda r: r.reward_total, default=None)
    cp_counts: dict[str, int] = {}
    for rec in trace.records:
        for e in rec.checkpoint_events:
            key = f"{e.cp_id}_{e.verdict}"
            cp_counts[key] = cp_counts.get(key, 0) + 1
    return {"session_id": trace.session_id,
            "outcome": trace.outcome,
            "best_reward": trace.best_reward,
            "best_estimator": best.action.estimator if best else None,
            "iterations": len(trace.records),
            "iterations_to_converge": trace.iterations_to_converge,
            "mismatches": sum(1 for r in trace.records if r.mismatch),
            "checkpoint_events": dict(sorted(cp_counts.items())),
            "cp0": {"match": trace.cp0_match,
                    "similarity": trace.cp0_similarity,
                    "exploration_mode": trace.cp0_mode,
                    "screening_first": trace.cp0_screening_first},
            "abort_reason": trace.abort_reason}


def cmd_run(args) -> int:
    doc = _load_config(args.config)
    cfg = _session_config(doc, args.seed_override)
    out = _out_dir(args)
    trace = run_session(cfg, archive=_archive_for(doc, cfg))
    trace_path = os.path.join(out, f"{cfg.session_id}.trace.jsonl")
    write_trace(trace, trace_path)
    summary = _trace_summary(trace)
    with open(os.path.join(out, f"{cfg.session_id}.summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _say(args, f"{trace.outcome}: best reward "
               f"{trace.best_reward:.1f} in {len(trace.records)} iterations "
               f"-> {trace_path}")
    return EXIT_ABORTED if trace.outcome == "aborted" else EXIT_OK


def cmd_ablate(args) -> int:
    doc = _load_config(args.config)
    base_cfg = _session_config(doc, None, )
    conditions = []
    for cond in doc.get("conditions", []):
        try:
            conditions.append((cond["name"],
                               cond.get("checkpoint_overrides", {}),
                               _drift_from(cond.get("drift"))))
        except KeyError as exc:
            raise ConfigError(f"condition lacks {exc}") from exc
    seeds = [args.seed_override] if args.seed_override is not None \
        else [int(s) for s in doc.get("seeds", [base_cfg.seed])]
    out = _out_dir(args)
    out_csv = os.path.join(out, doc.get("output_name", "ablation") + ".csv")
    factory = (lambda: _archive_for(doc, base_cfg)) \
        if doc.get("warm_start") or base_cfg.archive_path else None
    rows = run_ablation_suite(base_cfg, conditions, seeds, out_csv=out_csv,
                              archive_factory=factory)
    for row in rows:
        _say(args, f"{row['condition']} seed {row['seed']}: "
                   f"{row['outcome']}, mismatches {row['mismatch_count']}, "
                   f"best {row['best_reward']}")
    _say(args, f"wrote {out_csv}")
    return EXIT_OK


def cmd_sessions(args) -> int:
    doc = _load_config(args.config)
    session_docs = doc.get("sessions")
    if not session_docs:
        raise ConfigError("sessions command needs a non-empty 'sessions' "
                          "list")
    out = _out_dir(args)
    shared = {k: v for k, v in doc.items() if k != "sessions"}
    archive = Archive(doc["archive_path"]) if doc.get("archive_path") \
        else Archive()
    rows, aborted = [], False
    for k, sdoc in enumerate(session_docs, start=1):
        merged = {**shared, **sdoc}
        merged.setdefault("session_id", f"session-{k}")
        merged.setdefault("persist_policy", True)
        cfg = _session_config(merged, args.seed_override)
        trace = run_session(cfg, archive=archive)
        write_trace(trace, os.path.join(out,
                                        f"{cfg.session_id}.trace.jsonl"))
        aborted = aborted or trace.outcome == "aborted"
        best = max(trace.records, key=lambda r: r.reward_total, default=None)
        itb = next((r.n for r in trace.records
                    if r.reward_total == trace.best_reward), None) \
            if trace.records else None
        rows.append({"session_id": cfg.session_id, "seed": cfg.seed,
                     "outcome": trace.outcome,
                     "best_reward": round(trace.best_reward, 2),
                     "iterations_to_best": itb,
                     "iterations_to_converge": trace.iterations_to_converge,
                     "best_estimator": best.action.estimator if best
                     else None,
                     "cp0_match": trace.cp0_match,
                     "cp0_similarity": round(trace.cp0_similarity, 3),
                     "cp0_mode": trace.cp0_mode,
                     "cp0_screening_first": trace.cp0_screening_first})
        _say(args, f"{cfg.session_id}: {trace.outcome}, best "
                   f"{trace.best_reward:.1f}, cp0 {trace.cp0_match}/"
                   f"{trace.cp0_mode}")
    table = os.path.join(out, doc.get("output_name", "sessions") + ".csv")
    with open(table, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SESSION_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)
    _say(args, f"wrote {table}")
    return EXIT_ABORTED if aborted else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftguard",
        description="Checkpoint-guarded sensitivity-analysis orchestrator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in (("run", cmd_run), ("ablate", cmd_ablate),
                          ("sessions", cmd_sessions)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="path to the JSON experiment config")
        p.add_argument("--out", default=None,
                       help="output directory (DRIFTGUARD_OUT overrides)")
        p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(handler=handler)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, DriftguardError, KeyError, TypeError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
