"""Session orchestrator: the conceptualization phase, the decision loop with
every checkpoint wired at its boundary, the self-healing execution loop, and
the ablation suite driver.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import action_space, agents, bandit, checkpoints, reward as reward_mod
from .agents import AgentMessage, DriftSpec, ExecutionPlan
from .archive import Archive
from .checkpoints import CheckpointManager, CheckpointResult
from .config import DEFAULTS, Settings, settings_from_dict
from .embedding import calibrate_null, shipped_corpus, similarity
from .errors import DriftguardError, Unrecoverable
from .estimators import SAResult, get_model
from .schemes import DiagnosticScheme, MethodScheme, ProblemScheme, \
    build_diagnostic_scheme, serialize_scheme

OUTCOMES = ("converged", "budget_exhausted", "aborted")


@dataclass(frozen=True)
class SessionConfig:
    problem: dict
    n_max: int = 5
    r_threshold: float = 85.0
    checkpoint_overrides: dict = field(default_factory=dict)  # cp_id -> theta0
    drift: DriftSpec = field(default_factory=DriftSpec)
    seed: int = 0
    session_id: str = "session"
    archive_path: str | None = None
    record_to_archive: bool = True
    persist_policy: bool = False
    settings_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not 0.0 < self.r_threshold <= 100.0:
            raise ValueError("r_threshold must lie in (0, 100]")

    def digest(self) -> str:
        body = json.dumps({"problem": self.problem, "n_max": self.n_max,
                           "r_threshold": self.r_threshold,
                           "checkpoints": self.checkpoint_overrides,
                           "seed": self.seed}, sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class IterationRecord:
    n: int
    action: object
    plan: ExecutionPlan | None
    observation: SAResult | None
    reward_total: float
    reward_components: tuple[float, float, float, float]
    features: tuple[float, ...]
    checkpoint_events: tuple[CheckpointResult, ...]
    drift_events: tuple
    diagnostic: DiagnosticScheme
    strategy_text: str
    advisor_text: str
    failed: bool = False

    @property
    def mismatch(self) -> bool:
        """Action-plan estimator divergence at execution time; derived."""
        return (self.plan is not None
                and self.plan.estimator != self.action.estimator)


@dataclass
class SessionTrace:
    config: SessionConfig
    session_id: str
    problem_scheme: ProblemScheme | None
    records: list
    outcome: str
    best_reward: float
    iterations_to_converge: int | None
    cp0_match: str = "none"
    cp0_similarity: float = 0.0
    cp0_mode: str = "explore_max"
    cp0_screening_first: bool = False
    policy_snapshot: dict | None = None
    abort_reason: str = ""


def _settings_for(cfg: SessionConfig) -> Settings:
    st = settings_from_dict(cfg.settings_overrides) \
        if cfg.settings_overrides else DEFAULTS
    return replace(st, n_max=cfg.n_max, r_threshold=cfg.r_threshold)


@dataclass
class _SessionState:
    """Mutable loop state shared across iterations."""

    cfg: SessionConfig
    settings: Settings
    ps: ProblemScheme
    model: object
    manager: CheckpointManager
    policy: bandit.PolicyState
    feasible: list
    prev_strategy_text: str = ""
    prev_hyperparams: dict | None = None
    prev_diag: DiagnosticScheme | None = None
    prev_estimator: str = ""
    prev_obs_by_estimator: dict = field(default_factory=dict)
    prev_reward: float | None = None
    flags: tuple[str, ...] = ()
    screening_first: bool = False
    failed_estimators: set = field(default_factory=set)


def submartingale_flags(prev_reward: float | None, total: float,
                        obs: SAResult | None) -> tuple[str, ...]:
    """Violation flags for the reward register: the loop expects rewards to
    be non-decreasing in expectation, so any drop is surfaced to the next
    strategy prompt together with numerical red flags."""
    flags = []
    if prev_reward is not None and total < prev_reward:
        flags.append(f"reward regressed from {prev_reward:.1f} to "
                     f"{total:.1f}")
    if obs is not None and obs.negative_variance_flag:
        flags.append("negative variance contribution observed")
    return tuple(flags)


def run_iteration(state: _SessionState, n: int) -> IterationRecord:
    """One loop pass: policy, implementation, execution, evaluation,
    register; returns the complete record."""
    cfg, st, ps = state.cfg, state.settings, state.ps
    manager, policy = state.manager, state.policy
    events: list[CheckpointResult] = []
    drift_events: list = []
    iter_seed = cfg.seed * 1000 + n

    candidates = state.feasible
    if state.screening_first and n == 1:
        screeners = [a for a in candidates if a.estimator == "Morris"]
        if screeners:
            candidates = screeners

    # (policy) Strategist + CP7 novelty (inverted) + CP2 critic gate.
    blocked = state.prev_estimator if (state.prev_diag is not None
                                       and state.prev_diag.block_action) else ""
    decision = bandit.select_action(
        policy, ps, candidates, diag=state.prev_diag,
        novelty_warning=False, rng_seed=iter_seed,
        prev_hyperparams=state.prev_hyperparams,
        blocked_estimator=blocked, settings=st)
    strategy_text = agents.render_strategy_text(decision.method_scheme,
                                                state.flags)
    cp7 = manager.evaluate("CP7", similarity(strategy_text,
                                             state.prev_strategy_text)
                           if state.prev_strategy_text else 0.0)
    events.append(cp7)
    if not cp7.passed:
        # Novelty violation: one re-selection with the repeat penalty on.
        decision = bandit.select_action(
            policy, ps, candidates, diag=state.prev_diag,
            novelty_warning=True, rng_seed=iter_seed + 500_000,
            prev_hyperparams=state.prev_hyperparams,
            blocked_estimator=blocked, settings=st)
        strategy_text = agents.render_strategy_text(decision.method_scheme,
                                                    state.flags)
    ms = decision.method_scheme
    action = decision.action

    critic_text = agents.render_critic_text(ms)
    cp2 = manager.evaluate("CP2", similarity(strategy_text, critic_text))
    events.append(cp2)
    retries = st.retry_budget
    while not cp2.passed and retries > 0:
        retries -= 1
        decision = bandit.select_action(
            policy, ps, candidates, diag=state.prev_diag,
            novelty_warning=True, rng_seed=iter_seed + 900_000 + retries,
            prev_hyperparams=state.prev_hyperparams,
            blocked_estimator=blocked, settings=st)
        ms, action = decision.method_scheme, decision.action
        strategy_text = agents.render_strategy_text(ms, state.flags)
        critic_text = agents.render_critic_text(ms)
        cp2 = manager.evaluate("CP2", similarity(strategy_text, critic_text),
                               retry_count=st.retry_budget - retries)
        events.append(cp2)
    if not cp2.passed:
        return _failed_record(n, action, events, drift_events, strategy_text,
                              "critic rejection budget exhausted", st)

    # (implementation) Study Agent with CP3 advisory and CP4 blocking gates.
    study_text = agents.study_agent(strategy_text)
    events.append(manager.evaluate("CP3", similarity(strategy_text,
                                                     study_text)))
    cp4 = manager.evaluate("CP4", similarity(strategy_text, study_text))
    events.append(cp4)
    if not cp4.passed:
        return _failed_record(n, action, events, drift_events, strategy_text,
                              "study comprehension gate exhausted", st)

    # Drift injection on the Refactor Agent's input copy only.
    strategist_msg = AgentMessage(role="strategist", payload=strategy_text,
                                  free_text=strategy_text)
    drifted_msg, event = agents.inject_drift(strategist_msg, cfg.drift,
                                             rng_seed=iter_seed + 77,
                                             iteration=n)
    if event is not None:
        drift_events.append(event)

    plan = agents.refactor_agent(drifted_msg.payload, ps.model_id,
                                 seed=iter_seed, fallback=ms)

    # CP5: cosine gate against the original strategy plus the Inspector's
    # structural checklist; one bundle, one toggle.
    cp5_spec = manager.specs["CP5"]
    retries = st.retry_budget
    while not cp5_spec.disabled:
        plan_text = agents.render_plan_text(plan)
        sim5 = similarity(strategy_text, plan_text)
        verdict = agents.inspector_check(plan, ms)
        cp5 = manager.evaluate("CP5", sim5,
                               retry_count=st.retry_budget - retries)
        if not verdict.approved and cp5.passed:
            cp5 = replace(cp5, verdict="block",
                          failure_action="inspector_reject")
        events.append(cp5)
        if cp5.passed:
            break
        if retries == 0:
            return _failed_record(n, action, events, drift_events,
                                  strategy_text,
                                  "inspector rejection budget exhausted", st)
        retries -= 1
        # Rebuild from the uncorrupted strategy text.
        plan = agents.refactor_agent(strategy_text, ps.model_id,
                                     seed=iter_seed, fallback=ms)

    # (execution) Runner with the Debugger self-healing loop.
    obs: SAResult | None = None
    error: Exception | None = None
    scheme_name = action.dims[0] if action.task == "SA" else "MonteCarlo"
    for attempt in range(st.max_debug_retries + 1):
        try:
            obs = agents.execution_runner(plan, scheme_name)
            error = None
            break
        except DriftguardError as exc:
            error = exc
            if attempt == st.max_debug_retries:
                break
            try:
                plan = agents.debugger_fix(plan, exc)
            except Unrecoverable as dead:
                error = dead
                break

    # (evaluation) Reward, Advisor, CP6.
    prev_obs = state.prev_obs_by_estimator.get(plan.estimator)
    breakdown = reward_mod.score(
        ms, obs, model=state.model, epsilon=ps.context.epsilon,
        prev_obs=prev_obs, settings=st)
    advisor_text = agents.advisor_report(
        ms, obs, breakdown, ps, st,
        avoid=frozenset(state.failed_estimators))
    if obs is not None:
        events.append(manager.evaluate(
            "CP6", similarity(agents.render_observation_text(obs),
                              advisor_text)))

    # (register) Diagnosis, submartingale flags, policy update.
    diag = build_diagnostic_scheme(advisor_text, obs, breakdown, st)
    if diag.block_action:
        state.failed_estimators.add(ms.estimator)
    state.flags = submartingale_flags(state.prev_reward, breakdown.total, obs)

    phi = bandit.encode_features(ps.context, action)
    policy.update(phi, breakdown.total, action.estimator)

    if obs is not None and obs.executed:
        state.prev_obs_by_estimator[plan.estimator] = obs
    state.prev_strategy_text = strategy_text
    state.prev_hyperparams = dict(ms.hyperparams) | {"_estimator": ms.estimator}
    state.prev_diag = diag
    state.prev_estimator = ms.estimator
    state.prev_reward = breakdown.total

    return IterationRecord(
        n=n, action=action, plan=plan, observation=obs,
        reward_total=breakdown.total,
        reward_components=(breakdown.integrity, breakdown.accuracy,
                           breakdown.details, breakdown.optimality),
        features=phi.values,
        checkpoint_events=tuple(events), drift_events=tuple(drift_events),
        diagnostic=diag, strategy_text=strategy_text,
        advisor_text=advisor_text)


def _failed_record(n, action, events, drift_events, strategy_text,
                   why: str, settings: Settings) -> IterationRecord:
    zero = reward_mod.RewardBreakdown(0.0, 0.0, 0.0, 0.0, (why,))
    diag = DiagnosticScheme(
        convergence_status="failed", bottleneck_dim="integrity",
        reward=0.0, root_cause="none", prescribed_estimator=None,
        prescribed_N_factor=None, prescribed_hyperparam=None,
        penalize_action=True, block_action=False, physical_insight=why)
    return IterationRecord(
        n=n, action=action, plan=None, observation=None,
        reward_total=0.0, reward_components=(0.0, 0.0, 0.0, 0.0),
        features=(), checkpoint_events=tuple(events),
        drift_events=tuple(drift_events), diagnostic=diag,
        strategy_text=strategy_text, advisor_text=why, failed=True)


def run_session(cfg: SessionConfig,
                archive: Archive | None = None,
                null_corpus: tuple[str, ...] | None = None) -> SessionTrace:
    """Full session: Group A once, CP0, then the bounded decision loop."""
    st = _settings_for(cfg)
    corpus = null_corpus or shipped_corpus()
    null_dist = calibrate_null(list(corpus), n_pairs=500, seed=cfg.seed)
    manager = CheckpointManager(null_dist, cfg.checkpoint_overrides, st)

    # Group A: Coordinator -> CP1 -> Gatekeeper -> Model Translator.
    try:
        ps = agents.coordinator(cfg.problem, st)
    except DriftguardError as exc:
        return _aborted(cfg, None, f"coordinator failed: {exc}")
    desc_text = agents.render_problem_description(cfg.problem)
    cp1 = manager.evaluate("CP1", similarity(desc_text,
                                             agents.render_problem_text(ps)))
    if not cp1.passed:
        # The coordinator is deterministic; retries cannot change the text.
        return _aborted(cfg, ps, "problem restatement rejected at intake")
    admitted, why = agents.gatekeeper(ps)
    if not admitted:
        return _aborted(cfg, ps, why)
    try:
        model = agents.model_translator(ps)
    except DriftguardError as exc:
        return _aborted(cfg, ps, str(exc))

    # CP0: archive match, warm-start, exploration mode.
    if archive is None and cfg.archive_path:
        archive = Archive(cfg.archive_path, st)
    cp0 = manager.evaluate_cp0(ps, archive)
    policy = bandit.PolicyState(task=ps.context.task, settings=st,
                                exploration_mode=cp0.exploration_mode)
    if cp0.warm_start is not None:
        entry = cp0.warm_start
        if cfg.persist_policy and entry.policy_snapshot:
            policy = bandit.PolicyState.from_snapshot(entry.policy_snapshot,
                                                      st)
            policy.exploration_mode = cp0.exploration_mode
        else:
            policy.warm_start(entry.arm_stats_list(), cp0.match)

    feasible = action_space.filter_feasible(ps.context, st)
    if not feasible:
        return _aborted(cfg, ps, "no feasible action")

    state = _SessionState(cfg=cfg, settings=st, ps=ps, model=model,
                          manager=manager, policy=policy, feasible=feasible,
                          screening_first=cp0.screening_first)

    records = []
    outcome = "budget_exhausted"
    iterations_to_converge = None
    for n in range(1, cfg.n_max + 1):
        rec = run_iteration(state, n)
        records.append(rec)
        if rec.reward_total >= cfg.r_threshold:
            outcome = "converged"
            iterations_to_converge = n
            break

    trace = SessionTrace(
        config=cfg, session_id=cfg.session_id, problem_scheme=ps,
        records=records, outcome=outcome,
        best_reward=max((r.reward_total for r in records), default=0.0),
        iterations_to_converge=iterations_to_converge,
        cp0_match=cp0.match, cp0_similarity=cp0.similarity,
        cp0_mode=cp0.exploration_mode,
        cp0_screening_first=cp0.screening_first,
        policy_snapshot=policy.snapshot() if cfg.persist_policy else None)

    if archive is not None and cfg.record_to_archive:
        archive.record_session(trace)
    return trace


def _aborted(cfg, ps, why: str) -> SessionTrace:
    return SessionTrace(config=cfg, session_id=cfg.session_id,
                        problem_scheme=ps, records=[], outcome="aborted",
                        best_reward=0.0, iterations_to_converge=None,
                        abort_reason=why)


# ---------------------------------------------------------------------------
# Trace serialization (JSONL: header line, then one record per line)

def _jsonable(value):
    if isinstance(value, (DiagnosticScheme, MethodScheme)):
        return json.loads(serialize_scheme(value))
    if hasattr(value, "__dataclass_fields__"):
        from dataclasses import asdict
        return asdict(value)
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def write_trace(trace: SessionTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"session_id": trace.session_id,
                  "config_digest": trace.config.digest(),
                  "outcome": trace.outcome,
                  "best_reward": trace.best_reward,
                  "iterations_to_converge": trace.iterations_to_converge,
                  "cp0_match": trace.cp0_match,
                  "cp0_similarity": trace.cp0_similarity}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in trace.records:
            row = {"n": rec.n,
                   "action": list(rec.action.dims),
                   "estimator_planned": rec.action.estimator,
                   "estimator_executed": rec.plan.estimator if rec.plan
                   else None,
                   "mismatch": rec.mismatch,
                   "reward": rec.reward_total,
                   "reward_components": list(rec.reward_components),
                   "failed": rec.failed,
                   "checkpoint_events": [
                       {"cp": e.cp_id, "similarity": e.similarity,
                        "threshold": e.threshold, "verdict": e.verdict,
                        "failure_action": e.failure_action}
                       for e in rec.checkpoint_events],
                   "drift_events": list(rec.drift_events),
                   "diagnostic": _jsonable(rec.diagnostic),
                   "advisor_text": rec.advisor_text}
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Ablation suite

ABLATION_COLUMNS = ("condition", "seed", "outcome", "mismatch_count",
                    "n_iterations", "best_reward", "first_reward",
                    "iterations_to_converge", "cp_failure_events")


def run_ablation_suite(base_cfg: SessionConfig,
                       conditions: list[tuple[str, dict, DriftSpec]],
                       seeds: list[int],
                       out_csv: str | None = None,
                       archive_factory=None) -> list[dict]:
    """Run each (name, checkpoint overrides, drift) condition over the seed
    list and summarize mismatch rates, rewards, and convergence.

    ``archive_factory`` builds a fresh archive per session so conditions
    that depend on a warm start stay independent across seeds.
    """
    rows = []
    for name, overrides, drift in conditions:
        for seed in seeds:
            cfg = replace(base_cfg, checkpoint_overrides=overrides,
                          drift=drift, seed=seed,
                          session_id=f"{base_cfg.session_id}-{name}-s{seed}")
            trace = run_session(cfg, archive=archive_factory()
                                if archive_factory else None)
            mismatches = sum(1 for r in trace.records if r.mismatch)
            cp_failures = sum(1 for r in trace.records
                              for e in r.checkpoint_events
                              if e.verdict != "pass")
            rows.append({
                "condition": name, "seed": seed,
                "outcome": trace.outcome,
                "mismatch_count": mismatches,
                "n_iterations": len(trace.records),
                "best_reward": round(trace.best_reward, 2),
                "first_reward": round(trace.records[0].reward_total, 2)
                if trace.records else 0.0,
                "iterations_to_converge": trace.iterations_to_converge,
                "cp_failure_events": cp_failures,
            })
    if out_csv is not None:
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(ABLATION_COLUMNS))
            writer.writeheader()
            writer.writerows(rows)
    return rows
