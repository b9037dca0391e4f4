"""Deterministic scripted agents, boundary text renderers, drift injectors,
the Inspector's structural checklist, and the Debugger's patch rules.

Generated "code" is a structured ExecutionPlan; every checkpoint text is
rendered from structured state by a deterministic pretty-printer, so cosine
gates operate on realistic prose without LLM nondeterminism.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace

import numpy as np

from . import catalog
from .config import DEFAULTS, Settings
from .errors import InsufficientSamples, ScriptMiss, UnknownModel, Unrecoverable
from .estimators import BenchmarkModel, SAResult, run_estimator
from .schemes import MethodScheme, ProblemScheme

ROLES = ("coordinator", "gatekeeper", "model_translator", "strategist",
         "critic", "study_agent", "refactor_agent", "inspector", "debugger",
         "advisor")

DRIFT_KINDS = ("method_swap", "field_corruption", "none")


@dataclass(frozen=True)
class AgentMessage:
    role: str
    payload: object
    free_text: str = ""

    def digest(self) -> str:
        body = self.payload if isinstance(self.payload, str) else self.free_text
        return hashlib.sha256(str(body).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ExecutionPlan:
    estimator: str
    hyperparams: tuple[tuple[str, float], ...]
    output_bindings: tuple[str, ...]
    model_id: str
    seed: int

    def hyperparam(self, name: str, default=None):
        for key, value in self.hyperparams:
            if key == name:
                return value
        return default


@dataclass(frozen=True)
class DriftSpec:
    kind: str = "none"
    target_field: str = "estimator"
    replacement_value: str = ""
    source_value: str = ""
    probability: float = 0.0
    activation_iteration: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("drift probability must lie in [0, 1]")
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")


@dataclass(frozen=True)
class InspectorVerdict:
    approved: bool
    reasons: tuple[str, ...] = ()


class ScriptedAgentConfig:
    """Deterministic script table keyed by (role, input digest) with a
    per-role wildcard fallback."""

    def __init__(self, entries: dict | None = None):
        self.entries = dict(entries or {})

    def lookup(self, role: str, digest: str):
        if (role, digest) in self.entries:
            return self.entries[(role, digest)]
        if (role, "*") in self.entries:
            return self.entries[(role, "*")]
        return None


# ---------------------------------------------------------------------------
# Text renderers (deterministic pretty-printers feeding the cosine gates)

def _kw(estimator: str) -> str:
    return catalog.estimator_info(estimator).keywords


def render_problem_text(ps: ProblemScheme) -> str:
    ctx = ps.context
    return (f"{ctx.task} study of model {ps.model_id or 'unnamed'} with "
            f"{ctx.d_in} uncertain inputs and {ctx.d_out} outputs under "
            f"{ctx.dist_family_mode} distributions, evaluation budget "
            f"{ctx.n_budget}, target precision {ctx.epsilon}, output class "
            f"{ps.output_class}, model class {ps.model_class}")


def render_problem_description(desc: dict) -> str:
    return (f"{desc.get('task', 'SA')} study of model "
            f"{desc.get('model_id', 'unnamed')} with {desc.get('d_in')} "
            f"uncertain inputs and {desc.get('d_out')} outputs, evaluation "
            f"budget {desc.get('n_budget')}, target precision "
            f"{desc.get('epsilon', 0.05)}")


def render_strategy_text(ms: MethodScheme, flags: tuple[str, ...] = ()) -> str:
    n = int(ms.hyperparam("n_samples", 0))
    flag_text = ""
    if flags:
        flag_text = " prior violations flagged: " + "; ".join(flags) + "."
    return (f"strategy: apply {ms.estimator} via {ms.library_class} with "
            f"n_samples={n} using {ms.sampling_scheme} sampling to produce "
            f"{' and '.join(ms.required_attributes)}. rationale: {_kw(ms.estimator)}."
            f" budget status {ms.budget_status}, minimum evaluations "
            f"{ms.n_min_value}.{flag_text}")


def render_critic_text(ms: MethodScheme) -> str:
    return (f"review: the proposed {ms.estimator} run through "
            f"{ms.library_class} with n_samples={int(ms.hyperparam('n_samples', 0))}"
            f" is consistent with the problem scheme. {_kw(ms.estimator)}."
            f" required outputs {' and '.join(ms.required_attributes)} are "
            f"reachable within budget status {ms.budget_status}.")


def render_study_text(strategy_text: str) -> str:
    return ("comprehension summary of the received strategy. "
            + strategy_text.replace("strategy:", "the strategy instructs to"))


def render_plan_text(plan: ExecutionPlan) -> str:
    return (f"implementation plan: run {plan.estimator} on model "
            f"{plan.model_id} with n_samples={int(plan.hyperparam('n_samples', 0))}"
            f" binding {' and '.join(plan.output_bindings)}. "
            f"{_kw(plan.estimator)}.")


def render_observation_text(obs: SAResult) -> str:
    parts = [f"observation from {obs.estimator}: "
             f"{obs.evaluations_used} evaluations used"]
    for attr, vec in obs.attributes().items():
        head = ", ".join(f"{v:.4f}" for v in vec[:4])
        parts.append(f"{attr} = [{head}{', ...' if len(vec) > 4 else ''}]")
    if obs.warnings:
        parts.append("warnings: " + "; ".join(obs.warnings))
    parts.append(_kw(obs.estimator))
    return ". ".join(parts)


# ---------------------------------------------------------------------------
# Agent behaviors

def coordinator(desc: dict, settings: Settings = DEFAULTS) -> ProblemScheme:
    from .schemes import build_problem_scheme
    return build_problem_scheme(desc, settings)


def gatekeeper(ps: ProblemScheme) -> tuple[bool, str]:
    """Admission check: the problem must bind to a catalog model and admit
    at least one feasible estimator."""
    from .estimators import benchmark_catalog
    if ps.model_id and ps.model_id not in benchmark_catalog():
        return False, f"unknown model {ps.model_id!r}"
    feasible = (ps.feasible_sa_estimators if ps.context.task == "SA"
                else ps.feasible_uq_estimators)
    if not feasible:
        return False, "no feasible estimator for this problem"
    return True, "admitted"


def model_translator(ps: ProblemScheme) -> BenchmarkModel:
    from .estimators import get_model
    if not ps.model_id:
        raise UnknownModel("problem description names no model")
    return get_model(ps.model_id)


def study_agent(strategy_text: str) -> str:
    return render_study_text(strategy_text)


_EST_TOKEN = re.compile(r"\b(Sobol|Chatterjee|CVM|Morris|PCE_SA|"
                        r"Generalized_Sobol)\b", re.IGNORECASE)
_N_SAMPLES = re.compile(r"n_samples\s*[=:]\s*(\d+)")


def refactor_agent(report_text: str, model_id: str, seed: int,
                   fallback: MethodScheme) -> ExecutionPlan:
    """Build the execution plan from the received report text.

    The estimator and sample size are parsed back out of the prose; this is
    where upstream text corruption becomes a concrete wrong plan.
    """
    match = _EST_TOKEN.search(report_text)
    if match:
        token = match.group(1)
        estimator = next(e for e in catalog.estimator_ids("SA")
                         + catalog.estimator_ids("UQ")
                         if e.lower() == token.lower())
    else:
        estimator = fallback.estimator
    n_match = _N_SAMPLES.search(report_text)
    n_samples = int(n_match.group(1)) if n_match \
        else int(fallback.hyperparam("n_samples", 0))
    info = catalog.estimator_info(estimator)
    from .estimators import FIELD_TO_ATTRIBUTE
    bindings = tuple(FIELD_TO_ATTRIBUTE[p] for p in info.produces)
    return ExecutionPlan(estimator=estimator,
                         hyperparams=(("n_samples", float(n_samples)),),
                         output_bindings=bindings,
                         model_id=model_id, seed=seed)


def inspector_check(plan: ExecutionPlan, ms: MethodScheme) -> InspectorVerdict:
    """Structural checklist audit of the assembled plan against the decided
    method scheme."""
    reasons = []
    if plan.estimator != ms.estimator:
        reasons.append(f"estimator mismatch: plan runs {plan.estimator}, "
                       f"scheme requires {ms.estimator}")
    bindings = set(plan.output_bindings)
    missing = [a for a in ms.required_attributes if a not in bindings]
    if missing:
        reasons.append("missing required bindings: " + ", ".join(missing))
    forbidden = bindings & set(ms.forbidden_attributes)
    if forbidden:
        reasons.append("forbidden bindings: " + ", ".join(sorted(forbidden)))
    info = catalog.estimator_info(plan.estimator) if not reasons else None
    if info is not None:
        n = int(plan.hyperparam("n_samples", 0))
        d = _plan_dim(plan)
        if d and info.cost(n, d) < info.n_min(d):
            reasons.append(f"n_samples={n} below the estimator minimum")
    return InspectorVerdict(approved=not reasons, reasons=tuple(reasons))


def _plan_dim(plan: ExecutionPlan) -> int:
    from .estimators import benchmark_catalog
    model = benchmark_catalog().get(plan.model_id)
    return model.d_in if model is not None else 0


def execution_runner(plan: ExecutionPlan, sampling_scheme: str = "MonteCarlo"
                     ) -> SAResult:
    """Run the plan's estimator; raises the estimator's own errors."""
    from .estimators import get_model
    model = get_model(plan.model_id)
    n = int(plan.hyperparam("n_samples", 0))
    return run_estimator(plan.estimator, model, n, plan.seed, sampling_scheme)


def debugger_fix(plan: ExecutionPlan, error: Exception) -> ExecutionPlan:
    """Rule-table patches: known error classes map to field patches;
    anything else is unrecoverable."""
    if isinstance(error, InsufficientSamples):
        info = catalog.estimator_info(plan.estimator)
        d = _plan_dim(plan)
        n_min = info.n_min(d) if d else 10
        new_n = max(n_min // max(info.cost_multiplier(d or 1), 1), 10)
        params = tuple((k, float(new_n) if k == "n_samples" else v)
                       for k, v in plan.hyperparams)
        return replace(plan, hyperparams=params)
    raise Unrecoverable(f"no patch rule for {type(error).__name__}: {error}")


def advisor_report(ms: MethodScheme, obs: SAResult | None, breakdown,
                   ps: ProblemScheme, settings: Settings = DEFAULTS,
                   avoid: frozenset[str] = frozenset()) -> str:
    """Deterministic post-execution review; its wording drives the
    diagnostic root-cause rules downstream."""
    if obs is None or not obs.executed:
        return ("execution crashed before producing results; numerical run "
                "unrecoverable. recommend reviewing the implementation.")
    attrs = obs.attributes()
    missing = [a for a in ms.required_attributes if a not in attrs]
    if missing:
        return ("required attribute " + " and ".join(missing)
                + " absent from the observation; the executed method does "
                "not produce the outputs the scheme demands.")
    if obs.nan_count > 0:
        return ("numerical degeneracy: nan entries present in the computed "
                "indices; the output variance may be degenerate.")
    converged = breakdown.total >= settings.r_threshold
    if converged:
        return (f"{ms.estimator} indices successfully computed from "
                f"{obs.evaluations_used} evaluations; all consistency checks "
                "passed and the estimate meets the precision target.")
    # Partial convergence: advise a method change when the current scheme
    # cannot report first-order variance attribution (or only simulates it)
    # and a real alternative that does is still untried.
    info = catalog.estimator_info(ms.estimator)
    needs_swap = "s1" not in info.produces or info.simulated
    pool = [e for e in ps.feasible_sa_estimators
            if "s1" in catalog.estimator_info(e).produces
            and not catalog.estimator_info(e).simulated
            and e not in avoid and e != ms.estimator]
    if needs_swap and pool:
        target = pool[0]
        return (f"indices computed but convergence is partial; the chosen "
                f"method reports {ms.index_type} measures while the study "
                f"requires first-order variance attribution. this looks "
                f"like a wrong estimator for the precision target. "
                f"prescribe estimator {target}.")
    n = int(ms.hyperparam("n_samples", 0))
    return (f"estimate has not yet reached the precision target; sampling "
            f"appears insufficient at n_samples={n}. recommend increasing "
            f"the sample size.")


def run_agent(role: str, message: AgentMessage,
              script: ScriptedAgentConfig | None = None,
              rng_seed: int = 0) -> AgentMessage:
    """Script-table dispatch with per-role defaults.

    Roles whose defaults need orchestration context (strategist, refactor,
    inspector, debugger, advisor) are invoked directly by the pipeline; this
    entry point serves scripted overrides and the context-free roles.
    """
    if role not in ROLES:
        raise ScriptMiss(f"unknown role {role!r}")
    if script is not None:
        hit = script.lookup(role, message.digest())
        if hit is not None:
            return AgentMessage(role=role, payload=hit,
                                free_text=str(hit) if isinstance(hit, str)
                                else "")
    if role == "coordinator" and isinstance(message.payload, dict):
        ps = coordinator(message.payload)
        return AgentMessage(role=role, payload=ps,
                            free_text=render_problem_text(ps))
    if role == "gatekeeper" and isinstance(message.payload, ProblemScheme):
        ok, why = gatekeeper(message.payload)
        return AgentMessage(role=role, payload=ok, free_text=why)
    if role == "model_translator" and isinstance(message.payload,
                                                 ProblemScheme):
        model = model_translator(message.payload)
        return AgentMessage(role=role, payload=model, free_text=model.id)
    if role == "study_agent" and isinstance(message.payload, str):
        text = study_agent(message.payload)
        return AgentMessage(role=role, payload=text, free_text=text)
    raise ScriptMiss(f"no script entry and no default for role {role!r}")


# ---------------------------------------------------------------------------
# Drift injection

def inject_drift(message: AgentMessage, spec: DriftSpec, rng_seed: int,
                 iteration: int | None = None
                 ) -> tuple[AgentMessage, dict | None]:
    """Adversarial mid-pipeline mutation of a message copy.

    Returns (possibly mutated message, event record or None).  The original
    message object is never modified.
    """
    if spec.kind == "none" or spec.probability == 0.0:
        return message, None
    if spec.activation_iteration is not None and iteration is not None \
            and iteration < spec.activation_iteration:
        return message, None
    rng = np.random.default_rng(rng_seed)
    if rng.random() >= spec.probability:
        return message, None

    if spec.kind == "method_swap" and isinstance(message.payload, str):
        original = message.payload
        match = _EST_TOKEN.search(original)
        source = match.group(1) if match else ""
        target = spec.replacement_value or "Morris"
        if not source or source == target:
            return message, None
        if spec.source_value and source != spec.source_value:
            return message, None
        # Swap the rationale vocabulary first, then the name tokens, so the
        # corruption reads like a coherent (but wrong) report rather than a
        # token splice.
        mutated = original.replace(_kw(source), _kw(target))
        mutated = _EST_TOKEN.sub(target, mutated)
        event = {"kind": spec.kind, "field": spec.target_field,
                 "from": source, "to": target}
        return AgentMessage(role=message.role, payload=mutated,
                            free_text=mutated), event
    if spec.kind == "field_corruption":
        mutated = _N_SAMPLES.sub(f"n_samples={spec.replacement_value}",
                                 str(message.payload))
        event = {"kind": spec.kind, "field": spec.target_field,
                 "to": spec.replacement_value}
        return AgentMessage(role=message.role, payload=mutated,
                            free_text=mutated), event
    return message, None
