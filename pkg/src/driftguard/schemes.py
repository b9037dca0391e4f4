"""Context vector and the three structured inter-agent scheme types.

All scheme types are immutable values; canonical serialization is UTF-8 JSON
with sorted keys, the exact format that appears in session traces and the
archive file.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, fields, is_dataclass, replace

from . import action_space, catalog
from .action_space import ActionTuple
from .config import DEFAULTS, Settings
from .errors import InvalidProblem, ParseError, UnknownEstimator

TASKS = ("SA", "UQ")
DIST_FAMILIES = ("Uniform", "Normal", "Other")
OUTPUT_CLASSES = ("scalar", "vector", "field")
MODEL_CLASSES = ("additive", "multiplicative", "mixed", "unknown")
ROOT_CAUSES = ("insufficient_N", "wrong_estimator", "attribute_error",
               "numerical_degeneracy", "none")
BUDGET_STATUSES = ("sufficient", "tight", "infeasible")
CONVERGENCE_STATUSES = ("converged", "partial", "failed")
REWARD_COMPONENTS = ("integrity", "accuracy", "details", "optimality")

# SAResult field -> attribute name the generated plan must bind.
ATTRIBUTE_NAMES = {
    "s1": "first_order_indices",
    "st": "total_order_indices",
    "rank_indices": "chatterjee_indices",
    "mu_star": "mu_star",
    "sigma": "sigma_effects",
    "mean": "output_mean",
    "variance": "output_variance",
    "pf": "failure_probability",
    "posterior_mean": "posterior_mean",
}

_VALIDITY_CONDITIONS = {
    "Sobol": (("independent_inputs", "scalar_output", "budget_above_n_min"),
              ("correlated_inputs", "high_dim_without_screening")),
    "Chatterjee": (("any_distribution", "monotone_dependence_target"),
                   ("interaction_structure_required",)),
    "CVM": (("any_distribution",), ("interaction_structure_required",)),
    "Morris": (("high_input_dimension", "screening_objective"),
               ("precise_index_values_required",)),
    "PCE_SA": (("smooth_response", "budget_above_n_min"),
               ("discontinuous_response",)),
    "Generalized_Sobol": (("vector_output",), ("scalar_output",)),
}


@dataclass(frozen=True)
class ContextVector:
    """Fixed 8-component problem descriptor conditioning every decision."""

    d_in: int
    d_out: int
    n_budget: int
    epsilon: float
    task: str
    dist_family: tuple[str, ...]       # one entry per input
    multi_output_flag: bool
    feasibility_bits: tuple[bool, ...]  # over the task's estimator catalog

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise InvalidProblem("dimensionality must be positive")
        if self.task not in TASKS:
            raise InvalidProblem(f"unknown task {self.task!r}")
        if self.multi_output_flag != (self.d_out > 1):
            raise InvalidProblem("multi_output_flag inconsistent with d_out")

    @property
    def dist_family_mode(self) -> str:
        return Counter(self.dist_family).most_common(1)[0][0]


@dataclass(frozen=True)
class ProblemScheme:
    """Structured problem representation produced once per session."""

    context: ContextVector
    output_class: str
    model_class: str
    has_dependence: bool
    limit_state_defined: bool
    low_fidelity_model: bool
    target_pdf_known: bool
    high_d_in_flag: bool
    field_out_flag: bool
    feasible_sa_estimators: tuple[str, ...]
    feasible_uq_estimators: tuple[str, ...]
    estimator_feasibility: tuple[tuple[str, bool, str], ...]  # (id, ok, constraint)
    model_id: str = ""


@dataclass(frozen=True)
class MethodScheme:
    """Complete methodological specification attached to a policy decision."""

    action: ActionTuple
    estimator: str
    index_type: str
    produces: tuple[str, ...]
    sampling_scheme: str
    n_min_formula: str
    n_min_value: int
    n_cost_actual: int
    budget_status: str
    library_class: str
    required_attributes: tuple[str, ...]
    forbidden_attributes: tuple[str, ...]
    hyperparams: tuple[tuple[str, float], ...]
    valid_when: tuple[str, ...]
    invalid_when: tuple[str, ...]

    def hyperparam(self, name: str, default=None):
        for key, value in self.hyperparams:
            if key == name:
                return value
        return default


@dataclass(frozen=True)
class DiagnosticScheme:
    """Machine-readable diagnosis closing each iteration."""

    convergence_status: str
    bottleneck_dim: str
    reward: float
    root_cause: str
    prescribed_estimator: str | None
    prescribed_N_factor: float | None
    prescribed_hyperparam: tuple[tuple[str, float], ...] | None
    penalize_action: bool
    block_action: bool
    physical_insight: str = ""

    def __post_init__(self):
        if self.block_action and self.root_cause not in ("attribute_error",
                                                         "wrong_estimator"):
            raise InvalidProblem("block_action requires attribute/estimator cause")
        if self.prescribed_N_factor is not None and self.prescribed_N_factor <= 0:
            raise InvalidProblem("prescribed_N_factor must be positive")


# ---------------------------------------------------------------------------
# Builders

def build_context_vector(desc: dict, settings: Settings = DEFAULTS) -> ContextVector:
    try:
        d_in = int(desc["d_in"])
        d_out = int(desc["d_out"])
        n_budget = int(desc["n_budget"])
        epsilon = float(desc.get("epsilon", 0.05))
        task = desc["task"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProblem(f"incomplete problem description: {exc}") from exc
    if d_in < 1 or d_out < 1:
        raise InvalidProblem("dimensionality must be positive")
    if task not in TASKS:
        raise InvalidProblem(f"unknown task {task!r}")
    dists = tuple(desc.get("dist_family") or ("Other",) * d_in)
    dists = tuple(d if d in DIST_FAMILIES else "Other" for d in dists)
    base = ContextVector(d_in=d_in, d_out=d_out, n_budget=n_budget,
                         epsilon=epsilon, task=task, dist_family=dists,
                         multi_output_flag=d_out > 1, feasibility_bits=())
    bits = action_space.feasibility_bits(base, settings)
    return replace(base, feasibility_bits=bits)


class _FlagProxy:
    """Context plus structural flags, for UQ feasibility predicates."""

    def __init__(self, ctx: ContextVector, desc: dict):
        self.d_in = ctx.d_in
        self.d_out = ctx.d_out
        self.n_budget = ctx.n_budget
        self.task = "UQ"
        self.limit_state_defined = bool(desc.get("limit_state_defined", False))
        self.target_pdf_known = bool(desc.get("target_pdf_known", False))


def build_problem_scheme(desc: dict, settings: Settings = DEFAULTS) -> ProblemScheme:
    """Structured problem scheme with feasibility pre-computed; deterministic."""
    ctx = build_context_vector(desc, settings)
    sa_proxy = replace(ctx, task="SA",
                       feasibility_bits=()) if ctx.task != "SA" else ctx
    sa_flags = action_space.estimator_feasibility(sa_proxy, settings)
    uq_flags = action_space.estimator_feasibility(_FlagProxy(ctx, desc), settings)

    per_estimator = []
    for est, info in {**sa_flags, **uq_flags}.items():
        constraint = ""
        if info["violations"]:
            v = info["violations"][0]
            constraint = f"{v['predicate']}: {v['values']}"
        per_estimator.append((est, info["feasible"], constraint))

    return ProblemScheme(
        context=ctx,
        output_class=desc.get("output_class", "scalar" if ctx.d_out == 1 else "vector"),
        model_class=desc.get("model_class", "unknown"),
        has_dependence=bool(desc.get("has_dependence", False)),
        limit_state_defined=bool(desc.get("limit_state_defined", False)),
        low_fidelity_model=bool(desc.get("low_fidelity_model", False)),
        target_pdf_known=bool(desc.get("target_pdf_known", False)),
        high_d_in_flag=ctx.d_in >= settings.screening_dim_threshold,
        field_out_flag=desc.get("output_class") == "field",
        feasible_sa_estimators=tuple(e for e in catalog.estimator_ids("SA")
                                     if sa_flags[e]["feasible"]),
        feasible_uq_estimators=tuple(e for e in catalog.estimator_ids("UQ")
                                     if uq_flags[e]["feasible"]),
        estimator_feasibility=tuple(per_estimator),
        model_id=desc.get("model_id", ""),
    )


def build_method_scheme(action: ActionTuple, ps: ProblemScheme,
                        hyperparams: dict | None = None) -> MethodScheme:
    """Method scheme with budget arithmetic derived from the estimator catalog."""
    info = catalog.estimator_info(action.estimator)
    ctx = ps.context
    hyperparams = dict(hyperparams or {})
    n_min_value = info.n_min(ctx.d_in)
    n_samples = int(hyperparams.get("n_samples", 0))
    n_cost_actual = info.cost(n_samples, ctx.d_in)
    if n_min_value > ctx.n_budget:
        budget_status = "infeasible"
    elif n_cost_actual > ctx.n_budget:
        budget_status = "tight"
    else:
        budget_status = "sufficient"
    attrs = tuple(ATTRIBUTE_NAMES[p] for p in info.produces)
    valid_when, invalid_when = _VALIDITY_CONDITIONS.get(action.estimator, ((), ()))
    return MethodScheme(
        action=action,
        estimator=action.estimator,
        index_type=info.index_type,
        produces=attrs,
        sampling_scheme=info.sampling_scheme,
        n_min_formula=info.n_min_formula,
        n_min_value=n_min_value,
        n_cost_actual=n_cost_actual,
        budget_status=budget_status,
        library_class=info.library_class,
        required_attributes=attrs,
        forbidden_attributes=(),
        hyperparams=tuple(sorted((k, float(v)) for k, v in hyperparams.items())),
        valid_when=valid_when,
        invalid_when=invalid_when,
    )


_N_SAMPLES_RE = re.compile(r"n_samples\s*[=:]\s*(\d+)")
_PRESCRIBE_RE = re.compile(r"prescribe estimator (\w+)", re.IGNORECASE)

# Ordered first-match rules: (keyword, root_cause).
_ROOT_CAUSE_RULES = (
    ("attribute", "attribute_error"),
    ("wrong estimator", "wrong_estimator"),
    ("insufficient", "insufficient_N"),
    ("degenerate", "numerical_degeneracy"),
    ("nan", "numerical_degeneracy"),
    ("numerical", "numerical_degeneracy"),
)


def build_diagnostic_scheme(report: str, obs, breakdown,
                            settings: Settings = DEFAULTS) -> DiagnosticScheme:
    """Deterministic keyword-pattern diagnosis; pure for fixed inputs."""
    text = (report or "").lower()
    root_cause = "none"
    for keyword, cause in _ROOT_CAUSE_RULES:
        if keyword in text:
            root_cause = cause
            break

    caps = {"integrity": settings.reward.integrity_execution
            + settings.reward.integrity_attributes
            + settings.reward.integrity_warnings,
            "accuracy": settings.reward.accuracy_precision
            + settings.reward.accuracy_consistency_sum
            + settings.reward.accuracy_consistency_order,
            "details": settings.reward.details_cap,
            "optimality": settings.reward.optimality_cap}
    ratios = {c: getattr(breakdown, c) / caps[c] for c in REWARD_COMPONENTS}
    bottleneck = min(REWARD_COMPONENTS, key=lambda c: (ratios[c],
                                                       REWARD_COMPONENTS.index(c)))

    prescribed_estimator = None
    match = _PRESCRIBE_RE.search(report or "")
    if match:
        try:
            prescribed_estimator = catalog.estimator_info(match.group(1)).id
        except UnknownEstimator:
            prescribed_estimator = None

    prescribed_n_factor = None
    prescribed_hyperparam = None
    if root_cause == "insufficient_N":
        prescribed_n_factor = 2.0
        n_match = _N_SAMPLES_RE.search(text)
        if n_match:
            # Prescribe the already-scaled size so an override and the
            # factor agree instead of the stale value undoing the increase.
            scaled = float(n_match.group(1)) * prescribed_n_factor
            prescribed_hyperparam = (("n_samples", scaled),)

    block = root_cause == "attribute_error"
    if breakdown.total >= settings.r_threshold:
        status = "converged"
    elif breakdown.integrity == 0:
        status = "failed"
    else:
        status = "partial"

    return DiagnosticScheme(
        convergence_status=status,
        bottleneck_dim=bottleneck,
        reward=float(breakdown.total),
        root_cause=root_cause,
        prescribed_estimator=prescribed_estimator,
        prescribed_N_factor=prescribed_n_factor,
        prescribed_hyperparam=prescribed_hyperparam,
        penalize_action=block or root_cause == "wrong_estimator",
        block_action=block,
        physical_insight=report or "",
    )


# ---------------------------------------------------------------------------
# Canonical serialization: UTF-8 JSON, sorted keys, round-trips bit-exactly.

_SCHEME_TYPES = {}


def _register(cls):
    _SCHEME_TYPES[cls.__name__] = cls
    return cls


for _cls in (ContextVector, ProblemScheme, MethodScheme, DiagnosticScheme,
             ActionTuple):
    _register(_cls)


def _to_jsonable(value):
    if is_dataclass(value) and not isinstance(value, type):
        payload = {f.name: _to_jsonable(getattr(value, f.name))
                   for f in fields(value)}
        payload["__kind__"] = type(value).__name__
        return payload
    if isinstance(value, tuple):
        return [_to_jsonable(v) for v in value]
    return value


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _from_jsonable(value):
    if isinstance(value, dict) and "__kind__" in value:
        kind = value.pop("__kind__")
        cls = _SCHEME_TYPES.get(kind)
        if cls is None:
            raise ParseError(f"unknown scheme kind {kind!r}")
        kwargs = {k: _tuplify(_from_jsonable(v)) for k, v in value.items()}
        return cls(**kwargs)
    if isinstance(value, list):
        return [_from_jsonable(v) for v in value]
    return value


def serialize_scheme(scheme) -> str:
    """Canonical JSON text: sorted keys, compact separators."""
    return json.dumps(_to_jsonable(scheme), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False)


def deserialize_scheme(text: str):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc
    try:
        return _from_jsonable(raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ParseError(str(exc)) from exc
