"""Method catalog: estimator metadata, dimension catalogs, feasibility predicates.

Feasibility predicates are data (id + closure over the context) registered in a
table, so new methods extend the filter without code changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import UnknownEstimator

Task = str  # "SA" | "UQ"

SA = "SA"
UQ = "UQ"


@dataclass(frozen=True)
class EstimatorInfo:
    id: str
    task: str
    index_type: str                 # variance_based | rank_based | screening
    produces: tuple[str, ...]
    sampling_scheme: str
    n_min_formula: str              # symbolic id, rendered with d_in
    cost_kind: str                  # pick_freeze | trajectories | single_loop
    library_class: str
    simulated: bool = False
    keywords: str = ""              # vocabulary used by the text renderers

    def n_min(self, d_in: int) -> int:
        return _N_MIN_RULES[self.n_min_formula](d_in)

    def cost(self, n_samples: int, d_in: int) -> int:
        if self.cost_kind == "pick_freeze":
            return n_samples * (d_in + 2)
        if self.cost_kind == "trajectories":
            return n_samples * (d_in + 1)
        return n_samples

    def cost_multiplier(self, d_in: int) -> int:
        if self.cost_kind == "pick_freeze":
            return d_in + 2
        if self.cost_kind == "trajectories":
            return d_in + 1
        return 1


_N_MIN_RULES: dict[str, Callable[[int], int]] = {
    "500 * (d_in + 2)": lambda d: 500 * (d + 2),
    "500 * d_in": lambda d: 500 * d,
    "10 * (d_in + 1)": lambda d: 10 * (d + 1),
    "2 * C(d_in + 3, 3)": lambda d: 2 * math.comb(d + 3, 3),
    "10": lambda d: 10,
}


SA_ESTIMATORS: dict[str, EstimatorInfo] = {
    e.id: e
    for e in [
        EstimatorInfo(
            id="Sobol", task=SA, index_type="variance_based",
            produces=("s1", "st"), sampling_scheme="pick-freeze",
            n_min_formula="500 * (d_in + 2)", cost_kind="pick_freeze",
            library_class="SobolSensitivity",
            keywords=("sobol variance decomposition saltelli pick freeze "
                      "first order total order indices jansen"),
        ),
        EstimatorInfo(
            id="Chatterjee", task=SA, index_type="rank_based",
            produces=("rank_indices",), sampling_scheme="single-loop",
            n_min_formula="10", cost_kind="single_loop",
            library_class="ChatterjeeSensitivity",
            keywords=("chatterjee rank correlation coefficient moment free "
                      "xi nonparametric distribution free"),
        ),
        EstimatorInfo(
            id="CVM", task=SA, index_type="rank_based",
            produces=("s1",), sampling_scheme="single-loop",
            n_min_formula="500 * (d_in + 2)", cost_kind="single_loop",
            library_class="CramerVonMisesSensitivity",
            keywords=("cramer von mises rank statistic moment free "
                      "empirical distribution indices"),
        ),
        EstimatorInfo(
            id="Morris", task=SA, index_type="screening",
            produces=("mu_star", "sigma"), sampling_scheme="trajectories",
            n_min_formula="10 * (d_in + 1)", cost_kind="trajectories",
            library_class="MorrisSensitivity",
            keywords=("morris elementary effects screening trajectories "
                      "mu star sigma winding stairs grid levels"),
        ),
        EstimatorInfo(
            id="PCE_SA", task=SA, index_type="variance_based",
            produces=("s1", "st"), sampling_scheme="regression",
            n_min_formula="500 * d_in", cost_kind="single_loop",
            library_class="PCESensitivity", simulated=True,
            keywords=("polynomial chaos expansion surrogate spectral "
                      "coefficients regression sobol analytic"),
        ),
        EstimatorInfo(
            id="Generalized_Sobol", task=SA, index_type="variance_based",
            produces=("s1", "st"), sampling_scheme="pick-freeze",
            n_min_formula="500 * (d_in + 2)", cost_kind="pick_freeze",
            library_class="GeneralizedSobolSensitivity", simulated=True,
            keywords=("generalized sobol vector valued multi output "
                      "aggregated variance contributions"),
        ),
    ]
}

UQ_ESTIMATORS: dict[str, EstimatorInfo] = {
    e.id: e
    for e in [
        EstimatorInfo(
            id="MCS_moments", task=UQ, index_type="variance_based",
            produces=("mean", "variance"), sampling_scheme="monte-carlo",
            n_min_formula="10", cost_kind="single_loop",
            library_class="MonteCarloMoments", simulated=True,
            keywords="monte carlo sampling moments mean variance estimate",
        ),
        EstimatorInfo(
            id="PCE_moments", task=UQ, index_type="variance_based",
            produces=("mean", "variance"), sampling_scheme="regression",
            n_min_formula="500 * d_in", cost_kind="single_loop",
            library_class="PCEMoments", simulated=True,
            keywords="polynomial chaos moments surrogate spectral",
        ),
        EstimatorInfo(
            id="FORM_reliability", task=UQ, index_type="variance_based",
            produces=("pf",), sampling_scheme="optimization",
            n_min_formula="10", cost_kind="single_loop",
            library_class="FORM", simulated=True,
            keywords="first order reliability limit state failure probability",
        ),
        EstimatorInfo(
            id="MCMC_Bayes", task=UQ, index_type="variance_based",
            produces=("posterior_mean",), sampling_scheme="mcmc",
            n_min_formula="10", cost_kind="single_loop",
            library_class="BayesMCMC", simulated=True,
            keywords="markov chain monte carlo bayesian posterior inference",
        ),
    ]
}


def estimator_info(estimator_id: str) -> EstimatorInfo:
    info = SA_ESTIMATORS.get(estimator_id) or UQ_ESTIMATORS.get(estimator_id)
    if info is None:
        raise UnknownEstimator(estimator_id)
    return info


def estimator_ids(task: str) -> tuple[str, ...]:
    table = SA_ESTIMATORS if task == SA else UQ_ESTIMATORS
    return tuple(table)


# ---------------------------------------------------------------------------
# Dimension catalogs.  Only the estimator dimension is fully named by the
# method table; the rest are config-declared with shipped defaults.
# D5-D7 (confidence intervals, screening pre-filter, surrogate) are reserved
# config slots, not part of the enumerated product.

SA_DIMENSIONS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("D1_sampling", ("MonteCarlo", "LatinHypercube")),
    ("D2_estimator", tuple(SA_ESTIMATORS)),
    ("D3_budget", ("Fixed_N", "Staged")),
    ("D4_output", ("Scalar", "Aggregated")),
)

UQ_DIMENSIONS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("D1_propagation", ("MonteCarlo", "LatinHypercube", "ImportanceSampling",
                        "MCMC", "PCE", "GaussianProcess")),
    ("D2_estimator", tuple(UQ_ESTIMATORS)),
    ("D3_budget", ("Fixed_N", "Staged")),
    ("D4_output", ("Scalar", "Aggregated")),
    ("D5_ci", ("None_CI", "Bootstrap_CI")),
    ("D6_prefilter", ("None_prefilter", "Morris_prefilter")),
)

RESERVED_DIMENSIONS = ("D5_ci", "D6_prefilter", "D7_surrogate")


def dimensions(task: str) -> tuple[tuple[str, tuple[str, ...]], ...]:
    return SA_DIMENSIONS if task == SA else UQ_DIMENSIONS


# ---------------------------------------------------------------------------
# Feasibility predicate registry.  Each entry: (predicate id, estimator ids it
# gates, test(context, estimator_id, threshold) -> (ok, reason, values)).

@dataclass(frozen=True)
class Predicate:
    id: str
    applies_to: tuple[str, ...]
    test: Callable  # (ctx_like, screening_dim_threshold) -> (bool, str, dict)


def _morris_dim(ctx, thr):
    ok = ctx.d_in >= thr
    return ok, f"screening interpretation unreliable for d_in < {thr}", {
        "d_in": ctx.d_in, "threshold": thr}


def _gen_sobol_out(ctx, thr):
    ok = ctx.d_out > 1
    return ok, "requires vector-valued output", {"d_out": ctx.d_out}


def _pce_budget(ctx, thr):
    need = 500 * ctx.d_in
    ok = ctx.n_budget >= need
    return ok, "surrogate accuracy requires sufficient samples", {
        "n_budget": ctx.n_budget, "required": need}


def _variance_budget(ctx, thr):
    need = 500 * (ctx.d_in + 2)
    ok = ctx.n_budget >= need
    return ok, "pick-freeze budget below minimum", {
        "n_budget": ctx.n_budget, "required": need}


def _limit_state(ctx, thr):
    ok = bool(getattr(ctx, "limit_state_defined", False))
    return ok, "requires a defined limit state", {}


def _target_pdf(ctx, thr):
    ok = bool(getattr(ctx, "target_pdf_known", False))
    return ok, "requires a known target pdf", {}


PREDICATES: tuple[Predicate, ...] = (
    Predicate("morris_screening_high_dim", ("Morris",), _morris_dim),
    Predicate("gen_sobol_multioutput", ("Generalized_Sobol",), _gen_sobol_out),
    Predicate("pce_min_samples", ("PCE_SA", "PCE_moments"), _pce_budget),
    Predicate("variance_min_samples", ("Sobol", "CVM", "Generalized_Sobol"),
              _variance_budget),
    Predicate("form_limit_state", ("FORM_reliability",), _limit_state),
    Predicate("mcmc_target_pdf", ("MCMC_Bayes",), _target_pdf),
)
