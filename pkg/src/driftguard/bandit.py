"""Contextual bandit policy: one shared Bayesian linear reward model over
(context, action) features, Thompson-sampled selection, a decaying
epsilon-greedy overlay, novelty down-weighting, and archive warm-starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .action_space import ActionTuple
from .config import DEFAULTS, Settings
from .errors import InvalidReward, NoFeasibleAction
from .schemes import ContextVector, DiagnosticScheme, MethodScheme, \
    ProblemScheme, build_method_scheme

EXPLORATION_MODES = ("exploit", "neutral", "explore_max")

_DIST_MODES = ("Uniform", "Normal", "Other")


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def feature_dim(task: str) -> int:
    dims = catalog.SA_DIMENSIONS if task == "SA" else catalog.UQ_DIMENSIONS
    onehot = sum(len(levels) for _, levels in dims)
    n_est = len(catalog.estimator_ids(task))
    return 1 + 7 + onehot + 2 * n_est


def encode_features(x: ContextVector, a: ActionTuple) -> FeatureVector:
    """Deterministic feature map; context block scaled to [0, 1]."""
    scaled_d = min(1.0, x.d_in / 20.0)
    scaled_logn = min(1.0, math.log10(max(x.n_budget, 1)) / 6.0)
    context = [scaled_d,
               min(1.0, x.d_out / 10.0),
               scaled_logn,
               min(1.0, x.epsilon)]
    mode = x.dist_family_mode
    context.extend(1.0 if mode == m else 0.0 for m in _DIST_MODES)

    dims = catalog.SA_DIMENSIONS if a.task == "SA" else catalog.UQ_DIMENSIONS
    onehot = []
    for (_, levels), level in zip(dims, a.dims):
        onehot.extend(1.0 if level == lv else 0.0 for lv in levels)

    interaction = []
    for est in catalog.estimator_ids(a.task):
        hit = 1.0 if a.estimator == est else 0.0
        interaction.extend((hit * scaled_d, hit * scaled_logn))

    return FeatureVector(tuple([1.0] + context + onehot + interaction))


def exploration_schedule(n: int, mode: str,
                         settings: Settings = DEFAULTS) -> float:
    """Decaying epsilon: base(mode) * gamma^(n-1), floored."""
    b = settings.bandit
    base = {"exploit": b.eps_base_exploit,
            "neutral": b.eps_base_neutral,
            "explore_max": b.eps_base_explore_max}[mode]
    return max(b.eps_floor, base * b.eps_gamma ** (n - 1))


def default_n_samples(estimator: str, x: ContextVector,
                      settings: Settings = DEFAULTS) -> int:
    """Per-loop sample size targeting min(budget, max(safety*n_min, budget/2))
    total evaluations."""
    info = catalog.estimator_info(estimator)
    n_min = info.n_min(x.d_in)
    target = min(x.n_budget,
                 max(int(settings.bandit.safety_factor * n_min),
                     x.n_budget // 2))
    return max(2, target // info.cost_multiplier(x.d_in))


class PolicyState:
    """Posterior over the shared linear reward model plus selection history.

    Single-writer: only the session orchestrator mutates it.
    """

    def __init__(self, task: str = "SA", settings: Settings = DEFAULTS,
                 exploration_mode: str = "explore_max"):
        self.task = task
        self.settings = settings
        self.dim = feature_dim(task)
        b = settings.bandit
        self.noise_variance = b.noise_variance
        self.precision = np.eye(self.dim) * b.prior_precision
        self.b_vector = np.zeros(self.dim)
        self.iteration = 0
        self.estimator_counts: dict[str, int] = {}
        self.exploration_mode = exploration_mode

    # -- posterior -----------------------------------------------------

    @property
    def posterior_mean(self) -> np.ndarray:
        return np.linalg.solve(self.precision, self.b_vector)

    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.precision)

    def sample_weights(self, rng: np.random.Generator) -> np.ndarray:
        """One Thompson draw: w ~ N(mean, precision^-1)."""
        chol = self.cholesky()
        z = rng.standard_normal(self.dim)
        return self.posterior_mean + np.linalg.solve(chol.T, z)

    def _absorb(self, phi: np.ndarray, reward: float, weight: float) -> None:
        # Rewards are modeled as deviations from the mid-scale center: a
        # unit-variance prior cannot represent 0-100 levels directly, and
        # uncentered updates let the shared features absorb the whole level,
        # collapsing the posterior spread that drives exploration.
        deviation = reward - self.settings.bandit.reward_center
        self.precision += weight * np.outer(phi, phi) / self.noise_variance
        self.b_vector += weight * phi * deviation / self.noise_variance

    def update(self, phi: FeatureVector, reward: float,
               estimator: str | None = None) -> None:
        """Rank-1 Bayesian update; increments iteration and arm count."""
        if not math.isfinite(reward):
            raise InvalidReward(f"non-finite reward {reward!r}")
        self._absorb(phi.as_array(), reward, 1.0)
        self.iteration += 1
        if estimator:
            self.estimator_counts[estimator] = \
                self.estimator_counts.get(estimator, 0) + 1
        self.cholesky()  # positive-definiteness guard

    def warm_start(self, per_arm_stats, match: str) -> None:
        """Replay archived per-arm statistics as weighted pseudo-observations.

        per_arm_stats: iterable of (phi values, mean reward, count).
        """
        if match not in ("close", "weak"):
            raise ValueError(f"warm_start requires close/weak, got {match!r}")
        b = self.settings.bandit
        weight = b.warm_weight_close if match == "close" else b.warm_weight_weak
        for phi_values, mean_reward, count in per_arm_stats:
            phi = np.asarray(phi_values, dtype=float)
            self._absorb(phi, float(mean_reward), weight * float(count))
        self.exploration_mode = "exploit" if match == "close" else "neutral"

    # -- persistence -----------------------------------------------------

    def snapshot(self) -> dict:
        return {"task": self.task,
                "precision": self.precision.tolist(),
                "b_vector": self.b_vector.tolist(),
                "iteration": self.iteration,
                "estimator_counts": dict(self.estimator_counts),
                "exploration_mode": self.exploration_mode}

    @classmethod
    def from_snapshot(cls, data: dict,
                      settings: Settings = DEFAULTS) -> "PolicyState":
        st = cls(task=data["task"], settings=settings,
                 exploration_mode=data["exploration_mode"])
        st.precision = np.asarray(data["precision"], dtype=float)
        st.b_vector = np.asarray(data["b_vector"], dtype=float)
        st.iteration = int(data["iteration"])
        st.estimator_counts = {k: int(v)
                               for k, v in data["estimator_counts"].items()}
        return st


@dataclass(frozen=True)
class PolicyDecision:
    action: ActionTuple
    method_scheme: MethodScheme
    sampled_scores: tuple[tuple[str, float], ...]  # (action key, score)
    novelty_penalty_applied: bool
    epsilon: float
    epsilon_fired: bool


def _action_key(a: ActionTuple) -> str:
    return "|".join(a.dims)


def select_action(st: PolicyState, ps: ProblemScheme,
                  feasible: list[ActionTuple],
                  diag: DiagnosticScheme | None = None,
                  novelty_warning: bool = False,
                  rng_seed: int = 0,
                  prev_hyperparams: dict | None = None,
                  blocked_estimator: str = "",
                  settings: Settings = DEFAULTS) -> PolicyDecision:
    """One Thompson-sampled decision over the feasible action set.

    Scores are posterior-sample dot-products minus the novelty penalty
    (rho * prior count of the action's estimator, only under a novelty
    warning) and the block penalty for a diagnostically blocked estimator.
    A decaying epsilon-greedy overlay replaces the argmax with a uniform
    pick.  Prescribed estimators and hyperparameters dominate.
    """
    if not feasible:
        raise NoFeasibleAction("empty feasible action set")
    x = ps.context
    b = settings.bandit
    rng = np.random.default_rng(rng_seed)

    candidates = list(feasible)
    if diag is not None and diag.prescribed_estimator:
        restricted = [a for a in candidates
                      if a.estimator == diag.prescribed_estimator]
        if restricted:
            candidates = restricted

    blocked = blocked_estimator if (diag is not None
                                    and diag.block_action) else ""

    weights = st.sample_weights(rng)
    scored = []
    novelty_applied = False
    for a in candidates:
        phi = encode_features(x, a).as_array()
        score = float(weights @ phi)
        if novelty_warning:
            count = st.estimator_counts.get(a.estimator, 0)
            if count:
                score -= b.novelty_rho * count
                novelty_applied = True
        if blocked and a.estimator == blocked:
            score -= b.block_beta
        scored.append((a, score))

    eps = exploration_schedule(st.iteration + 1, st.exploration_mode, settings)
    fired = bool(rng.random() < eps)
    if fired:
        action = candidates[int(rng.integers(len(candidates)))]
    else:
        action = max(scored, key=lambda pair: pair[1])[0]

    # Hyperparameters carry over only when the estimator is unchanged;
    # diagnostic prescriptions dominate everything.
    prev = dict(prev_hyperparams or {})
    hyperparams = {}
    if prev.pop("_estimator", None) == action.estimator:
        hyperparams.update(prev)
    hyperparams.setdefault("n_samples",
                           default_n_samples(action.estimator, x, settings))
    if diag is not None:
        if diag.prescribed_N_factor is not None:
            hyperparams["n_samples"] = int(hyperparams["n_samples"]
                                           * diag.prescribed_N_factor)
        if diag.prescribed_hyperparam:
            hyperparams.update(dict(diag.prescribed_hyperparam))
    # A size prescribed for a different estimator may undershoot this one's
    # minimum, so clamp up to its per-loop floor.
    info = catalog.estimator_info(action.estimator)
    floor = -(-info.n_min(x.d_in) // info.cost_multiplier(x.d_in))
    hyperparams["n_samples"] = max(int(hyperparams["n_samples"]), floor)

    ms = build_method_scheme(action, ps, hyperparams)
    return PolicyDecision(
        action=action, method_scheme=ms,
        sampled_scores=tuple((_action_key(a), s) for a, s in scored),
        novelty_penalty_applied=novelty_applied,
        epsilon=eps, epsilon_fired=fired)
