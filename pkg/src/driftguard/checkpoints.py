"""Semantic checkpoints CP0-CP7: cosine gates with adaptive thresholds.

Each checkpoint compares an embedding similarity against a threshold that
starts at a calibrated initial value and adapts to the observed, drift-free
similarity distribution via an exponential moving average.  Setting a
checkpoint's initial threshold to -1 disables it (unconditional pass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import DEFAULTS, Settings
from .embedding import NullDistribution

DISABLED = -1.0

#: cp_id -> (theta0, theta_min, blocking, inverted, action_on_fail)
CHECKPOINT_TABLE = {
    "CP0": (0.70, 0.70, False, False, "fresh_exploration"),
    "CP1": (0.25, 0.15, True, False, "reprompt_coordinator"),
    "CP2": (0.30, 0.20, True, False, "critic_reject"),
    "CP3": (0.30, 0.20, False, False, "warn_study_agent"),
    "CP4": (0.35, 0.25, True, False, "study_agent_retry"),
    "CP5": (0.35, 0.25, True, False, "inspector_reject"),
    "CP6": (0.30, 0.20, False, False, "warn_advisor"),
    "CP7": (0.35, 0.25, False, True, "warn_strategist"),
}


@dataclass(frozen=True)
class CheckpointSpec:
    cp_id: str
    theta0: float
    theta_min: float
    blocking: bool
    inverted: bool
    action_on_fail: str

    @property
    def disabled(self) -> bool:
        return self.theta0 == DISABLED


@dataclass(frozen=True)
class CheckpointResult:
    cp_id: str
    similarity: float
    threshold: float
    verdict: str                 # pass | block | warn
    failure_action: str = ""     # "" on pass
    retry_count: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


@dataclass(frozen=True)
class CP0Result:
    similarity: float
    match: str                   # close | weak | none
    warm_start: object | None
    exploration_mode: str
    screening_first: bool


@dataclass
class AdaptiveThreshold:
    """EMA-tracked threshold for one checkpoint.

    Until ``warmup`` passing observations have accumulated the initial
    threshold is used verbatim.  After warmup the threshold is
    mean - k*std, clamped to [floor, theta0 + cap_bonus] where the floor is
    the larger of theta_min and the null-distribution's upper quantile.
    """

    spec: CheckpointSpec
    floor: float
    settings: Settings = field(default=DEFAULTS, repr=False)
    mean: float = 0.0
    var: float = 0.0
    count: int = 0

    def current(self) -> float:
        th = self.settings.threshold
        if self.count < th.warmup:
            return self.spec.theta0
        value = self.mean - th.std_multiplier * math.sqrt(max(self.var, 0.0))
        ceiling = self.spec.theta0 + th.cap_bonus
        # The floor is a safety invariant and dominates the cap: a gate may
        # never relax below the null distribution's upper quantile.
        return max(min(value, ceiling), self.floor)

    def observe(self, similarity: float) -> None:
        th = self.settings.threshold
        if self.count == 0:
            self.mean = similarity
            self.var = 0.0
        else:
            lam = th.ema_decay
            delta = similarity - self.mean
            self.mean = lam * self.mean + (1.0 - lam) * similarity
            self.var = lam * self.var + (1.0 - lam) * delta * delta
        self.count += 1


class CheckpointManager:
    """All eight gates plus their adaptive state and retry budgets."""

    def __init__(self, null_dist: NullDistribution,
                 overrides: dict[str, float] | None = None,
                 settings: Settings = DEFAULTS):
        self.settings = settings
        self.null_dist = null_dist
        self.specs: dict[str, CheckpointSpec] = {}
        self.state: dict[str, AdaptiveThreshold] = {}
        self.retries_left: dict[str, int] = {}
        null_floor = null_dist.quantile(settings.threshold.null_quantile)
        for cp_id, (t0, tmin, blocking, inverted, action) in CHECKPOINT_TABLE.items():
            theta0 = (overrides or {}).get(cp_id, t0)
            spec = CheckpointSpec(cp_id, theta0, tmin, blocking, inverted, action)
            self.specs[cp_id] = spec
            self.state[cp_id] = AdaptiveThreshold(
                spec=spec, floor=max(tmin, null_floor), settings=settings)
            self.retries_left[cp_id] = settings.retry_budget

    def threshold(self, cp_id: str) -> float:
        return self.state[cp_id].current()

    def evaluate(self, cp_id: str, similarity: float,
                 retry_count: int = 0) -> CheckpointResult:
        """Gate one similarity value; adapts the threshold on passes."""
        spec = self.specs[cp_id]
        if spec.disabled:
            return CheckpointResult(cp_id, similarity, DISABLED, "pass",
                                    retry_count=retry_count)
        threshold = self.state[cp_id].current()
        if spec.inverted:
            passed = similarity < threshold
        else:
            passed = similarity >= threshold
        if passed and not spec.inverted:
            self.state[cp_id].observe(similarity)
        if passed:
            verdict, action = "pass", ""
        else:
            verdict = "block" if spec.blocking else "warn"
            action = spec.action_on_fail
        return CheckpointResult(cp_id, similarity, threshold, verdict,
                                action, retry_count)

    def evaluate_texts(self, cp_id: str, upstream: str, downstream: str,
                       retry_count: int = 0) -> CheckpointResult:
        """Embed both boundary texts and gate their cosine similarity."""
        from .embedding import similarity as _sim
        return self.evaluate(cp_id, _sim(upstream, downstream), retry_count)

    def evaluate_cp0(self, ps, archive) -> CP0Result:
        """Match the new problem against the archive and pick an
        exploration mode (close -> exploit, weak -> neutral, else
        explore_max plus screening-first for high-dimensional inputs)."""
        spec = self.specs["CP0"]
        cp0 = self.settings.cp0
        best_sim, best_entry = 0.0, None
        if not spec.disabled and archive is not None:
            best_sim, best_entry = archive.best_match(ps)
        if best_sim >= cp0.close_cutoff:
            match, mode = "close", "exploit"
        elif best_sim >= cp0.weak_cutoff:
            match, mode = "weak", "neutral"
        else:
            match, mode, best_entry = "none", "explore_max", None
        screening_first = (match == "none"
                           and ps.context.d_in
                           >= self.settings.screening_dim_threshold)
        return CP0Result(best_sim, match, best_entry, mode, screening_first)

    def consume_retry(self, cp_id: str) -> bool:
        """Spend one retry for a blocking gate; False when exhausted."""
        if self.retries_left[cp_id] <= 0:
            return False
        self.retries_left[cp_id] -= 1
        return True

    def reset_retries(self) -> None:
        for cp_id in self.retries_left:
            self.retries_left[cp_id] = self.settings.retry_budget
