"""Exception hierarchy shared by all driftguard modules."""


class DriftguardError(Exception):
    """Base class for all package errors."""


class InvalidProblem(DriftguardError):
    """Problem description is missing or carries degenerate fields."""


class UnknownEstimator(DriftguardError):
    """Estimator id not present in the method catalog."""


class UnknownModel(DriftguardError):
    """Benchmark model id not present in the catalog."""


class ParseError(DriftguardError):
    """Malformed serialized scheme or config text."""


class TaskMismatch(DriftguardError):
    """Action task does not match the context task."""


class DimensionError(DriftguardError):
    """Vector dimensions do not agree."""


class InsufficientCorpus(DriftguardError):
    """Null-calibration corpus has fewer than two entries."""


class InsufficientSamples(DriftguardError):
    """Sample size below the estimator's hard minimum."""


class NoFeasibleAction(DriftguardError):
    """The feasible action set handed to the policy is empty."""


class InvalidReward(DriftguardError):
    """Reward is non-finite or outside the accepted range."""


class MalformedObservation(DriftguardError):
    """Observation lacks an execution status."""


class ScriptMiss(DriftguardError):
    """No script entry and no default rule for an agent invocation."""


class Unrecoverable(DriftguardError):
    """Debugger has no patch rule for this execution error class."""


class PersistError(DriftguardError):
    """Archive write failed; in-memory state rolled back."""


class LoadError(DriftguardError):
    """Archive file exists but cannot be parsed."""


class NoData(DriftguardError):
    """Analysis requested over an empty trace collection."""
