"""Exception hierarchy. CLI maps KnockforgeError to exit code 2."""


class KnockforgeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(KnockforgeError):
    """Malformed input: non-finite entries, bad shapes, bad labels."""


class DimensionError(KnockforgeError):
    """A sample-size precondition such as n > 2p is violated."""


class DegenerateInputError(KnockforgeError):
    """Rank deficiency or near-singular conditioning detected."""


class NotPositiveDefiniteError(KnockforgeError):
    """A matrix required to be positive definite is not."""


class InfeasibleError(KnockforgeError):
    """An optimization problem has an empty feasible set."""


class PreconditionError(KnockforgeError):
    """A graph/blocking precondition fails (separation, cut set)."""


class CoverageError(PreconditionError):
    """Union of blocking-set complements does not cover all vertices."""


class FoldSizeError(PreconditionError):
    """Fold sizes do not partition the rows."""


class BudgetError(KnockforgeError):
    """An enumeration budget would be exceeded."""


class StrategyError(KnockforgeError):
    """A pluggable strategy produced an invalid result."""


class ParameterError(KnockforgeError):
    """A generator/config parameter is out of range."""


class ReplicateFailureError(KnockforgeError):
    """More than the tolerated fraction of replicates errored (exit 3)."""
