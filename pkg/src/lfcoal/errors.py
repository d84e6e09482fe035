"""Exception hierarchy shared across the package."""


class LfcoalError(Exception):
    """Base class for all package-specific errors."""


class OutOfRangeError(LfcoalError, ValueError):
    """A parameter lies outside its admissible interval."""


class DegenerateEqualError(LfcoalError, ValueError):
    """p == r: the coalescent tail formula divides by r - p."""


class NotSupercriticalError(LfcoalError, ValueError):
    """Operation requires mean offspring m = r/p > 1."""


class InvalidDepthError(LfcoalError, ValueError):
    """A node depth falls outside {1, ..., T}."""


class NotUltrametricError(LfcoalError, ValueError):
    """Tree tips are not coplanar, or node depths do not decrease."""


class NonIntegerDepthError(LfcoalError, ValueError):
    """A node depth is not an integer number of generations."""


class NewickSyntaxError(LfcoalError, ValueError):
    """Malformed Newick input; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EmptyMaskError(LfcoalError, ValueError):
    """Subsampling needs at least one selected tip."""


class KTooLargeError(LfcoalError, ValueError):
    """Requested sample size exceeds the number of tips."""


class PopulationOverflowError(LfcoalError, RuntimeError):
    """Forward simulation exceeded the population cap."""


class MTooLargeError(LfcoalError, ValueError):
    """Composition enumeration would exceed the term cap."""


class StateSpaceTooLargeError(LfcoalError, ValueError):
    """Exhaustive enumeration would exceed the state cap."""


class DegenerateBinsError(LfcoalError, ValueError):
    """Too few usable bins for a goodness-of-fit statistic."""


class NonConvergenceError(LfcoalError, RuntimeError):
    """An iterative numerical routine failed to reach its tolerance."""


class NoFeasiblePointError(LfcoalError, ValueError):
    """Optimization has no feasible starting point (e.g. empty data)."""
