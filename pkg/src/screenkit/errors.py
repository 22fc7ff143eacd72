"""Exception types shared across the package."""


class ScreenkitError(Exception):
    """Base class for all package errors."""


class StructuralError(ScreenkitError):
    """Malformed instance data: shape mismatches, unsorted grids, bad probabilities."""


class SizeGuardExceeded(ScreenkitError):
    """An exact enumeration would exceed the configured size guard."""

    def __init__(self, message: str, required: int, guard: int):
        super().__init__(message)
        self.required = required
        self.guard = guard


class NotDominated(ScreenkitError):
    """Requested a monotone coupling between distributions that are not ordered."""


class NotMonotone(ScreenkitError):
    """Joint distribution is not stochastically monotone; no path decomposition exists."""


class NotImplementable(ScreenkitError):
    """Allocation admits no feasible transfers (negative cycle in the constraint graph)."""


class InputNotIC(ScreenkitError):
    """A shift operation received a mechanism that is not incentive compatible."""


class OutOfRange(ScreenkitError):
    """Multiplicative shift target fell outside the utility range."""


class PreconditionFailed(ScreenkitError):
    """Construction preconditions (medians, dominance direction, non-degeneracy) not met."""


class RatioMonotonicityFailed(PreconditionFailed):
    """Bundle value ratios are not stochastically nondecreasing in the grand-bundle value."""


class AssumptionFailed(ScreenkitError):
    """A named parameter restriction failed validation."""

    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name
