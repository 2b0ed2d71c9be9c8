"""Exception types shared across the solver stack."""


class ModescentError(Exception):
    """Base class for all solver errors."""


class EvaluationError(ModescentError):
    """A problem map returned a non-finite value.

    Carries the name of the offending component ("F", "DF", "H", ...).
    """

    def __init__(self, component, x, message=None):
        self.component = component
        self.x = x
        super().__init__(message or f"non-finite value in component {component!r} at x={x!r}")


class RankError(ModescentError):
    """Constraint Jacobian rows are rank deficient where full rank is required."""


class NoConvergence(ModescentError):
    """An iterative subsolver (projection, feasibility) stalled or hit its cap."""


class NoStep(ModescentError):
    """Backtracking exhausted the exponent budget without an acceptable step."""


class NoRoot(ModescentError):
    """Scalar root bracketing hit its growth limit without a sign change."""


class UnknownProblemError(ModescentError):
    """Requested problem name is not registered."""
