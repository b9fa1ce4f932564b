"""Exception hierarchy shared across the package."""


class FiberDistError(Exception):
    """Base class for all errors raised by fiberdist."""


class StepFailure(FiberDistError):
    """Adaptive integration could not proceed (step size collapsed)."""


class NoConvergence(FiberDistError):
    """A shooting or outer minimization did not converge from any seed."""


class DegenerateMultiplier(NoConvergence):
    """The joint solver only found solutions with the multiplier outside (0, 1)."""


class SandwichViolation(FiberDistError):
    """A computed distance fell outside its analytic lower/upper bounds."""


class ZeroGamma(FiberDistError):
    """Normalized units are undefined for a linear (gamma = 0) fiber."""


class BothZero(FiberDistError):
    """The upper bound is undefined when both points are the origin."""


class OutOfRange(FiberDistError):
    """A query radius lies outside an approximation table."""


class Infeasible(FiberDistError):
    """No constellation of the requested size exists on the candidate set."""


class UntrainedDecoder(FiberDistError):
    """A decoder was used before its histogram or label table was built."""


class SingularSystem(FiberDistError):
    """A per-mode linear system is singular outside the handled limit branch."""


class NoRoot(FiberDistError):
    """The scalar multiplier condition has no sign change on (0, 1)."""
