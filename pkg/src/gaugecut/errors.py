"""Exception hierarchy shared across the package."""


class GaugeCutError(Exception):
    """Base class for all gaugecut errors."""


class ParseError(GaugeCutError):
    """Syntax, unknown-identifier, or arity error while parsing an expression."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalDomainError(GaugeCutError):
    """Evaluation left the expression's domain (log of a non-positive value,
    sqrt of a negative value, division by zero, overflow)."""

    def __init__(self, message: str, subexpression: str | None = None):
        if subexpression is not None:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)
        self.subexpression = subexpression


class ProblemFormatError(GaugeCutError):
    """Invalid problem data: schema violation, bad bounds, undeclared variable."""


class PreconditionError(GaugeCutError):
    """An operation was called on inputs that violate its contract
    (e.g. separating a point that is already feasible)."""


class InteriorPointError(GaugeCutError):
    """No strictly interior (Slater) point could be found or validated."""


class SimplexNumericalError(GaugeCutError):
    """The LP solver failed numerically (pivot/cycling guard exceeded or an
    unbounded ray appeared on a bounded problem).  Distinct from infeasibility,
    which is an ordinary solution status."""


class SeparationError(GaugeCutError):
    """Cut generation failed: vanishing gradient at the point to be separated
    or at a boundary point with an active constraint."""


class SolveStallError(GaugeCutError):
    """A cutting-plane loop made no progress: the current iterate violates the
    constraints but every generated cut already sits in the pool.  This can
    only happen through accumulated floating-point error; the partial trace is
    attached as ``trace``."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
