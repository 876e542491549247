"""Exception types raised by the solver stack."""


class PutGameError(Exception):
    """Base class for all solver errors."""


class PoleError(PutGameError):
    """Laplace exponent evaluated at or beyond the pole of the jump term."""


class AssumptionError(PutGameError):
    """Discount/martingale bound 0 <= psi(1) <= q (with q > 0) violated."""


class DegenerateRootsError(PutGameError):
    """The middle and upper characteristic roots coincide (r = 0 branch)."""


class NonconvergenceError(PutGameError):
    """Root polishing failed to reach the required residual."""


class DegenerateJumpsError(PutGameError):
    """Operation requires a nonzero jump intensity."""


class RegimeError(PutGameError):
    """Quantity requested outside the penalty regime where it is defined."""


class InconsistencyError(PutGameError):
    """Closed-form boundary came out on the wrong side of the strike."""


class QuadratureError(PutGameError):
    """Adaptive quadrature did not converge to the requested accuracy."""
