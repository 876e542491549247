"""Cancellable-put game solver: regimes, boundaries x*/delta_0/y*, the
piecewise value function, and quadrature oracles for every closed form.

Everything below strike level log K the value solves the same equation as the
plain put but anchored at a higher boundary x*; above log K the canceller's
behaviour splits into two regimes separated by a penalty threshold delta_0:
stopping only at log K (POINT_CANCEL) or on a full interval [log K, y*]
(INTERVAL_CANCEL).  All boundary equations are monotone, so every scalar root
is found by bracketed bisection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.integrate import quad
from scipy.optimize import bisect

from .errors import (
    AssumptionError,
    DegenerateJumpsError,
    InconsistencyError,
    QuadratureError,
    RegimeError,
)
from .model import ModelParams, TiltIndex, check_assumption, laplace_exponent, solve_roots
from .put import FAST_PATH_RTOL, PutSolution, rho_factors, solve_put
from .scale import W, Z, Z_tilted_1, expsum

BISECT_XTOL = 1e-12
QUAD_TAIL = 1e-14  # truncate integrals over (-inf, 0) where exp(theta t) * K drops below this


class Regime(enum.Enum):
    NO_CANCEL = "NO_CANCEL"          # delta >= delta_bar: cancelling never pays
    POINT_CANCEL = "POINT_CANCEL"    # delta_0 <= delta < delta_bar: cancel only at log K
    INTERVAL_CANCEL = "INTERVAL_CANCEL"  # delta < delta_0: cancel on [log K, y*]


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    kind: str                      # "intrinsic" | "expsum" | "const"
    rates: tuple = ()
    coeffs: tuple = ()
    const: float = 0.0


@dataclass(frozen=True)
class PiecewiseValue:
    """Value function as ordered segments over (-inf, inf)."""

    segments: tuple
    strike: float

    def __call__(self, x: float) -> float:
        for seg in self.segments:
            if x <= seg.hi or seg is self.segments[-1]:
                if seg.kind == "intrinsic":
                    return self.strike - math.exp(x)
                if seg.kind == "const":
                    return seg.const
                return expsum(x, seg.rates, seg.coeffs)
        raise AssertionError("unreachable")

    def breakpoints(self) -> tuple:
        return tuple(seg.hi for seg in self.segments[:-1])

    def derivative(self, x: float) -> float:
        """Right derivative, analytic on each segment."""
        for seg in self.segments:
            if x < seg.hi or seg is self.segments[-1]:
                if seg.kind == "intrinsic":
                    return -math.exp(x)
                if seg.kind == "const":
                    return 0.0
                return expsum(x, seg.rates, tuple(r * c for r, c in zip(seg.rates, seg.coeffs)))
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class GameSolution:
    regime: Regime
    put: PutSolution
    x_star: float | None
    delta_0: float
    y_star: float | None
    alpha: float | None
    value: PiecewiseValue
    params: ModelParams
    q: float
    strike: float
    penalty: float


def _is_martingale_q(p: ModelParams, q: float) -> bool:
    return abs(q - laplace_exponent(p, 1.0)) < FAST_PATH_RTOL * max(1.0, q)


def _resolve_method(p: ModelParams, q: float, method: str) -> str:
    if method == "auto":
        return "closed" if _is_martingale_q(p, q) else "general"
    if method == "closed" and not _is_martingale_q(p, q):
        raise ValueError("closed forms require q = psi(1)")
    if method not in ("closed", "general"):
        raise ValueError(f"unknown method {method!r}")
    return method


def solve_x_star(p: ModelParams, q: float, strike: float, delta: float,
                 method: str = "auto") -> float:
    """Boundary x* of the maximiser: unique root in (k*, log K).

    Solves Z^{(q)}(log K - x) - Z_1^{(q-psi(1))}(log K - x) = delta/strike,
    whose left side decreases strictly from delta_bar/strike to 0.
    """
    check_assumption(p, q)
    method = _resolve_method(p, q, method)
    ps = solve_put(p, q, strike, method=method)
    if delta >= ps.delta_bar:
        raise AssumptionError(
            f"delta={delta} >= delta_bar={ps.delta_bar}: the put boundary k* applies"
        )
    if not delta > 0:
        raise ValueError(f"penalty delta must be positive, got {delta}")
    lk = math.log(strike)
    target = delta / strike

    if method == "closed":
        basis = ps.basis

        def f(x):
            acc = -1.0 - target
            for b, c in zip(basis.beta, basis.coeff):
                acc += q * c / b * math.exp(b * (lk - x))
            return acc
    else:
        def f(x):
            return Z(p, TiltIndex(), q, lk - x) - Z_tilted_1(p, q, lk - x) - target

    return bisect(f, ps.k_star, lk, xtol=BISECT_XTOL)


def _mid_coeffs(p: ModelParams, q: float, strike: float, x_star: float):
    """Exponential-sum coefficients of V on (x*, log K]: V = sum A_i e^{beta_i x}.

    The e^x part of -e^x Z_1^{(q-psi(1))}(x - x*) cancels exactly because
    sum_i C_i/(beta_i - 1) = 1/(q - psi(1)).
    """
    basis = solve_roots(p, TiltIndex(), q)
    rho = rho_factors(p, q, basis)
    A = []
    for b, c, r in zip(basis.beta, basis.coeff, rho):
        A.append(c * (strike * q / b * math.exp(-b * x_star)
                      - r * math.exp(-(b - 1.0) * x_star)))
    return basis, rho, tuple(A)


def _w_integral(p: ModelParams, q: float, strike: float, delta: float,
                x_star: float) -> float:
    """int_{t<0} (w_delta(t + log K) - delta) e^{theta t} dt in closed form."""
    basis, _, A = _mid_coeffs(p, q, strike, x_star)
    th = p.theta
    a = x_star - math.log(strike)
    out = (strike * math.exp(th * a) / th
           - strike * math.exp((th + 1.0) * a) / (th + 1.0)
           - delta / th)
    for b, ai in zip(basis.beta, A):
        out += ai * strike**b * -math.expm1((b + th) * a) / (b + th)
    return out


def f_prime_at_K(p: ModelParams, q: float, strike: float, delta: float) -> float:
    """Right derivative at log K of the maximiser's value against a strike-hitter.

    Positive iff delta < delta_0, zero at delta_0, negative above; equals the
    reduced jump integral minus q delta / Phi(q), times W^{(q)}'(0+) = 2/sigma^2.
    """
    check_assumption(p, q)
    ps = solve_put(p, q, strike)
    if not 0 < delta <= ps.delta_bar:
        raise ValueError(f"need 0 < delta <= delta_bar={ps.delta_bar}, got {delta}")
    big_phi = solve_roots(p, TiltIndex(), q).beta[2]
    if delta == ps.delta_bar:
        xs = ps.k_star
    else:
        xs = solve_x_star(p, q, strike, delta)
    integral = _w_integral(p, q, strike, delta, xs)
    gap = p.lam * p.theta / (p.theta + big_phi) * integral - q * delta / big_phi
    return gap * 2.0 / p.sigma**2


def solve_delta_0(p: ModelParams, q: float, strike: float,
                  method: str = "auto") -> float:
    """Penalty threshold delta_0 in (0, delta_bar); 0 by convention when lam = 0."""
    check_assumption(p, q)
    if p.lam == 0.0:
        return 0.0
    method = _resolve_method(p, q, method)
    ps = solve_put(p, q, strike, method=method)
    lo = 1e-12 * ps.delta_bar
    hi = ps.delta_bar * (1.0 - 1e-12)

    if method == "closed":
        basis = ps.basis
        th = p.theta
        slope = (p.lam + (th + 1.0) * q) / (p.lam * th * strike)

        def g(z):
            xs = solve_x_star(p, q, strike, z, method="closed")
            acc = -slope * z - 1.0 / (th + 1.0)
            for b, c in zip(basis.beta, basis.coeff):
                acc += q * c * strike**b / (b * (th + b)) * math.exp(-b * xs)
            return acc
    else:
        big_phi = ps.basis.beta[2]

        def g(z):
            xs = solve_x_star(p, q, strike, z, method="general")
            integral = _w_integral(p, q, strike, z, xs)
            return p.lam * p.theta / (p.theta + big_phi) * integral - z * q / big_phi

    return bisect(g, lo, hi, xtol=BISECT_XTOL)


def solve_y_star(p: ModelParams, q: float, strike: float, delta: float,
                 method: str = "auto", delta_0: float | None = None) -> float:
    """Upper cancellation boundary y* > log K, defined for 0 < delta < delta_0."""
    check_assumption(p, q)
    if p.lam == 0.0:
        raise DegenerateJumpsError("y* > log K requires negative jumps (lam > 0)")
    method = _resolve_method(p, q, method)
    if delta_0 is None:
        delta_0 = solve_delta_0(p, q, strike, method=method)
    if not 0 < delta < delta_0:
        raise RegimeError(f"need 0 < delta < delta_0={delta_0}, got {delta}")
    lk = math.log(strike)
    th = p.theta

    if method == "closed":
        basis = solve_roots(p, TiltIndex(), q)
        xs = solve_x_star(p, q, strike, delta, method="closed")
        acc = -1.0 / (th + 1.0) - delta / (th * strike)
        for b, c in zip(basis.beta, basis.coeff):
            acc += q * c * strike**b / (b * (th + b)) * math.exp(-b * xs)
        exp_theta_y = p.lam * th * strike ** (th + 1.0) / ((th + 1.0) * q * delta) * acc
        if exp_theta_y <= strike**th:
            raise InconsistencyError("closed form placed y* at or below log K")
        return math.log(exp_theta_y) / th

    big_phi = solve_roots(p, TiltIndex(), q).beta[2]
    xs = solve_x_star(p, q, strike, delta, method="general")
    integral = _w_integral(p, q, strike, delta, xs)
    arg = p.lam * th * big_phi * integral / ((th + big_phi) * delta * q)
    if arg <= 1.0:
        raise InconsistencyError("reduced integral placed y* at or below log K")
    return lk + math.log(arg) / th


def classify(p: ModelParams, q: float, strike: float, delta: float) -> Regime:
    """Regime of the penalty: never cancel, cancel at log K only, or on an interval."""
    check_assumption(p, q)
    ps = solve_put(p, q, strike)
    if delta >= ps.delta_bar:
        return Regime.NO_CANCEL
    if not delta > 0:
        raise ValueError(f"penalty delta must be positive, got {delta}")
    if p.lam == 0.0:
        return Regime.POINT_CANCEL
    if delta >= solve_delta_0(p, q, strike):
        return Regime.POINT_CANCEL
    return Regime.INTERVAL_CANCEL


def solve_game(p: ModelParams, q: float, strike: float, delta: float,
               method: str = "auto") -> GameSolution:
    """Full game solution: regime, boundaries, alpha and the piecewise value."""
    check_assumption(p, q)
    method_r = _resolve_method(p, q, method)
    ps = solve_put(p, q, strike, method=method_r)
    delta_0 = solve_delta_0(p, q, strike, method=method_r)
    lk = math.log(strike)
    basis = solve_roots(p, TiltIndex(), q)
    b1, b2, b3 = basis.beta

    if delta >= ps.delta_bar:
        segs = (
            Segment(-math.inf, ps.k_star, "intrinsic"),
            Segment(ps.k_star, math.inf, "expsum",
                    rates=(b1, b2),
                    coeffs=(ps.c1 * math.exp(-b1 * ps.k_star),
                            ps.c2 * math.exp(-b2 * ps.k_star))),
        )
        return GameSolution(Regime.NO_CANCEL, ps, None, delta_0, None, None,
                            PiecewiseValue(segs, strike), p, q, strike, delta)

    xs = solve_x_star(p, q, strike, delta, method=method_r)
    _, rho, A = _mid_coeffs(p, q, strike, xs)

    if p.lam == 0.0 or delta >= delta_0:
        # single-point cancellation at log K; the beta_3 coefficient of the
        # continuation vanishes identically by the choice of alpha, so it is
        # dropped rather than formed and cancelled in floating point
        alpha = rho[2] * math.exp(xs) - q * strike / b3
        shift = alpha * math.exp(b3 * (lk - xs))
        tail = tuple(A[i] + shift * basis.coeff[i] * strike ** (-basis.beta[i])
                     for i in range(2))
        segs = (
            Segment(-math.inf, xs, "intrinsic"),
            Segment(xs, lk, "expsum", rates=basis.beta, coeffs=A),
            Segment(lk, math.inf, "expsum", rates=(b1, b2), coeffs=tail),
        )
        return GameSolution(Regime.POINT_CANCEL, ps, xs, delta_0, None, alpha,
                            PiecewiseValue(segs, strike), p, q, strike, delta)

    ys = solve_y_star(p, q, strike, delta, method=method_r, delta_0=delta_0)
    # tail above y*: delta Z^{(q)}(x - y*) minus the jump-compensation term;
    # the beta_3 and e^{-theta x} parts cancel via sum C_i/(theta + beta_i) = 0
    th = p.theta
    tail = tuple(
        delta * q * basis.coeff[i]
        * (1.0 / basis.beta[i] - (th + b3) / (b3 * (th + basis.beta[i])))
        * math.exp(-basis.beta[i] * ys)
        for i in range(2)
    )
    segs = (
        Segment(-math.inf, xs, "intrinsic"),
        Segment(xs, lk, "expsum", rates=basis.beta, coeffs=A),
        Segment(lk, ys, "const", const=delta),
        Segment(ys, math.inf, "expsum", rates=(b1, b2), coeffs=tail),
    )
    return GameSolution(Regime.INTERVAL_CANCEL, ps, xs, delta_0, ys, None,
                        PiecewiseValue(segs, strike), p, q, strike, delta)


def value_at(sol: GameSolution, x: float) -> float:
    """V(x) from the solved piecewise representation."""
    return sol.value(x)


# ---------------------------------------------------------------------------
# quadrature oracles: same boundary equations, integrals done numerically


def _w_delta_eval(sol_below, strike, delta):
    """Pointwise w_delta: V below log K, the constant delta above."""
    lk = math.log(strike)
    xs, basis, A = sol_below

    def w(v):
        if v >= lk:
            return delta
        if v <= xs:
            return strike - math.exp(v)
        return expsum(v, basis.beta, A)

    return w


def _below_repr(p, q, strike, delta, method="general"):
    xs = solve_x_star(p, q, strike, delta, method=method)
    basis, _, A = _mid_coeffs(p, q, strike, xs)
    return xs, basis, A


def _quad_w_integral(p, q, strike, delta, y, below) -> float:
    """Numerical version of int_{t<0} (w_delta(t+y) - delta) e^{theta t} dt."""
    w = _w_delta_eval(below, strike, delta)
    lk = math.log(strike)
    xs = below[0]
    lower = -(math.log(strike / QUAD_TAIL)) / p.theta

    def f(t):
        return (w(t + y) - delta) * math.exp(p.theta * t)

    pts = sorted(v for v in (xs - y, lk - y) if lower < v < 0.0)
    val, err = quad(f, lower, 0.0, points=pts or None, limit=500,
                    epsabs=1e-12, epsrel=1e-12)
    if err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureError(f"jump integral error estimate {err:.2e} too large")
    return val


def f_prime_at_K_by_quadrature(p: ModelParams, q: float, strike: float,
                               delta: float) -> float:
    """f_prime_at_K with the jump integral done numerically instead of in closed form."""
    big_phi = solve_roots(p, TiltIndex(), q).beta[2]
    below = _below_repr(p, q, strike, delta)
    integral = _quad_w_integral(p, q, strike, delta, math.log(strike), below)
    gap = p.lam * p.theta / (p.theta + big_phi) * integral - q * delta / big_phi
    return gap * 2.0 / p.sigma**2


def solve_delta_0_by_quadrature(p: ModelParams, q: float, strike: float) -> float:
    """delta_0 by bisection on the integral equation, integrals by quadrature."""
    if p.lam == 0.0:
        return 0.0
    ps = solve_put(p, q, strike)
    big_phi = solve_roots(p, TiltIndex(), q).beta[2]
    lk = math.log(strike)

    def g(z):
        below = _below_repr(p, q, strike, z)
        integral = _quad_w_integral(p, q, strike, z, lk, below)
        return p.lam * p.theta / (p.theta + big_phi) * integral - z * q / big_phi

    return bisect(g, 1e-12 * ps.delta_bar, ps.delta_bar * (1.0 - 1e-12), xtol=1e-10)


def solve_y_star_by_quadrature(p: ModelParams, q: float, strike: float,
                               delta: float) -> float:
    """y* by bisection on the integral equation in y, integrals by quadrature."""
    if p.lam == 0.0:
        raise DegenerateJumpsError("y* > log K requires negative jumps (lam > 0)")
    big_phi = solve_roots(p, TiltIndex(), q).beta[2]
    lk = math.log(strike)
    below = _below_repr(p, q, strike, delta)

    def g(y):
        integral = _quad_w_integral(p, q, strike, delta, y, below)
        return p.lam * p.theta / (p.theta + big_phi) * integral - delta * q / big_phi

    lo = lk + 1e-9
    if g(lo) <= 0:
        raise RegimeError(f"delta={delta} is not below delta_0: no y* above log K")
    width = 1.0
    while g(lk + width) > 0:
        width *= 2.0
        if width > 1e6:
            raise RegimeError("no sign change found for y*")
    return bisect(g, lo, lk + width, xtol=1e-10)


def h_oracle(p: ModelParams, q: float, strike: float, delta: float,
             x: float, y: float) -> float:
    """Maximiser's value h(x, y) when the canceller stops on [log K, y].

    Compensation-formula route: the inner jump-size integral is reduced
    analytically (exponential jump law), the remaining one-dimensional
    integral is done by adaptive quadrature.  Used as an oracle for
    value_at: h(x, y*) must reproduce V(x).
    """
    check_assumption(p, q)
    lk = math.log(strike)
    if not (x > y >= lk - 1e-12):
        raise ValueError(f"need x > y >= log K, got x={x}, y={y}")
    ps = solve_put(p, q, strike)
    if delta >= ps.delta_bar:
        raise AssumptionError("h(x, y) is defined for delta < delta_bar")

    basis = solve_roots(p, TiltIndex(), q)
    big_phi = basis.beta[2]
    below = _below_repr(p, q, strike, delta)
    integral = _quad_w_integral(p, q, strike, delta, y, below)

    s = x - y
    t0 = TiltIndex()
    w_here = W(p, t0, q, s)
    ruin = Z(p, t0, q, s) - q / big_phi * w_here
    w_exp_int = sum(
        c * math.expm1((b + p.theta) * s) / (b + p.theta)
        for b, c in zip(basis.beta, basis.coeff)
    )
    jump_part = p.lam * p.theta * integral * (
        w_here / (p.theta + big_phi) - math.exp(-p.theta * s) * w_exp_int
    )
    return delta * ruin + jump_part
