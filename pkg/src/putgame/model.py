"""Process parameters, Laplace exponent and the cubic characteristic-root system.

The driving process is a jump-diffusion in log-price: a Brownian motion with
volatility ``sigma`` and drift ``mu``, minus a compound Poisson sum of
exponentially distributed downward jumps (intensity ``lam``, jump-size rate
``theta``).  Its Laplace exponent is

    psi(z) = sigma^2/2 z^2 + mu z + lam (theta/(theta+z) - 1),

a rational function whose level sets ``psi_c(z) = r`` (after an exponential
tilt by ``c``) reduce to a real cubic.  Everything downstream -- scale
functions, exercise boundaries, value functions -- is built from the three
roots of that cubic and the associated partial-fraction coefficients.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionError,
    DegenerateRootsError,
    NonconvergenceError,
    PoleError,
)

ROOT_RTOL = 1e-10          # residual gate |psi_c(beta_i) - r| <= ROOT_RTOL * max(1, r)
DEGENERATE_GAP = 1e-8      # beta_3 - beta_2 below this means the r=0 double root


@dataclass(frozen=True)
class ModelParams:
    """Jump-diffusion coefficients of the driving log-price process.

    sigma : Gaussian coefficient, per unit sqrt(time); must be positive
        (only the unbounded-variation case is handled).
    mu    : linear drift, per unit time.
    lam   : jump intensity, per unit time; zero gives a pure diffusion.
    theta : rate of the exponential downward jump sizes, per unit log-price.
    """

    sigma: float
    mu: float
    lam: float
    theta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class Contract:
    """Game economics: strike, cancellation penalty and discount rate."""

    strike: float
    penalty: float
    discount: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.penalty > 0:
            raise ValueError(f"penalty must be positive, got {self.penalty}")
        if not self.discount > 0:
            raise ValueError(f"discount must be positive, got {self.discount}")


@dataclass(frozen=True)
class TiltIndex:
    """Index (c, r) of a tilted, killed scale function: tilt c, killing rate r."""

    c: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"tilt c must be nonnegative, got {self.c}")
        if self.r < 0:
            raise ValueError(f"killing rate r must be nonnegative, got {self.r}")


@dataclass(frozen=True)
class CubicBasis:
    """Roots and partial-fraction coefficients of a (c, r) scale representation.

    ``beta`` holds the ordered roots beta_1 < -theta-c < beta_2 <= beta_3 of
    psi_c(z) = r; ``coeff`` the constants C_i with sum C_i = 0 and
    sum C_i beta_i = 2/sigma^2.
    """

    tilt: TiltIndex
    beta: tuple[float, float, float]
    coeff: tuple[float, float, float]


def laplace_exponent(p: ModelParams, z: float) -> float:
    """psi(z); defined for z > -theta, with psi(0) = 0 exactly."""
    if z <= -p.theta:
        raise PoleError(f"z={z} is at or beyond the pole -theta={-p.theta}")
    return 0.5 * p.sigma**2 * z * z + p.mu * z + p.lam * (p.theta / (p.theta + z) - 1.0)


def laplace_exponent_prime(p: ModelParams, z: float) -> float:
    """psi'(z) = sigma^2 z + mu - lam theta/(theta+z)^2 for z > -theta."""
    if z <= -p.theta:
        raise PoleError(f"z={z} is at or beyond the pole -theta={-p.theta}")
    return p.sigma**2 * z + p.mu - p.lam * p.theta / (p.theta + z) ** 2


def tilted_laplace_exponent(p: ModelParams, t: TiltIndex, z: float) -> float:
    """psi_c(z) = psi(z + c) - psi(c), with psi_c(0) = 0 exactly."""
    if t.c == 0.0:
        return laplace_exponent(p, z)
    if z + t.c <= -p.theta:
        raise PoleError(f"z+c={z + t.c} is at or beyond the pole -theta={-p.theta}")
    return _psi_c_raw(p, t.c, z)


def _psi_c_raw(p: ModelParams, c: float, z: float) -> float:
    # Rational form valid on both sides of the pole (analytic continuation);
    # used internally so roots left of -theta-c can be evaluated.
    return (
        0.5 * p.sigma**2 * z * z
        + (p.sigma**2 * c + p.mu) * z
        - p.lam * p.theta * z / ((p.theta + z + c) * (p.theta + c))
    )


def _psi_c_raw_prime(p: ModelParams, c: float, z: float) -> float:
    return p.sigma**2 * z + (p.sigma**2 * c + p.mu) - p.lam * p.theta / (p.theta + z + c) ** 2


def risk_neutral_drift(sigma: float, lam: float, theta: float, q: float) -> float:
    """Drift making psi(1) = q, i.e. the discounted price a martingale."""
    return q - 0.5 * sigma**2 + lam / (theta + 1.0)


def check_assumption(p: ModelParams, q: float) -> None:
    """Enforce q > 0 and 0 <= psi(1) <= q; raises AssumptionError otherwise."""
    if not q > 0:
        raise AssumptionError(f"discount q must be positive, got {q}")
    psi1 = laplace_exponent(p, 1.0)
    # exact-arithmetic equality psi(1) == q survives rounding only up to eps
    tol = 1e-12 * max(1.0, abs(q))
    if psi1 < -tol or psi1 > q + tol:
        raise AssumptionError(
            f"need 0 <= psi(1) <= q, got psi(1)={psi1} with q={q}"
        )


def solve_roots(p: ModelParams, t: TiltIndex, r: float) -> CubicBasis:
    """Roots beta_1 < -theta-c < beta_2 <= beta_3 of psi_c(z) = r plus the C_i.

    The roots come from the monic cubic obtained by multiplying psi_c(z) - r
    through by (theta + z + c); each is then polished with Newton steps on
    psi_c(z) - r itself.  Raises DegenerateRootsError when beta_2 and beta_3
    merge (possible only at r = 0 with psi_c'(0) = 0), NonconvergenceError if
    the polished residual stays above tolerance.
    """
    if r < 0:
        raise ValueError(f"killing rate r must be nonnegative, got {r}")
    return _solve_roots_cached(p.sigma, p.mu, p.lam, p.theta, t.c, r)


@functools.lru_cache(maxsize=512)
def _solve_roots_cached(sigma, mu, lam, theta, c, r) -> CubicBasis:
    p = ModelParams(sigma, mu, lam, theta)
    sig2 = sigma * sigma
    m = sig2 * c + mu
    pole = -(theta + c)

    if lam == 0.0:
        return _solve_roots_no_jumps(p, c, r, m, pole)

    # monic cubic: (theta+z+c)(psi_c(z)-r) * 2/sigma^2
    a2 = (theta + c) + 2.0 * m / sig2
    a1 = ((theta + c) * m - r - lam * theta / (theta + c)) * 2.0 / sig2
    a0 = -r * (theta + c) * 2.0 / sig2
    roots = np.roots([1.0, a2, a1, a0])
    if np.max(np.abs(roots.imag)) > 1e-6 * max(1.0, np.max(np.abs(roots.real))):
        raise NonconvergenceError(f"complex characteristic roots for {p}, c={c}, r={r}")
    beta = np.sort(roots.real)

    for _ in range(3):  # Newton polish on psi_c(z) - r
        f = np.array([_psi_c_raw(p, c, z) - r for z in beta])
        df = np.array([_psi_c_raw_prime(p, c, z) for z in beta])
        step = np.where(df != 0.0, f / np.where(df != 0.0, df, 1.0), 0.0)
        beta = beta - step

    beta = np.sort(beta)
    if beta[2] - beta[1] < DEGENERATE_GAP:
        raise DegenerateRootsError(
            f"beta_2 = beta_3 = {beta[1]:.3g}; use the r=0 degenerate scale form"
        )

    resid = max(abs(_psi_c_raw(p, c, z) - r) for z in beta)
    if resid > ROOT_RTOL * max(1.0, r):
        raise NonconvergenceError(
            f"root residual {resid:.3e} exceeds {ROOT_RTOL:.0e}*max(1,r)"
        )
    if not (beta[0] < pole < beta[1]):
        raise NonconvergenceError(
            f"root ordering beta_1 < -theta-c < beta_2 violated: {beta}, pole {pole}"
        )

    coeff = _partial_fraction_coeffs(sig2, theta, c, beta)
    return CubicBasis(tilt=TiltIndex(c, r), beta=tuple(beta), coeff=tuple(coeff))


def _solve_roots_no_jumps(p, c, r, m, pole) -> CubicBasis:
    # lam = 0: quadratic roots of psi_c(z) = r; the cubic factor at -theta-c
    # is spurious and gets coefficient 0.
    sig2 = p.sigma * p.sigma
    disc = m * m + 2.0 * sig2 * r
    zlo = (-m - np.sqrt(disc)) / sig2
    zhi = (-m + np.sqrt(disc)) / sig2
    if zhi - zlo < DEGENERATE_GAP:
        raise DegenerateRootsError("driftless diffusion at r=0: double root at 0")
    chi = 2.0 / (sig2 * (zhi - zlo))
    triples = sorted([(zlo, -chi), (zhi, chi), (pole, 0.0)])
    beta = tuple(b for b, _ in triples)
    coeff = tuple(cc for _, cc in triples)
    return CubicBasis(tilt=TiltIndex(c, r), beta=beta, coeff=coeff)


def _partial_fraction_coeffs(sig2, theta, c, beta):
    coeff = []
    for i in range(3):
        prod = 1.0
        for j in range(3):
            if j != i:
                prod *= beta[j] - beta[i]
        coeff.append(2.0 * (theta + c + beta[i]) / (sig2 * prod))
    return coeff


def phi(p: ModelParams, q: float) -> float:
    """Largest root of psi(z) = q; equals 1 when q = psi(1)."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    return solve_roots(p, TiltIndex(), q).beta[2]
