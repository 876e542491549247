"""Closed-form scale functions and the fluctuation identities built on them."""

from __future__ import annotations

import math

import numpy as np

from .errors import AssumptionError, DegenerateRootsError
from .model import (
    ModelParams,
    TiltIndex,
    laplace_exponent,
    laplace_exponent_prime,
    phi,
    solve_roots,
)

RATE_ONE_GAP = 1e-9  # |beta_i - 1| below this switches to the linear limit term


def expsum(x: float, rates, coeffs) -> float:
    """Evaluate sum_i coeffs[i] * exp(rates[i] * x) with the top exponent factored out."""
    top = max(r * x for r in rates)
    acc = 0.0
    for r, c in zip(rates, coeffs):
        acc += c * math.exp(r * x - top)
    return math.exp(top) * acc if acc != 0.0 else 0.0


def W(p: ModelParams, t: TiltIndex, r: float, x: float) -> float:
    """Scale function W_c^{(r)}(x): zero on x < 0, exponential sum on x >= 0."""
    if x < 0:
        return 0.0
    try:
        basis = solve_roots(p, t, r)
    except DegenerateRootsError:
        return _w_degenerate(p, t.c, x)
    return expsum(x, basis.beta, basis.coeff)


def _w_degenerate(p: ModelParams, c: float, x: float) -> float:
    # r = 0 with psi_c'(0) = 0: double root at the origin.  Partial fractions of
    # 1/psi_c give an exponential, a constant and a linear term.
    sig2 = p.sigma * p.sigma
    if p.lam == 0.0:
        return 2.0 * x / sig2
    b1 = -((p.theta + c) + 2.0 * (sig2 * c + p.mu) / sig2)  # Vieta: root sum, double 0
    tc = p.theta + c
    return 2.0 / sig2 * ((tc + b1) / b1**2 * math.expm1(b1 * x) - tc * x / b1)


def Z(p: ModelParams, t: TiltIndex, r: float, x: float) -> float:
    """Scale function Z_c^{(r)}(x): one on x <= 0 and for r = 0 everywhere."""
    if x <= 0 or r == 0.0:
        return 1.0
    basis = solve_roots(p, t, r)
    coeffs = [r * c / b for c, b in zip(basis.coeff, basis.beta)]
    return expsum(x, basis.beta, coeffs)


def Z_tilted_1(p: ModelParams, q: float, x: float) -> float:
    """Unit-tilted scale function Z_1^{(q - psi(1))}(x), via the tilting relation.

    Equals 1 + (q - psi(1)) * int_0^x e^{-y} W^{(q)}(y) dy, with the integral
    done per basis term; a term with rate within RATE_ONE_GAP of 1 (always the
    case at q = psi(1)) uses its linear-in-x limit.
    """
    psi1 = laplace_exponent(p, 1.0)
    if q < psi1 - 1e-12 * max(1.0, abs(q)):
        raise AssumptionError(f"need q >= psi(1); got q={q}, psi(1)={psi1}")
    if x <= 0:
        return 1.0
    rp = q - psi1
    if rp == 0.0:
        return 1.0
    basis = solve_roots(p, TiltIndex(), q)
    acc = 1.0
    for b, c in zip(basis.beta, basis.coeff):
        g = b - 1.0
        if abs(g) < RATE_ONE_GAP:
            acc += rp * c * x
        else:
            acc += rp * c * math.expm1(g * x) / g
    return acc


def exit_up_probability(p: ModelParams, q: float, x: float, a: float) -> float:
    """E_x[e^{-q tau_a^+}; up-passage of a before down-passage of 0] = W(x^a)/W(a)."""
    if not a > 0:
        raise ValueError(f"upper barrier a must be positive, got {a}")
    t = TiltIndex()
    return W(p, t, q, min(x, a)) / W(p, t, q, a)


def ruin_transform(p: ModelParams, q: float, x: float) -> float:
    """E_x[e^{-q tau_0^-}; tau_0^- < infinity] = Z^{(q)}(x) - q/Phi(q) W^{(q)}(x)."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    t = TiltIndex()
    return Z(p, t, q, x) - q / phi(p, q) * W(p, t, q, x)


def resolvent_density(p: ModelParams, q: float, s: float, tval: float) -> float:
    """Resolvent density at level tval of the process started at s > 0, killed below 0."""
    if not s > 0:
        raise ValueError(f"start s must be positive, got {s}")
    t = TiltIndex()
    return math.exp(-phi(p, q) * tval) * W(p, t, q, s) - W(p, t, q, s - tval)


def w_transform_numeric(p: ModelParams, q: float, beta: float, horizon: float | None = None) -> float:
    """Truncated Laplace transform int_0^T e^{-beta x} W^{(q)}(x) dx by quadrature.

    Independent check of the defining identity against 1/(psi(beta) - q) for
    beta > Phi(q); the horizon defaults to where the integrand tail is below
    1e-12 of the transform value.
    """
    from scipy.integrate import quad

    basis = solve_roots(p, TiltIndex(), q)
    gap = beta - basis.beta[2]
    if gap <= 0:
        raise ValueError(f"need beta > Phi(q) = {basis.beta[2]}, got {beta}")
    T = horizon if horizon is not None else 40.0 / min(gap, 2.0)
    # integrate the combined exponent so huge x never overflows
    rates = [b - beta for b in basis.beta]

    def f(x):
        return sum(c * math.exp(r * x) for r, c in zip(rates, basis.coeff))

    val, err = quad(f, 0.0, T, limit=200)
    return val


def psi_second(p: ModelParams, z: float) -> float:
    """psi''(z), used by convexity checks."""
    return p.sigma**2 + 2.0 * p.lam * p.theta / (p.theta + z) ** 3


__all__ = [
    "W",
    "Z",
    "Z_tilted_1",
    "exit_up_probability",
    "ruin_transform",
    "resolvent_density",
    "expsum",
    "w_transform_numeric",
    "psi_second",
    "laplace_exponent",
    "laplace_exponent_prime",
]
