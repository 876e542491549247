"""Perpetual American put: boundary k*, value U, and the threshold where the
cancellation feature of the game becomes worthless (delta_bar = U(log K))."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AssumptionError
from .model import (
    CubicBasis,
    ModelParams,
    TiltIndex,
    check_assumption,
    laplace_exponent,
    laplace_exponent_prime,
    solve_roots,
)

FAST_PATH_RTOL = 1e-12  # |q - psi(1)| below this (relative) selects the closed forms


@dataclass(frozen=True)
class PutSolution:
    """Exercise boundary and two-exponential value expansion of the put.

    Above k* the value is c1 e^{beta_1 (x - k*)} + c2 e^{beta_2 (x - k*)};
    below it the intrinsic value K - e^x.  delta_bar = U(log K).
    """

    k_star: float
    delta_bar: float
    c1: float
    c2: float
    strike: float
    q: float
    basis: CubicBasis


def rho_factors(p: ModelParams, q: float, basis: CubicBasis) -> tuple[float, float, float]:
    """Stabilised ratios (q - psi(1)) / (beta_i - 1).

    Since psi(beta_i) = q, the ratio is a difference quotient of psi; when
    beta_i is within 1e-9 of 1 it is replaced by psi' at the midpoint, which
    removes the 0/0 at q = psi(1).
    """
    psi1 = laplace_exponent(p, 1.0)
    out = []
    for b in basis.beta:
        if abs(b - 1.0) < 1e-9:
            out.append(laplace_exponent_prime(p, 0.5 * (1.0 + b)))
        else:
            out.append((q - psi1) / (b - 1.0))
    return tuple(out)


def solve_put(p: ModelParams, q: float, strike: float, method: str = "auto") -> PutSolution:
    """Solve the put: k*, the expansion coefficients and delta_bar.

    ``method`` is "auto" (pick the q = psi(1) closed forms when applicable),
    "general" (scale-function route, valid for all q >= psi(1)) or "closed"
    (the q = psi(1) polynomial forms; errors otherwise).
    """
    check_assumption(p, q)
    if not strike > 0:
        raise ValueError(f"strike must be positive, got {strike}")
    psi1 = laplace_exponent(p, 1.0)
    at_martingale = abs(q - psi1) < FAST_PATH_RTOL * max(1.0, q)
    if method == "auto":
        method = "closed" if at_martingale else "general"
    if method == "closed" and not at_martingale:
        raise ValueError("closed-form put requires q = psi(1)")

    basis = solve_roots(p, TiltIndex(), q)
    b1, b2, b3 = basis.beta

    if method == "closed":
        ek = strike * q / (0.5 * p.sigma**2 + q + p.lam / (p.theta + 1.0) ** 2)
        if p.lam > 0:
            c1 = (b2 * strike + (1.0 - b2) * ek) / (b2 - b1)
            c2 = (b1 * strike + (1.0 - b1) * ek) / (b1 - b2)
        else:
            # without jumps the spurious root can collide with beta_2; the
            # partial-fraction construction assigns it coefficient zero
            rho = rho_factors(p, q, basis)
            C = basis.coeff
            c1 = C[0] * (strike * q / b1 - rho[0] * ek)
            c2 = C[1] * (strike * q / b2 - rho[1] * ek)
    elif method == "general":
        rho = rho_factors(p, q, basis)
        # e^{k*} = K (q/Phi) (Phi-1)/(q-psi(1)); the last ratio is 1/rho_3
        ek = strike * q / (b3 * rho[2])
        C = basis.coeff
        c1 = C[0] * (strike * q / b1 - rho[0] * ek)
        c2 = C[1] * (strike * q / b2 - rho[1] * ek)
    else:
        raise ValueError(f"unknown method {method!r}")

    k_star = math.log(ek)
    lk = math.log(strike)
    delta_bar = c1 * math.exp(b1 * (lk - k_star)) + c2 * math.exp(b2 * (lk - k_star))
    return PutSolution(
        k_star=k_star, delta_bar=delta_bar, c1=c1, c2=c2,
        strike=strike, q=q, basis=basis,
    )


def put_value(s: PutSolution, p: ModelParams, q: float, x: float) -> float:
    """U(x): intrinsic below k*, the two-exponential expansion above."""
    if x <= s.k_star:
        return s.strike - math.exp(x)
    b1, b2 = s.basis.beta[0], s.basis.beta[1]
    dx = x - s.k_star
    return s.c1 * math.exp(b1 * dx) + s.c2 * math.exp(b2 * dx)


def put_value_prime(s: PutSolution, x: float) -> float:
    """U'(x) on the expansion branch (x > k*)."""
    b1, b2 = s.basis.beta[0], s.basis.beta[1]
    dx = x - s.k_star
    return s.c1 * b1 * math.exp(b1 * dx) + s.c2 * b2 * math.exp(b2 * dx)
