"""Acceptance suite: one test per headline criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines; the
Monte Carlo criterion simulates 1e5 paths at dt = 1e-3 and dominates runtime.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from putgame.errors import DegenerateRootsError
from putgame.game import (
    Regime,
    classify,
    f_prime_at_K,
    h_oracle,
    solve_delta_0,
    solve_delta_0_by_quadrature,
    solve_game,
    solve_x_star,
    solve_y_star,
    solve_y_star_by_quadrature,
)
from putgame.mc import estimate_exit_up, estimate_ruin, verify_saddle
from putgame.model import (
    ModelParams,
    TiltIndex,
    laplace_exponent,
    phi,
    risk_neutral_drift,
    solve_roots,
)
from putgame.put import put_value, solve_put
from putgame.scale import exit_up_probability, ruin_transform, w_transform_numeric
from tests.conftest import K0, Q0

LOG_K = math.log(K0)


def _report(name, detail=""):
    print(f"ACCEPTANCE PASS: {name}" + (f"  [{detail}]" if detail else ""))


def _psi_c(p, c, z, r):
    return (0.5 * p.sigma**2 * z * z + (p.sigma**2 * c + p.mu) * z
            - p.lam * p.theta * z / ((p.theta + z + c) * (p.theta + c)) - r)


def test_root_residuals_randomized_sweep():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    n_ok = 0
    worst_resid = 0.0
    worst_coeff = 0.0
    for _ in range(1000):
        p = ModelParams(rng.uniform(0.05, 2.0), rng.uniform(-1.0, 1.0),
                        rng.uniform(0.01, 4.0), rng.uniform(0.2, 5.0))
        c = rng.choice([0.0, rng.uniform(0.0, 2.0)])
        r = rng.choice([0.0, rng.uniform(1e-6, 2.0)])
        try:
            basis = solve_roots(p, TiltIndex(c=c), r)
        except DegenerateRootsError:
            continue
        b = basis.beta
        assert b[0] < -(p.theta + c) < b[1] <= b[2]
        resid = max(abs(_psi_c(p, c, bi, r)) for bi in b)
        assert resid <= 1e-10 * max(1.0, r)
        worst_resid = max(worst_resid, resid / max(1.0, r))
        csum = abs(sum(basis.coeff)) / sum(abs(x) for x in basis.coeff)
        cbsum = abs(sum(ci * bi for ci, bi in zip(basis.coeff, b)) - 2 / p.sigma**2)
        assert csum <= 1e-9
        assert cbsum <= 1e-9 * 2 / p.sigma**2
        worst_coeff = max(worst_coeff, csum)
        n_ok += 1
    elapsed = time.time() - t0
    assert elapsed < 5.0
    assert n_ok >= 990
    _report("root residuals + ordering, 1000-draw sweep",
            f"worst resid {worst_resid:.2e}, {elapsed:.2f}s")


def test_scale_transform_identity():
    rng = np.random.default_rng(7)
    t0 = time.time()
    sets = [(0.4, risk_neutral_drift(0.4, 1, 2, Q0), 1.0, 2.0, Q0)]
    while len(sets) < 10:
        sigma = rng.uniform(0.1, 1.5)
        mu = rng.uniform(-1.0, 1.0)
        lam = rng.uniform(0.0, 3.0)
        theta = rng.uniform(0.3, 4.0)
        q = rng.uniform(0.02, 0.8)
        sets.append((sigma, mu, lam, theta, q))
    worst = 0.0
    for sigma, mu, lam, theta, q in sets:
        p = ModelParams(sigma, mu, lam, theta)
        big_phi = phi(p, q)
        for gap in (0.5, 1.0, 2.0, 4.0, 8.0):
            beta = big_phi + gap
            num = w_transform_numeric(p, q, beta)
            ref = 1.0 / (laplace_exponent(p, beta) - q)
            rel = abs(num - ref) / abs(ref)
            assert rel <= 1e-6
            worst = max(worst, rel)
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report("scale-function transform identity, 10 sets x 5 transforms",
            f"worst rel {worst:.2e}, {elapsed:.2f}s")


def test_boundary_value_coefficient_identities():
    rng = np.random.default_rng(99)
    for _ in range(300):
        p = ModelParams(rng.uniform(0.05, 2.0), rng.uniform(-1.0, 1.0),
                        rng.uniform(0.01, 4.0), rng.uniform(0.2, 5.0))
        r = rng.uniform(1e-4, 2.0)
        basis = solve_roots(p, TiltIndex(), r)
        scale = sum(abs(x) for x in basis.coeff)
        assert abs(sum(basis.coeff)) <= 1e-9 * scale
        target = 2.0 / p.sigma**2
        got = sum(c * b for c, b in zip(basis.coeff, basis.beta))
        assert abs(got - target) <= 1e-9 * target
    _report("W(0)=0 and W'(0+)=2/sigma^2 coefficient identities")


def _richardson_slope(f, x, h=1e-5):
    s1 = (f(x + h) - f(x)) / h
    s2 = (f(x + 2 * h) - f(x)) / (2 * h)
    return 2.0 * s1 - s2


def test_put_suite(p0):
    for q in (Q0, 0.1):
        s = solve_put(p0, q, K0)
        grid = np.linspace(s.k_star - 2.0, LOG_K + 4.0, 1000)
        for x in grid:
            assert put_value(s, p0, q, x) >= max(K0 - math.exp(x), 0.0) - 1e-12
        slope = _richardson_slope(lambda x: put_value(s, p0, q, x), s.k_star)
        assert abs(slope + math.exp(s.k_star)) <= 1e-8
    closed = solve_put(p0, Q0, K0, method="closed")
    general = solve_put(p0, Q0, K0, method="general")
    assert abs(closed.k_star - general.k_star) <= 1e-10
    assert abs(closed.delta_bar - general.delta_bar) <= 1e-10
    for x in np.linspace(closed.k_star - 1, LOG_K + 3, 200):
        assert abs(put_value(closed, p0, Q0, x) - put_value(general, p0, Q0, x)) <= 1e-10
    _report("put suite: intrinsic domination, smooth fit 1e-8, route agreement 1e-10")


def test_game_suite(p0):
    cases = []
    for q in (Q0, 0.1):
        d0 = solve_delta_0(p0, q, K0)
        dbar = solve_put(p0, q, K0).delta_bar
        cases.append((q, 0.5 * d0))            # interval regime
        cases.append((q, 0.5 * (d0 + dbar)))   # point regime
    for q, delta in cases:
        sol = solve_game(p0, q, K0, delta)
        assert sol.put.k_star < sol.x_star < LOG_K
        assert abs(sol.value(LOG_K) - delta) <= 1e-9
        for bp in sol.value.breakpoints():
            assert abs(sol.value(bp - 1e-9) - sol.value(bp + 1e-9)) <= 1e-8
        slope = _richardson_slope(sol.value, sol.x_star)
        assert abs(slope + math.exp(sol.x_star)) <= 1e-8
        if sol.y_star is not None:
            assert abs(_richardson_slope(sol.value, sol.y_star)) <= 1e-6
        for x in np.linspace(sol.x_star - 1.5, LOG_K + 4.0, 1000):
            lower = max(K0 - math.exp(x), 0.0)
            assert lower - 1e-10 <= sol.value(x) <= lower + delta + 1e-10
    for q in (Q0, 0.1):
        dbar = solve_put(p0, q, K0).delta_bar
        sol = solve_game(p0, q, K0, dbar + 0.2)
        assert sol.regime is Regime.NO_CANCEL
        for x in np.linspace(-1.0, 6.0, 400):
            assert abs(sol.value(x) - put_value(sol.put, p0, q, x)) <= 1e-12
    _report("game suite: ordering, fits, sandwich, degenerate-penalty limit")


def test_oracle_equivalence(p0):
    t0 = time.time()
    models = [
        (p0, Q0),
        (p0, 0.1),
        (ModelParams(0.3, risk_neutral_drift(0.3, 0.5, 1.5, 0.08), 0.5, 1.5), 0.08),
        (ModelParams(0.6, risk_neutral_drift(0.6, 2.0, 3.0, 0.04), 2.0, 3.0), 0.04),
    ]
    n_combos = 0
    worst = 0.0
    for p, q in models:
        d0 = solve_delta_0(p, q, K0)
        gap = abs(d0 - solve_delta_0_by_quadrature(p, q, K0))
        assert gap <= 1e-6
        worst = max(worst, gap)
        n_combos += 1
        for frac in (0.35, 0.75):
            delta = frac * d0
            gap = abs(solve_y_star(p, q, K0, delta)
                      - solve_y_star_by_quadrature(p, q, K0, delta))
            assert gap <= 1e-6
            worst = max(worst, gap)
            n_combos += 1
    assert n_combos >= 10
    # value function against the compensation-formula evaluation, 20 points
    d0 = solve_delta_0(p0, Q0, K0)
    sol_i = solve_game(p0, Q0, K0, 0.5 * d0)
    sol_p = solve_game(p0, Q0, K0, 2.75)
    pts = 0
    for x in np.linspace(sol_i.y_star + 0.05, sol_i.y_star + 2.5, 10):
        gap = abs(h_oracle(p0, Q0, K0, 0.5 * d0, x, sol_i.y_star) - sol_i.value(x))
        assert gap <= 1e-6
        pts += 1
    for x in np.linspace(LOG_K + 0.05, LOG_K + 2.5, 10):
        gap = abs(h_oracle(p0, Q0, K0, 2.75, x, LOG_K) - sol_p.value(x))
        assert gap <= 1e-6
        pts += 1
    elapsed = time.time() - t0
    assert pts == 20
    assert elapsed < 60.0
    _report("oracle equivalence: thresholds/boundaries/value vs quadrature",
            f"{n_combos} boundary combos, worst {worst:.2e}, {elapsed:.1f}s")


def test_regime_consistency(p0):
    d0 = solve_delta_0(p0, Q0, K0)
    dbar = solve_put(p0, Q0, K0).delta_bar
    for delta in np.linspace(0.02 * dbar, 0.999 * dbar, 50):
        sign = f_prime_at_K(p0, Q0, K0, delta)
        regime = classify(p0, Q0, K0, delta)
        if abs(delta - d0) < 1e-9:
            continue
        if delta < d0:
            assert sign > 0 and regime is Regime.INTERVAL_CANCEL
        else:
            assert sign < 0 and regime is Regime.POINT_CANCEL
    assert abs(f_prime_at_K(p0, Q0, K0, d0)) <= 1e-8
    _report("regime consistency: boundary-derivative sign vs classification")


def test_monotonicity_and_limits(p0):
    dbar = solve_put(p0, Q0, K0).delta_bar
    d0 = solve_delta_0(p0, Q0, K0)
    xg = [solve_x_star(p0, Q0, K0, d) for d in np.linspace(0.02, 0.999 * dbar, 60)]
    assert np.all(np.diff(xg) < 0)
    yg = [solve_y_star(p0, Q0, K0, d) for d in np.linspace(0.02, 0.999 * d0, 60)]
    assert np.all(np.diff(yg) < 0)
    assert solve_y_star(p0, Q0, K0, 0.9999 * d0) - LOG_K <= 1e-2
    # divergence rate at vanishing penalty, measured where the log-offset
    # constant is small (unit strike)
    p1 = ModelParams(0.4, risk_neutral_drift(0.4, 1.0, 2.0, Q0), 1.0, 2.0)
    ys = solve_y_star(p1, Q0, 1.0, 1e-8)
    ratio = p1.theta * ys / (-math.log(1e-8))
    assert abs(ratio - 1.0) <= 0.05
    _report("boundary monotonicity and small-penalty limits",
            f"divergence ratio {ratio:.4f}")


def test_monte_carlo_saddle_and_identities(p0):
    t0 = time.time()
    n_paths, dt = 100_000, 1e-3
    d0 = solve_delta_0(p0, Q0, K0)
    delta = 0.5 * d0
    sol = solve_game(p0, Q0, K0, delta)
    starts = [0.8, 1.2, 1.55, 2.0, sol.y_star + 0.3]
    n_pert = 0
    for k, x0 in enumerate(starts):
        rep = verify_saddle(p0, Q0, K0, delta, x0, n_paths, dt, seed=1000 + k)
        assert rep["equilibrium"]["within_3se"], (x0, rep["equilibrium"])
        assert not rep["violations"], (x0, rep["violations"])
        n_pert += len(rep["perturbations"])
    # fluctuation identities: up-passage transform and ruin transform
    for i, x0 in enumerate((0.25, 0.5, 0.75)):
        est = estimate_exit_up(p0, Q0, x0, 1.0, n_paths=n_paths, dt=dt, seed=50 + i)
        assert abs(est.mean - exit_up_probability(p0, Q0, x0, 1.0)) <= 3 * est.std_error
    for i, x0 in enumerate((0.5, 1.0, 2.0)):
        est = estimate_ruin(p0, Q0, x0, n_paths=n_paths, dt=dt, seed=60 + i)
        assert abs(est.mean - ruin_transform(p0, Q0, x0)) <= 3 * est.std_error
    elapsed = time.time() - t0
    assert elapsed <= 300.0
    _report("Monte Carlo: equilibrium at 5 starts, saddle inequalities, identities",
            f"{n_pert} perturbation checks, {elapsed:.0f}s")


def test_figure_shape_sweep():
    proc = subprocess.run(
        [sys.executable, "-m", "putgame.cli", "sweep", "--param", "sigma",
         "--from", "0.25", "--to", "0.45", "--n", "30", "--lambda", "1",
         "--theta", "2", "--q", "0.05", "--strike", "5", "--delta", "1.0",
         "--risk-neutral-at", "0.4"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    rows = [line.split(",") for line in proc.stdout.strip().split("\n")[1:]]
    valid = [r for r in rows if r[5] == ""]
    assert len(valid) >= 20
    gap = np.array([float(r[1]) - float(r[2]) for r in valid])
    ys = np.array([float(r[4]) for r in valid])
    assert np.all(np.array([float(r[2]) for r in valid])
                  < np.array([float(r[1]) for r in valid]))
    assert np.all(np.diff(gap) > 0)      # gap shrinks toward the small-sigma end
    assert np.all(np.diff(ys) <= 1e-12)  # upper boundary nonincreasing in sigma
    _report("figure-shape checks via the sigma sweep")
