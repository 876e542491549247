"""Command-line front end: solve | curve | sweep | verify.

Data goes to stdout (or --out) as JSON / CSV with '.' decimals, ',' separators
and LF line endings; everything is reproducible from the flags alone.
Exit codes: 0 success, 1 verification failure, 2 usage or assumption errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import game, mc, scale
from .errors import AssumptionError, PutGameError
from .model import ModelParams, TiltIndex, check_assumption, risk_neutral_drift, solve_roots
from .put import solve_put

SPEC_VERSION = "1"


def _f15(x):
    """Round-trip a float through 15 significant digits."""
    if x is None:
        return None
    return float(f"{x:.15g}")


def _fmt(x) -> str:
    return f"{x:.15g}"


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error_json(code: str, message: str) -> int:
    sys.stdout.write(json.dumps(
        {"error": code, "message": message, "spec_version": SPEC_VERSION}) + "\n")
    return 2


def _model_flags(sub, with_delta=True):
    sub.add_argument("--sigma", type=float, required=True)
    sub.add_argument("--lambda", dest="lam", type=float, required=True)
    sub.add_argument("--theta", type=float, required=True)
    sub.add_argument("--q", type=float, required=True)
    sub.add_argument("--strike", type=float, required=True)
    if with_delta:
        sub.add_argument("--delta", type=float, required=True)
    drift = sub.add_mutually_exclusive_group(required=True)
    drift.add_argument("--mu", type=float)
    drift.add_argument("--risk-neutral", action="store_true",
                       help="set mu so the discounted price is a martingale")


def _build_params(ns) -> ModelParams:
    mu = ns.mu if ns.mu is not None else risk_neutral_drift(ns.sigma, ns.lam, ns.theta, ns.q)
    return ModelParams(sigma=ns.sigma, mu=mu, lam=ns.lam, theta=ns.theta)


def cmd_solve(ns) -> int:
    try:
        p = _build_params(ns)
        check_assumption(p, ns.q)
        sol = game.solve_game(p, ns.q, ns.strike, ns.delta)
    except AssumptionError as exc:
        return _error_json("assumption_violated", str(exc))
    except (PutGameError, ValueError) as exc:
        return _error_json("invalid_parameters", str(exc))
    doc = {
        "spec_version": SPEC_VERSION,
        "regime": sol.regime.value,
        "k_star": _f15(sol.put.k_star),
        "delta_bar": _f15(sol.put.delta_bar),
        "delta_0": _f15(sol.delta_0),
        "x_star": _f15(sol.x_star),
        "y_star": _f15(sol.y_star),
        "alpha": _f15(sol.alpha),
        "mu": _f15(p.mu),
    }
    _emit(json.dumps(doc) + "\n", ns.out)
    return 0


def cmd_curve(ns) -> int:
    if not ns.xmax > ns.xmin or ns.n < 1:
        return _error_json("invalid_range", "need xmax > xmin and n >= 1")
    try:
        p = _build_params(ns)
        check_assumption(p, ns.q)
        ps = solve_put(p, ns.q, ns.strike)
        if ns.what == "V":
            sol = game.solve_game(p, ns.q, ns.strike, ns.delta)
            fn = sol.value
        elif ns.what == "U":
            sol = game.solve_game(p, ns.q, ns.strike, max(ns.delta, ps.delta_bar))
            fn = sol.value
        else:  # fprimeK: the x axis is the penalty
            if ns.xmin <= 0 or ns.xmax > ps.delta_bar:
                return _error_json(
                    "invalid_range",
                    f"fprimeK needs the grid inside (0, delta_bar={ps.delta_bar:.6g}]")
            fn = lambda d: game.f_prime_at_K(p, ns.q, ns.strike, d)
    except AssumptionError as exc:
        return _error_json("assumption_violated", str(exc))
    except (PutGameError, ValueError) as exc:
        return _error_json("invalid_parameters", str(exc))

    lines = ["x,value,lower_payoff,upper_payoff"]
    for i in range(ns.n + 1):
        x = ns.xmin + (ns.xmax - ns.xmin) * i / ns.n
        if ns.what == "fprimeK":
            lower, upper = 0.0, x
        else:
            lower = max(ns.strike - math.exp(x), 0.0)
            upper = lower + ns.delta
        lines.append(",".join(_fmt(v) for v in (x, fn(x), lower, upper)))
    _emit("\n".join(lines) + "\n", ns.out)
    return 0


def cmd_sweep(ns) -> int:
    if ns.param != "sigma":
        return _error_json("invalid_parameters", f"unsupported sweep parameter {ns.param!r}")
    if not ns.to > ns.from_ or ns.n < 1 or ns.from_ <= 0:
        return _error_json("invalid_range", "need 0 < from < to and n >= 1")
    mu = ns.mu
    if mu is None:
        ref = ns.risk_neutral_at if ns.risk_neutral_at is not None else ns.sigma_absent
        mu = risk_neutral_drift(ref, ns.lam, ns.theta, ns.q)

    lines = ["sigma,delta_bar,delta_0,x_star,y_star,skipped"]
    n_valid = 0
    for i in range(ns.n + 1):
        sig = ns.from_ + (ns.to - ns.from_) * i / ns.n
        try:
            p = ModelParams(sigma=sig, mu=mu, lam=ns.lam, theta=ns.theta)
            check_assumption(p, ns.q)
            sol = game.solve_game(p, ns.q, ns.strike, ns.delta)
        except AssumptionError:
            lines.append(f"{_fmt(sig)},,,,,skipped")
            continue
        n_valid += 1
        fields = [sol.put.delta_bar, sol.delta_0, sol.x_star,
                  sol.y_star if sol.y_star is not None
                  else (math.log(ns.strike) if sol.x_star is not None else None)]
        cells = [_fmt(sig)] + ["" if v is None else _fmt(v) for v in fields] + [""]
        lines.append(",".join(cells))
    if n_valid == 0:
        return _error_json("assumption_violated",
                           "every grid point violates the discount bound")
    _emit("\n".join(lines) + "\n", ns.out)
    return 0


def _check(name, tolerance, observed) -> dict:
    return {"name": name, "tolerance": tolerance, "observed": observed,
            "passed": bool(observed <= tolerance)}


def _suite_identities(p, q, strike, delta, n_paths, dt, seed):
    checks = []
    basis = solve_roots(p, TiltIndex(), q)
    psi = lambda z: scale.laplace_exponent(p, z)
    big_phi = basis.beta[2]
    worst = 0.0
    for db in (0.5, 1.0, 2.0, 4.0, 8.0):
        beta = big_phi + db
        num = scale.w_transform_numeric(p, q, beta)
        ref = 1.0 / (psi(beta) - q)
        worst = max(worst, abs(num - ref) / abs(ref))
    checks.append(_check("scale_transform_identity_rel", 1e-6, worst))

    t0 = TiltIndex()
    worst = 0.0
    for x in (0.25, 0.8, 1.5, 3.0):
        h = 1e-6
        fd = (scale.Z(p, t0, q, x + h) - scale.Z(p, t0, q, x - h)) / (2 * h)
        ref = q * scale.W(p, t0, q, x)
        worst = max(worst, abs(fd - ref) / max(1.0, abs(ref)))
    checks.append(_check("z_derivative_is_qw_rel", 1e-6, worst))

    for x0, a in ((0.25, 1.0), (0.5, 1.0), (0.75, 1.0)):
        est = mc.estimate_exit_up(p, q, x0, a, n_paths=n_paths, dt=dt, seed=seed)
        ref = scale.exit_up_probability(p, q, x0, a)
        gap = abs(est.mean - ref) / max(est.std_error, 1e-12)
        checks.append(_check(f"mc_exit_up_x{x0}_se_units", 3.0, gap))
    for x0 in (0.5, 1.0, 2.0):
        est = mc.estimate_ruin(p, q, x0, n_paths=n_paths, dt=dt, seed=seed + 1)
        ref = scale.ruin_transform(p, q, x0)
        gap = abs(est.mean - ref) / max(est.std_error, 1e-12)
        checks.append(_check(f"mc_ruin_x{x0}_se_units", 3.0, gap))
    return checks


def _suite_oracles(p, q, strike, delta):
    checks = []
    d0 = game.solve_delta_0(p, q, strike)
    d0_q = game.solve_delta_0_by_quadrature(p, q, strike)
    checks.append(_check("delta_0_closed_vs_quadrature", 1e-6, abs(d0 - d0_q)))
    d_use = delta if 0 < delta < d0 else 0.5 * d0
    ys = game.solve_y_star(p, q, strike, d_use)
    ys_q = game.solve_y_star_by_quadrature(p, q, strike, d_use)
    checks.append(_check("y_star_closed_vs_quadrature", 1e-6, abs(ys - ys_q)))
    sol = game.solve_game(p, q, strike, d_use)
    worst = 0.0
    for k in range(1, 11):
        x = ys + 0.25 * k
        worst = max(worst, abs(game.h_oracle(p, q, strike, d_use, x, ys) - sol.value(x)))
    checks.append(_check("value_vs_h_oracle_interval", 1e-6, worst))
    return checks


def _suite_saddle(p, q, strike, delta, n_paths, dt, seed, x0):
    report = mc.verify_saddle(p, q, strike, delta, x0, n_paths, dt, seed)
    checks = [{
        "name": "equilibrium_matches_value_3se",
        "tolerance": 3.0 * report["equilibrium"]["std_error"],
        "observed": report["equilibrium"]["abs_error"],
        "passed": report["equilibrium"]["within_3se"],
    }]
    for pert in report["perturbations"]:
        checks.append({
            "name": f"saddle_{pert['player']}_{pert['kind']}_{pert['level']:.6g}",
            "tolerance": 3.0 * pert["se_diff"],
            "observed": pert["mean_diff"],
            "passed": pert["satisfied"],
        })
    return checks


def cmd_verify(ns) -> int:
    try:
        p = _build_params(ns)
        check_assumption(p, ns.q)
        delta = ns.delta
        if delta is None:
            delta = 0.5 * game.solve_delta_0(p, ns.q, ns.strike)
        if ns.suite == "identities":
            checks = _suite_identities(p, ns.q, ns.strike, delta, ns.paths, ns.dt, ns.seed)
        elif ns.suite == "oracles":
            checks = _suite_oracles(p, ns.q, ns.strike, delta)
        else:
            x0 = ns.x0 if ns.x0 is not None else 0.5 * (math.log(ns.strike) +
                                                        game.solve_x_star(p, ns.q, ns.strike, delta))
            checks = _suite_saddle(p, ns.q, ns.strike, delta, ns.paths, ns.dt, ns.seed, x0)
    except AssumptionError as exc:
        return _error_json("assumption_violated", str(exc))
    except (PutGameError, ValueError) as exc:
        return _error_json("invalid_parameters", str(exc))
    ok = all(c["passed"] for c in checks)
    doc = {"spec_version": SPEC_VERSION, "suite": ns.suite, "passed": ok,
           "checks": [{k: (_f15(v) if isinstance(v, float) else v) for k, v in c.items()}
                      for c in checks]}
    _emit(json.dumps(doc) + "\n", ns.out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="putgame",
        description="Cancellable perpetual put (stopping game) under a jump-diffusion")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="boundaries, thresholds and regime as JSON")
    _model_flags(sp)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("curve", help="value-function curve as CSV")
    _model_flags(sp)
    sp.add_argument("--what", choices=["U", "V", "fprimeK"], required=True)
    sp.add_argument("--xmin", type=float, required=True)
    sp.add_argument("--xmax", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_curve)

    sp = sub.add_parser("sweep", help="thresholds and boundaries along a sigma grid")
    sp.add_argument("--param", default="sigma")
    sp.add_argument("--from", dest="from_", type=float, required=True)
    sp.add_argument("--to", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--strike", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    drift = sp.add_mutually_exclusive_group(required=True)
    drift.add_argument("--mu", type=float)
    drift.add_argument("--risk-neutral-at", type=float,
                       help="calibrate mu as risk-neutral at this reference sigma")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("verify", help="run a verification suite, report JSON")
    _model_flags(sp, with_delta=False)
    sp.add_argument("--delta", type=float, default=None,
                    help="penalty (default: half the interval threshold)")
    sp.add_argument("--suite", choices=["identities", "saddle", "oracles"], required=True)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--x0", type=float, default=None)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.fn(ns)


if __name__ == "__main__":
    sys.exit(main())
