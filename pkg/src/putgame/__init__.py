"""Solver for the cancellable perpetual American put driven by a spectrally
negative jump-diffusion with exponential downward jumps."""

from .errors import (
    AssumptionError,
    DegenerateJumpsError,
    DegenerateRootsError,
    InconsistencyError,
    NonconvergenceError,
    PoleError,
    PutGameError,
    QuadratureError,
    RegimeError,
)
from .game import (
    GameSolution,
    PiecewiseValue,
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
    value_at,
)
from .mc import (
    PathRecord,
    PayoffEstimate,
    Strategy,
    estimate_exit_up,
    estimate_pair,
    estimate_ruin,
    first_stop,
    payoff,
    simulate,
    verify_saddle,
)
from .model import (
    Contract,
    CubicBasis,
    ModelParams,
    TiltIndex,
    check_assumption,
    laplace_exponent,
    laplace_exponent_prime,
    phi,
    risk_neutral_drift,
    solve_roots,
    tilted_laplace_exponent,
)
from .put import PutSolution, put_value, solve_put
from .scale import (
    W,
    Z,
    Z_tilted_1,
    exit_up_probability,
    resolvent_density,
    ruin_transform,
)

__version__ = "0.1.0"
