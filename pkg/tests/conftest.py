import pytest

from putgame.model import ModelParams, risk_neutral_drift

# reference jump-diffusion used throughout: risk-neutral at q = 0.05
SIGMA0, LAM0, THETA0, Q0, K0 = 0.4, 1.0, 2.0, 0.05, 5.0


@pytest.fixture(scope="session")
def p0() -> ModelParams:
    mu = risk_neutral_drift(SIGMA0, LAM0, THETA0, Q0)
    return ModelParams(sigma=SIGMA0, mu=mu, lam=LAM0, theta=THETA0)
