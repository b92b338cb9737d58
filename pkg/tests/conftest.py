import numpy as np
import pytest

from gribov.operator_core import BasisRange, OperatorParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def mu_lambda_params():
    return OperatorParams(mu=1.0, lam=0.5)


@pytest.fixture
def lambda_prime_params():
    # rho' = 1, rho = 2, delta = 2
    return OperatorParams(lambda_p=1.0, mu=2.0, lam=1.0)


@pytest.fixture
def small_range():
    return BasisRange(32)
