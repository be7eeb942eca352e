import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ropper.model import Dataset

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng, K=20, p=2, tau=1.0, noise=1.0):
    X = np.column_stack([np.ones(K), rng.standard_normal((K, p - 1))]) if p > 1 else np.ones((K, 1))
    sigma = rng.uniform(0.3, 2.0, K)
    beta = rng.standard_normal(p)
    y = X @ beta + tau * rng.standard_normal(K) + noise * sigma * rng.standard_normal(K)
    return Dataset(y, sigma, X)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
