import numpy as np
import pytest

from backend.app.services import closed_forms, perturb


def random_pair(rng, L, K, d, noise_scale=1.0):
    """Rank-d signal with singular values in [1, 2] and a Gaussian noise matrix."""

    u, _ = np.linalg.qr(rng.standard_normal((L, d)))
    v, _ = np.linalg.qr(rng.standard_normal((K, d)))
    s = np.sort(rng.uniform(1.0, 2.0, size=d))[::-1]
    h = u @ np.diag(s) @ v.T
    e = noise_scale * rng.standard_normal((L, K))
    return perturb.PerturbationPair.build(h, e, rank=d)


def delta_at(pair, beta):
    """delta with |delta| ||A1|| + delta^2 ||A2|| = beta * mu_min."""

    return perturb.radius_delta0(pair, beta)


@pytest.fixture
def rng():
    yield np.random.default_rng(20240611)


@pytest.fixture
def make_pair(rng):
    def _make(L=8, K=10, d=2):
        return random_pair(rng, L, K, d)

    yield _make


@pytest.fixture
def small_pairs():
    """Seeded random instances with L, K <= 12 and d <= 3."""

    def _suite(count, seed=7):
        rng = np.random.default_rng(seed)
        for _ in range(count):
            L = int(rng.integers(4, 13))
            K = int(rng.integers(4, 13))
            d = int(rng.integers(1, min(3, L - 1, K - 1) + 1))
            yield random_pair(rng, L, K, d)

    yield _suite


@pytest.fixture
def const_saw():
    yield closed_forms.const_saw_pair


@pytest.fixture
def exp_const():
    yield closed_forms.exp_const_pair
