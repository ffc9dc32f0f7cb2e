import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from backend.app.errors import InputError, RadiusError
from backend.app.services import perturb
from backend.app.services.trajectory import spectral_norm

from .conftest import delta_at, random_pair


def test_pair_operators(make_pair):
    pair = make_pair(L=6, K=9, d=2)
    h, e = pair.H, pair.E
    assert_allclose(pair.A1, h @ e.T + e @ h.T)
    assert_allclose(pair.A2, e @ e.T)
    assert pair.nu_max == pytest.approx(np.linalg.eigvalsh(e @ e.T)[-1])
    assert_allclose(perturb.b_of_delta(pair, 0.3), 0.3 * pair.A1 + 0.09 * pair.A2)
    assert spectral_norm(perturb.b_of_delta(pair, 0.3)) <= perturb.b_norm_bound(pair, 0.3) + 1e-12


def test_pair_shape_mismatch():
    with pytest.raises(InputError):
        perturb.PerturbationPair.build(np.ones((3, 4)), np.ones((4, 3)))


def test_radius_solves_quadratic(make_pair):
    pair = make_pair()
    for fraction in (0.25, 0.5):
        delta0 = perturb.radius_delta0(pair, fraction)
        assert perturb.b_norm_bound(pair, delta0) == pytest.approx(fraction * pair.dec.mu_min)


def test_expansion_status(make_pair):
    pair = make_pair()
    assert perturb.expansion_status(pair, delta_at(pair, 0.1)) == "certified"
    assert perturb.expansion_status(pair, delta_at(pair, 0.4)) == "valid_no_tail"
    assert perturb.expansion_status(pair, delta_at(pair, 0.9)) == "divergent"


def test_compositions_count():
    found = list(perturb.compositions(3, 4))
    assert len(found) == math.comb(6, 3)
    assert all(sum(c) == 3 and len(c) == 4 for c in found)
    assert len(set(found)) == len(found)


def test_truncation_order_meets_tolerance():
    for beta in (0.01, 0.1, 0.2):
        order = perturb.truncation_order(beta, 1e-10)
        assert perturb.series_tail(beta, order + 1) <= 1e-10
        if order > 0:
            assert perturb.series_tail(beta, order) > 1e-10
    assert perturb.truncation_order(0.0, 1e-10) == 0


def test_series_matches_oracle(small_pairs):
    for pair in small_pairs(25):
        delta = delta_at(pair, 0.09)
        approx = perturb.series_projector(pair, delta, tol=1e-10)
        exact = perturb.projector_direct(pair, delta)
        assert spectral_norm(approx.matrix - exact.matrix) <= 1e-9
        assert approx.tail_bound <= 1e-10


@pytest.mark.slow
def test_series_matches_oracle_full_suite(small_pairs):
    worst = 0.0
    for pair in small_pairs(500, seed=2024):
        delta = delta_at(pair, 0.09)
        approx = perturb.series_projector(pair, delta, tol=1e-10)
        worst = max(worst, spectral_norm(approx.matrix - perturb.projector_direct(pair, delta).matrix))
    assert worst <= 1e-9


def test_series_refuses_outside_radius(make_pair):
    pair = make_pair()
    with pytest.raises(RadiusError):
        perturb.series_projector(pair, delta_at(pair, 0.3))


def test_enumeration_and_recursion_agree(make_pair):
    pair = make_pair(L=7, K=9, d=3)
    delta = delta_at(pair, 0.1)
    b = perturb.b_of_delta(pair, delta)
    spow = perturb._s0_stack(pair.dec, 4)
    recursive = perturb._recursive_terms(spow, b, 4)
    for p in range(1, 5):
        assert_allclose(perturb.w_term(pair, delta, p), 0.5 * (recursive[p - 1] + recursive[p - 1].T), atol=1e-12)


def test_first_term_is_w1(make_pair):
    pair = make_pair()
    delta = delta_at(pair, 0.1)
    assert_allclose(perturb.w_term(pair, delta, 1), perturb.W1(pair, delta), atol=1e-12)
    with pytest.raises(InputError):
        perturb.w_term(pair, delta, 0)


def test_low_order_coefficients(make_pair):
    pair = make_pair()
    assert_allclose(perturb.v_coefficient(pair, 1), perturb.V0_1(pair), atol=1e-12)
    assert_allclose(perturb.v_coefficient(pair, 2), perturb.V0_2(pair), atol=1e-12)
    with pytest.raises(InputError):
        perturb.v_coefficient(pair, 0)


def test_coefficients_sum_to_projector(make_pair):
    pair = make_pair(L=6, K=8, d=2)
    delta = delta_at(pair, 0.01)
    partial = pair.dec.P0perp + sum(delta**n * perturb.v_coefficient(pair, n) for n in range(1, 6))
    exact = perturb.projector_direct(pair, delta).matrix
    assert spectral_norm(partial - exact) <= 1e-8


def test_first_order_residual_is_quadratic(make_pair):
    pair = make_pair()
    base = delta_at(pair, 0.01)
    v01 = perturb.V0_1(pair)
    residuals = [spectral_norm(perturb.delta_projector(pair, t * base) - t * base * v01) for t in (1.0, 0.5)]
    assert residuals[0] / residuals[1] == pytest.approx(4.0, rel=0.1)


def test_main_terms_are_close(make_pair):
    pair = make_pair()
    delta = delta_at(pair, 0.05)
    gap = perturb.delta_projector(pair, delta)
    size = spectral_norm(gap)
    for kind in ("W1", "V02", "Ldelta", "Tdelta"):
        term = perturb.main_term(pair, delta, kind)
        assert spectral_norm(gap - term.matrix) < size
    with pytest.raises(InputError):
        perturb.main_term(pair, delta, "direct")


def test_zero_delta_leaves_projector(make_pair):
    pair = make_pair()
    assert_allclose(perturb.delta_projector(pair, 0.0), 0.0, atol=1e-12)
    assert_allclose(perturb.series_projector(pair, 0.0).matrix, pair.dec.P0perp)


def test_resolvent_guard(rng):
    pair = random_pair(rng, 6, 8, 2)
    big = 2.0 * math.sqrt(pair.dec.mu_min / pair.norm_a2)
    with pytest.raises(RadiusError):
        perturb.L_delta(pair, big)


def test_l_splits_into_w1_and_k(make_pair):
    pair = make_pair()
    delta = delta_at(pair, 0.1)
    lhs = perturb.L_delta(pair, delta)
    rhs = perturb.W1(pair, delta) + delta**2 * perturb.K_delta(pair, delta)
    assert spectral_norm(lhs - rhs) <= 1e-10 * spectral_norm(lhs)


def test_central_difference_gives_v01(make_pair):
    pair = make_pair()
    h = 1e-6
    slope = (perturb.projector_direct(pair, h).matrix - perturb.projector_direct(pair, -h).matrix) / (2 * h)
    v01 = perturb.V0_1(pair)
    assert spectral_norm(slope - v01) <= 1e-6 * spectral_norm(v01) + 1e-8


def test_t_delta_reports_its_tail(make_pair):
    pair = make_pair()
    delta = delta_at(pair, 0.05)
    t = perturb.T_delta(pair, delta)
    assert t.kind == "Tdelta"
    assert t.tail_bound <= 2e-10
    assert t.order >= 1


@pytest.mark.parametrize("seed", range(6))
def test_fitted_coefficients_match_expansion(seed):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, int(rng.integers(4, 13)), int(rng.integers(4, 13)), int(rng.integers(1, 4)))
    h = delta_at(pair, 0.001)
    deltas = np.array([-2 * h, -h, h, 2 * h])
    samples = np.stack(
        [(perturb.series_projector(pair, d, tol=1e-14).matrix - pair.dec.P0perp).ravel() for d in deltas]
    )
    coef = np.polynomial.polynomial.polyfit(deltas, samples, 3)
    shape = pair.dec.P0perp.shape
    first, second = coef[1].reshape(shape), coef[2].reshape(shape)
    v01, v02 = perturb.V0_1(pair), perturb.V0_2(pair)
    assert spectral_norm(first - v01) <= 1e-6 * spectral_norm(v01) + 1e-9
    assert spectral_norm(second - v02) <= 1e-3 * spectral_norm(v02) + 1e-6


@pytest.mark.parametrize("kind", ["direct", "series", "W1", "V01", "V02", "Ldelta", "Kdelta", "Tdelta"])
@pytest.mark.parametrize("seed", range(4))
def test_gap_operators_are_symmetric(kind, seed):
    rng = np.random.default_rng(100 + seed)
    pair = random_pair(rng, int(rng.integers(4, 13)), int(rng.integers(4, 13)), int(rng.integers(1, 4)))
    delta = delta_at(pair, 0.1)
    if kind == "direct":
        m = perturb.delta_projector(pair, delta)
    elif kind == "series":
        m = perturb.series_projector(pair, delta).matrix
    else:
        m = perturb.main_term(pair, delta, kind).matrix
    assert spectral_norm(m - m.T) <= 1e-12 * spectral_norm(m)
