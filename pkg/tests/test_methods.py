import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from backend.app.errors import DegenerateRankError, InputError, RadiusError, SingularSystemError
from backend.app.schemas import (
    Constant,
    ExponentialSum,
    ExpTerm,
    Oscillating,
    OscTerm,
    Polynomial,
    WhiteNoise,
)
from backend.app.services import methods, perturb, spectral
from backend.app.services.series import characteristic_roots, generate, theoretical_rank
from backend.app.services.trajectory import embed

from .conftest import delta_at

SIGNALS = [
    ExponentialSum(terms=[ExpTerm(beta=1.0, a=1.05), ExpTerm(beta=-2.0, a=-0.9), ExpTerm(beta=0.5, a=0.8)]),
    ExponentialSum(terms=[ExpTerm(beta=1.0, a=2.0)]),
    Polynomial(coeffs=[0.5, -1.0, 2.0]),
    Polynomial(coeffs=[0.01, 0.2, -1.0, 3.0]),
    Oscillating(terms=[OscTerm(gamma=1.0, omega=0.0), OscTerm(gamma=2.0, omega=0.1, phi=0.3), OscTerm(gamma=0.5, omega=0.35)]),
    Oscillating(terms=[OscTerm(gamma=1.0, omega=0.2, phi=1.0)]),
]


def noiseless(spec, n=24, window=9):
    values = generate(spec, n)
    return values, spectral.decompose(embed(values, window), rank=theoretical_rank(spec))


# ---------- LRF ----------

def test_lrf_of_powers_of_two():
    values = generate(ExponentialSum(terms=[ExpTerm(beta=1.0, a=2.0)]), 10)
    result = methods.lrf_coefficients(spectral.decompose(embed(values, 2)), series=values)
    assert_allclose(result.R, [2.0])
    assert result.residual == pytest.approx(0.0, abs=1e-9)


def test_lrf_minimal_window_gives_characteristic_polynomial():
    spec = ExponentialSum(terms=[ExpTerm(beta=1.0, a=1.2), ExpTerm(beta=1.0, a=0.8)])
    values, dec = noiseless(spec, n=20, window=3)
    result = methods.lrf_coefficients(dec, window=3, series=values)
    # x_n = 2 x_{n-1} - 0.96 x_{n-2}
    assert_allclose(result.coefficients, [2.0, -0.96], rtol=1e-9)
    assert result.cos_to_null == pytest.approx(np.sqrt(1.0 - dec.P0[-1, -1]))


@pytest.mark.parametrize("spec", SIGNALS)
def test_lrf_annihilates_signal(spec):
    values, dec = noiseless(spec)
    result = methods.lrf_coefficients(dec, series=values)
    assert result.relative_residual < 1e-8


def test_lrf_rejects_last_unit_vector_in_signal_space():
    values = np.zeros(8)
    values[-1] = 1.0
    dec = spectral.decompose(embed(values, 4))
    with pytest.raises(DegenerateRankError):
        methods.lrf_coefficients(dec)


def test_lrf_window_must_match():
    _, dec = noiseless(Constant(), n=10, window=4)
    with pytest.raises(InputError):
        methods.lrf_coefficients(dec, window=5)


def test_lrf_error_bound_values():
    assert methods.lrf_error_bound(0.1, 0.0) == pytest.approx(0.1 / 0.81 * 3.0)
    assert methods.lrf_error_bound(0.0, 0.5) == 0.0
    with pytest.raises(RadiusError):
        methods.lrf_error_bound(0.9, 0.6)
    with pytest.raises(InputError):
        methods.lrf_error_bound(0.1, 1.0)


# ---------- ESPRIT ----------

def assert_roots(found, expected, tol=1e-8):
    assert np.max(methods.match_roots(found, expected)) <= tol


@pytest.mark.parametrize("spec", [s for s in SIGNALS if s.type != "polynomial"])
def test_esprit_recovers_roots(spec):
    _, dec = noiseless(spec)
    result = methods.esprit(dec.basis)
    assert_roots(result.eigenvalues, characteristic_roots(spec))


@pytest.mark.parametrize("spec", [s for s in SIGNALS if s.type == "polynomial"])
def test_esprit_polynomial_cluster(spec):
    _, dec = noiseless(spec)
    roots = methods.esprit(dec.basis).eigenvalues
    assert roots.mean() == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(roots - 1.0)) < 1e-2


def test_esprit_frequencies():
    spec = Oscillating(terms=[OscTerm(gamma=1.0, omega=0.1)])
    _, dec = noiseless(spec, n=30, window=10)
    result = methods.esprit(dec.basis)
    assert_allclose(np.sort(result.frequencies), [-0.1, 0.1], atol=1e-10)
    assert_allclose(result.moduli, 1.0, atol=1e-10)


def test_esprit_is_basis_invariant(rng):
    _, dec = noiseless(SIGNALS[0])
    mixed = dec.basis @ (rng.standard_normal((3, 3)) + 3.0 * np.eye(3))
    assert_roots(methods.esprit(mixed).eigenvalues, methods.esprit(dec.basis).eigenvalues, tol=1e-9)


def test_esprit_upsilon_for_orthonormal_basis():
    _, dec = noiseless(SIGNALS[5])
    result = methods.esprit(dec.basis)
    vartheta2 = dec.P0perp[-1, -1]
    assert result.upsilon == pytest.approx(1.0 - vartheta2, rel=1e-9)


def test_esprit_rejects_dependent_columns():
    _, dec = noiseless(SIGNALS[5])
    u = np.column_stack([dec.basis[:, 0], dec.basis[:, 0]])
    with pytest.raises(SingularSystemError):
        methods.esprit(u)
    with pytest.raises(InputError):
        methods.esprit(np.ones((2, 2)))


def test_esprit_error_bound_values():
    assert methods.esprit_error_bound(0.2, 1.0) == pytest.approx(0.4 * (1.0 + 1.0 / 0.6))
    assert methods.esprit_error_bound(0.0, 0.3) == 0.0
    with pytest.raises(RadiusError):
        methods.esprit_error_bound(0.5, 1.0)
    assert methods.esprit_error_bound_basis_free(0.1, 0.0) == methods.esprit_error_bound(0.1, 1.0)


# ---------- perturbed methods ----------

def noisy_pair(spec, seed, n=40, window=15, scale=1.0):
    signal = generate(spec, n)
    noise = generate(WhiteNoise(), n, seed=seed)
    noise = type(noise)(scale * noise.values)
    return perturb.pair_from_series(signal, noise, window, rank=theoretical_rank(spec))


@pytest.mark.parametrize("seed", range(10))
def test_perturbed_lrf_within_bound(seed):
    pair = noisy_pair(SIGNALS[4], seed)
    delta = delta_at(pair, 0.05)
    cmp = methods.lrf_perturbed(pair, delta)
    assert cmp.within_bound
    assert cmp.error > 0.0


@pytest.mark.parametrize("seed", range(10))
def test_perturbed_esprit_within_bound(seed):
    pair = noisy_pair(SIGNALS[4], seed)
    delta = delta_at(pair, 0.05)
    cmp = methods.esprit_perturbed(pair, delta)
    assert cmp.within_bound
    assert cmp.bound <= cmp.bound_basis_free * (1 + 1e-9)
    # P(delta) U spans the same space as the SVD basis of H + delta E
    assert_roots(cmp.projected.eigenvalues, cmp.observed.eigenvalues, tol=1e-8)


@pytest.mark.slow
def test_method_bounds_randomized():
    rng = np.random.default_rng(77)
    violations = 0
    for trial in range(200):
        spec = SIGNALS[int(rng.integers(len(SIGNALS)))]
        if spec.type == "polynomial":
            continue
        pair = noisy_pair(spec, seed=1000 + trial)
        delta = delta_at(pair, float(rng.uniform(0.01, 0.1)))
        violations += not methods.lrf_perturbed(pair, delta).within_bound
        violations += not methods.esprit_perturbed(pair, delta).within_bound
    assert violations == 0


def test_esprit_bound_undefined_for_large_gap():
    pair = noisy_pair(SIGNALS[5], seed=1, scale=50.0)
    cmp = methods.esprit_perturbed(pair, 1.0)
    assert math.isinf(cmp.bound)
    assert cmp.within_bound


# ---------- SSA reconstruction ----------

def test_reconstruction_without_noise():
    pair = noisy_pair(SIGNALS[4], seed=3)
    recon = methods.ssa_reconstruct(pair, 0.0)
    assert recon.error_max < 1e-10
    assert len(recon.series) == 40


def test_reconstruction_sandwich():
    pair = noisy_pair(SIGNALS[4], seed=4)
    recon = methods.ssa_reconstruct(pair, delta_at(pair, 0.1))
    low, mid, high = recon.sandwich
    assert low <= mid + 1e-12
    assert mid <= high + 1e-12
    assert low > 0


def test_reconstruction_exact_for_biorthogonal(const_saw):
    pair = const_saw(10, 100)
    recon = methods.ssa_reconstruct(pair, 0.4)
    assert recon.error_max < 1e-12
    assert_allclose(recon.series.values, 1.0, atol=1e-12)


def test_match_roots_pairs_conjugates():
    found = np.array([0.3 - 0.4j, 0.3 + 0.4j + 1e-15, 1.0])
    expected = np.array([1.0, 0.3 + 0.4j, 0.3 - 0.4j])
    assert np.max(methods.match_roots(found, expected)) < 1e-14
    with pytest.raises(InputError):
        methods.match_roots(found, expected[:2])
