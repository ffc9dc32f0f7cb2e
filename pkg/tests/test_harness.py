import math

import numpy as np
import pandas as pd
import pytest

from backend.app.errors import InputError
from backend.app.schemas import (
    Constant,
    ExponentialSum,
    ExpTerm,
    Oscillating,
    OscTerm,
    Saw,
    SweepConfig,
    WhiteNoise,
    WindowRule,
)
from backend.app.services import harness


def test_fit_rate_recovers_power_law():
    x = np.array([10.0, 20.0, 40.0, 80.0])
    fit = harness.fit_rate(x, 3.0 * x**-2)
    assert fit["slope"] == pytest.approx(-2.0)
    assert fit["halfwidth"] == pytest.approx(0.0, abs=1e-9)
    assert fit["n_points"] == 4


def test_fit_rate_semilog():
    n = np.array([10.0, 20.0, 30.0])
    fit = harness.fit_rate(n, np.exp(-0.1 * n), scale="semilog")
    assert fit["slope"] == pytest.approx(-0.1)


def test_fit_rate_drops_nonpositive():
    fit = harness.fit_rate([1.0, 2.0, 3.0], [0.0, np.nan, 1.0])
    assert fit["n_points"] == 1
    assert math.isnan(fit["slope"])


def test_violations_are_reported():
    records = pd.DataFrame(
        {
            "N": [10, 20],
            "delta": [0.1, 0.1],
            "delta_p": [0.5, 0.1],
            "res_w1": [0.0, 0.0],
            "res_l": [np.nan, np.nan],
            "res_t": [np.nan, np.nan],
        }
    )
    for rhs, flag, _ in harness.BOUND_CHECKS:
        records[rhs] = 0.2
        records[flag] = True
    found = harness._violations(records)
    assert set(found["N"]) == {10}
    assert set(found["bound"]) == {"rhs_thm3", "rhs_cor1", "rhs_cor1_scalar", "rhs_cor2", "rhs_cor2_scalar"}


def test_oscillating_sweep_rate():
    ks = [52, 102, 202, 302, 402, 502]
    cfg = SweepConfig(
        signal=Oscillating(terms=[OscTerm(gamma=1.0, omega=0.1)]),
        noise=Oscillating(terms=[OscTerm(gamma=1.0, omega=0.3)]),
        deltas=[0.5],
        n_grid=[2 * k - 1 for k in ks],
        window=WindowRule(kind="proportional", alpha=0.5),
        quantities=["delta_p", "res_v01", "he_over_mu"],
        rate_axis="min_LK",
    )
    result = harness.run_sweep(cfg, threads=1)
    assert list(result.records["K"]) == ks
    assert result.ok
    assert result.slope("delta_p") == pytest.approx(-1.0, abs=0.15)
    assert set(result.fits["quantity"]) == {"delta_p", "res_v01", "he_over_mu"}
    with pytest.raises(InputError):
        result.slope("theta")


def test_exponential_sweep_is_geometric():
    cfg = SweepConfig(
        signal=ExponentialSum(terms=[ExpTerm(beta=1.0, a=1.1)]),
        noise=Constant(),
        deltas=[1.0],
        n_grid=[41, 81, 121, 161, 201],
        quantities=["delta_p", "res_v01"],
        rate_scale="semilog",
    )
    result = harness.run_sweep(cfg)
    assert result.slope("delta_p") == pytest.approx(-math.log(1.1), abs=0.01)
    assert result.ok


def test_const_saw_sweep_rates():
    ks = [101, 201, 401, 801, 1601, 2001]
    cfg = SweepConfig(
        signal=Constant(),
        noise=Saw(),
        deltas=[0.25],
        n_grid=[k + 9 for k in ks],
        window=WindowRule(kind="fixed_L", value=10),
        quantities=["delta_p", "res_l"],
        rate_axis="K",
    )
    result = harness.run_sweep(cfg)
    assert result.slope("delta_p") == pytest.approx(-1.0, abs=0.1)
    assert result.slope("res_l") == pytest.approx(-2.0, abs=0.2)
    assert result.ok
    ratio = result.records["coarse_ratio"] / result.records["coarse_limit"]
    assert (ratio < 1.0).all()


def test_sweep_bounds_on_random_noise():
    cfg = SweepConfig(
        signal=Oscillating(terms=[OscTerm(gamma=5.0, omega=0.1)]),
        noise=WhiteNoise(),
        deltas=[0.05, -0.05],
        n_grid=[40, 60, 80],
        window=WindowRule(kind="fixed_L", value=12),
        seed=11,
    )
    result = harness.run_sweep(cfg)
    assert len(result.records) == 6
    assert result.ok
    assert result.records["valid_thm3"].all()


def test_sweep_requires_rank_below_window():
    cfg = SweepConfig(
        signal=Oscillating(terms=[OscTerm(gamma=1.0, omega=0.1)]),
        noise=Saw(),
        deltas=[0.1],
        n_grid=[10, 20],
        window=WindowRule(kind="fixed_L", value=2),
    )
    with pytest.raises(InputError):
        harness.run_sweep(cfg)


def test_sweep_records_are_reproducible():
    cfg = SweepConfig(
        signal=Constant(),
        noise=WhiteNoise(),
        deltas=[0.1],
        n_grid=[30, 50],
        window=WindowRule(kind="fixed_L", value=5),
        quantities=["delta_p"],
        seed=3,
    )
    first = harness.run_sweep(cfg).records
    second = harness.run_sweep(cfg).records
    pd.testing.assert_frame_equal(first, second)


# ---------- reconstruction of a^n + delta ----------

def test_reconstruction_main_term_shape():
    main = harness.reconstruction_main_term(1.01, 1.0, 50)
    assert main.shape == (99,)
    assert main[0] == pytest.approx(2.0 * 2.01 * 1.01**-50)


def test_reconstruction_rejects_even_length():
    with pytest.raises(InputError):
        harness.figure1_reproduce(1.01, 1.0, [100])
    with pytest.raises(InputError):
        harness.figure1_reproduce(0.99, 1.0, [101])


def check_figure(summary, a=1.01, delta=1.0):
    b = (a + 1.0) / (a - 1.0)
    for _, row in summary.iterrows():
        assert row["delta_f0"] == pytest.approx(row["delta_f0_predicted"], rel=0.05)
        assert row["L_delta_f_last_small"] == pytest.approx(2.0 * delta * b, rel=0.1)
        assert row["max_error"] > row["nonvanishing_floor"]
        assert 0.0 < row["max_error_head"] <= row["max_error"]


def test_reconstruction_small():
    result = harness.figure1_reproduce(1.01, 1.0, [999])
    curve = result.curves[999]
    assert list(curve.columns) == ["index", "error", "main_term"]
    assert len(curve) == 999
    check_figure(result.summary)


def test_reconstruction_head_error_shrinks_with_length():
    result = harness.figure1_reproduce(1.01, 1.0, [999, 1999])
    check_figure(result.summary)
    heads = result.summary.set_index("N")["max_error_head"]
    assert heads[1999] < heads[999]
