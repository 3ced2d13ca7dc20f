import math

import numpy as np
import pytest
from hypothesis import given

from irtrack.errors import DegenerateFit, DegenerateGeometry, InvalidArgument
from irtrack.geometry import random_rotation
from irtrack.sensor import NoiseModel
from irtrack.evaluation.accuracy import AccuracyConfig, accuracy_experiment
from irtrack.evaluation.latency import MotionTrace, estimate_latency
from irtrack.evaluation.noise import (NoiseProtocolConfig, fit_noise_quadratic, fit_plane,
                                      normality_statistic, plane_station)
from irtrack.evaluation.pipeline import SimulationConfig
from irtrack.evaluation.runtime import runtime_bench
from irtrack.evaluation.workspace import SweepConfig, depth_positions, workspace_sweep

from .strategies import seeds

NOISELESS = SimulationConfig(noise_model=NoiseModel.zero(), quantize=False)


# -- plane fitting ---------------------------------------------------------------------

def test_fit_plane_exact():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-50, 50, (20, 2)), np.full(20, 500.0)])
    fit = fit_plane(pts)
    assert np.allclose(np.abs(fit.normal), [0, 0, 1])
    assert abs(fit.offset) == pytest.approx(500.0)
    assert fit.rms_point_to_plane == pytest.approx(0.0, abs=1e-9)


def test_fit_plane_noise_rms():
    rng = np.random.default_rng(1)
    n, sigma = 10000, 0.7
    pts = np.column_stack([rng.uniform(-80, 80, (n, 2)), 600.0 + rng.normal(0, sigma, n)])
    assert fit_plane(pts).rms_point_to_plane == pytest.approx(sigma, rel=0.1)


@given(seeds)
def test_fit_plane_isometry_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(-80, 80, (200, 2)), rng.normal(0, 1, 200)])
    R = random_rotation(rng)
    moved = pts @ R.T + rng.uniform(-300, 300, 3)
    assert fit_plane(moved).rms_point_to_plane == pytest.approx(fit_plane(pts).rms_point_to_plane,
                                                                rel=1e-6)


def test_fit_plane_collinear():
    with pytest.raises(DegenerateGeometry):
        fit_plane(np.outer(np.arange(5.0), [1, 2, 3]))


# -- normality -------------------------------------------------------------------------------

def test_normality_gaussian_rarely_rejected():
    rejects = [normality_statistic(np.random.default_rng(s).normal(size=10000))[1] for s in range(50)]
    assert np.mean(np.logical_not(rejects)) >= 0.9


def test_normality_uniform_rejected():
    assert normality_statistic(np.random.default_rng(0).uniform(size=10000))[1]


def test_normality_errors():
    with pytest.raises(InvalidArgument):
        normality_statistic(np.ones(100))
    with pytest.raises(InvalidArgument):
        normality_statistic(np.arange(5.0))


def test_normality_matches_scipy_statistic():
    from scipy import stats
    x = np.random.default_rng(3).normal(size=500)
    a2, _ = normality_statistic(x)
    raw = stats.anderson(x, "norm").statistic
    n = len(x)
    assert a2 == pytest.approx(raw * (1 + 0.75 / n + 2.25 / n ** 2), rel=1e-9)


# -- quadratic sigma model -----------------------------------------------------------------

def test_quadratic_exact_recovery():
    d = np.linspace(200, 900, 12)
    fit = fit_noise_quadratic(d, 0.05 + 2e-4 * d + 1.2e-6 * d ** 2)
    assert (fit.model.a, fit.model.b, fit.model.c) == pytest.approx((0.05, 2e-4, 1.2e-6), rel=1e-6)
    assert fit.r_squared == pytest.approx(1.0)


def test_quadratic_linear_data():
    d = np.linspace(200, 900, 12)
    fit = fit_noise_quadratic(d, 0.1 + 1e-3 * d)
    assert abs(fit.model.c) < 1e-12


def test_quadratic_degenerate():
    with pytest.raises(DegenerateFit):
        fit_noise_quadratic([300, 300, 500, 500], [1, 1, 2, 2])


def test_sigma_grows_with_depth():
    cfg = NoiseProtocolConfig(frames=20, quantize=False)
    sig = [plane_station(NoiseModel(), d, cfg, [k]).sigma for k, d in enumerate([200, 450, 700, 900])]
    assert all(a < b for a, b in zip(sig, sig[1:]))
    for d, s in zip([200, 450, 700, 900], sig):
        assert s == pytest.approx(float(NoiseModel().sigma(d)), rel=0.1)


def test_injected_uniform_noise_fails_normality():
    # Quantisation alone at low sigma produces clearly non-Gaussian residuals.
    cfg = NoiseProtocolConfig(frames=20, quantize=True)
    st = plane_station(NoiseModel(0.01, 0, 0), 400.0, cfg, [0])
    assert st.ad_reject


# -- accuracy -----------------------------------------------------------------------------------

def test_accuracy_noiseless_is_exact():
    cfg = AccuracyConfig(frames=5, warmup=1, reps=2, pairs=50, sim=NOISELESS)
    for axis, mag in (("x", 1.0), ("rot", 10.0)):
        for rep in accuracy_experiment(axis, mag, cfg).values():
            assert rep.median == pytest.approx(0.0, abs=1e-6)
            assert rep.iqr == pytest.approx(0.0, abs=1e-6)
            assert rep.n_pairs == 100


def test_accuracy_large_rotation_median():
    cfg = AccuracyConfig(frames=30, warmup=5, reps=3, pairs=2000)
    out = accuracy_experiment("rot", 50.0, cfg, seed=4)
    assert abs(out[True].median) < 1.5
    assert out[True].iqr >= 0


def test_accuracy_is_seed_deterministic():
    cfg = AccuracyConfig(frames=8, warmup=2, reps=2, pairs=100)
    a = accuracy_experiment("z", 1.0, cfg, seed=9)
    b = accuracy_experiment("z", 1.0, cfg, seed=9)
    assert a[True].to_dict() == b[True].to_dict()
    assert a[False].to_dict() == b[False].to_dict()


def test_accuracy_rejects_unknown_axis():
    with pytest.raises(InvalidArgument):
        accuracy_experiment("y", 1.0)


# -- workspace ------------------------------------------------------------------------------------

def test_noiseless_sweep_has_zero_error():
    res = workspace_sweep(depth_positions(300, 700, 100), SweepConfig(frames=3, warmup=0, sim=NOISELESS))
    assert res.max_abs_error < 1e-6
    assert np.allclose(res.direction, [0, 0, 1], atol=1e-9)


def test_sweep_marks_out_of_range_stations_missing():
    pos = depth_positions(700, 1000, 150)
    res = workspace_sweep(pos, SweepConfig(frames=3, warmup=0))
    assert [s.missing for s in res.stations] == [False, False, True]
    assert len(list(res.rows())) == 3


# -- runtime ------------------------------------------------------------------------------------

def test_bench_more_tools_cost_more():
    one = runtime_bench(1, 1, frames=300)
    five = runtime_bench(5, 5, frames=300)
    assert one.mean_ms < five.mean_ms
    assert one.found_fraction == 1.0 and five.found_fraction > 0.9


def test_bench_loaded_but_hidden_tools_are_not_detected():
    res = runtime_bench(4, 1, frames=50)
    assert res.found_fraction == 1.0  # the hidden three simply never appear


# -- latency --------------------------------------------------------------------------------------

def _trace(delay=0.0, offset=0.0, hz=100.0, seconds=12.0):
    t = np.arange(0, seconds, 1 / hz)
    return MotionTrace(t, offset + 40 * np.sin(2 * np.pi * 0.4 * (t - delay)))


def test_latency_identical_traces():
    assert estimate_latency(_trace(), _trace(), 1.0) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("delay", [0.05, 0.1, 0.103, 0.4])
def test_latency_known_delay(delay):
    assert estimate_latency(_trace(), _trace(delay), 1.0) == pytest.approx(delay, abs=0.01)


def test_latency_offset_invariant():
    base = estimate_latency(_trace(), _trace(0.1), 1.0)
    assert estimate_latency(_trace(), _trace(0.1, offset=250.0), 1.0) == pytest.approx(base, abs=1e-9)


def test_latency_different_sampling_rates():
    ref = _trace(hz=100.0)
    tst = _trace(0.1, hz=45.0)
    assert estimate_latency(ref, tst, 1.0) == pytest.approx(0.1, abs=0.01)


def test_latency_window_too_long():
    with pytest.raises(InvalidArgument):
        estimate_latency(_trace(seconds=2.0), _trace(seconds=2.0), 5.0)
    with pytest.raises(InvalidArgument):
        MotionTrace([0, 1, 1], [0, 0, 0])
