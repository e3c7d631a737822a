import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaydyne.feedback import ARG_A, HETERODYNE, SIMPLIFIED
from delaydyne.stats import (BCeilingViolation, EnsembleArrays, EnsembleConfig,
                             InsufficientRange, SweepTable, UnmeasurableVariance, delay_sweep,
                             excess_variance, fit_slope, holevo_jackknife_se, holevo_variance,
                             inverse_photon_moment, markone_slope, run_ensemble, summarize)


def test_holevo_examples():
    assert holevo_variance([0.3] * 5).holevo == pytest.approx(0, abs=1e-12)
    assert holevo_variance([0, math.pi / 2, -math.pi / 2]).holevo == pytest.approx(8)
    with pytest.raises(UnmeasurableVariance):
        holevo_variance([0, math.pi])
    with pytest.raises(ValueError):
        holevo_variance([])


def test_holevo_gaussian_small_angle():
    x = np.random.default_rng(0).normal(0, math.sqrt(1e-3), 10 ** 5)
    v = holevo_variance(x)
    assert v.holevo == pytest.approx(1e-3, rel=0.03)
    assert v.moment == pytest.approx(1e-3, rel=0.03)
    assert v.moment <= 1.1 * v.holevo


@given(st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=60), st.floats(-10, 10))
@settings(max_examples=1000, deadline=None)
def test_holevo_rotation_invariant(phases, shift):
    a = holevo_variance(phases).holevo
    b = holevo_variance(np.asarray(phases) + shift).holevo
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_jackknife_se_scale():
    x = np.random.default_rng(1).normal(0, 0.05, 4000)
    se = holevo_jackknife_se(x)
    # variance of a sample variance of normals: 2 sigma^4 / n
    assert se == pytest.approx(math.sqrt(2 / 4000) * 0.0025, rel=0.15)


def test_inverse_photon_moment_examples():
    m = inverse_photon_moment([7.0] * 4)
    assert m.direct == pytest.approx(1 / 7) and m.expansion == pytest.approx(1 / 7)
    m = inverse_photon_moment([50, 150])
    assert m.direct == pytest.approx(1 / 75)
    assert m.expansion == pytest.approx(0.0125)
    x = np.random.default_rng(2).normal(100, 1, 10 ** 4)
    m = inverse_photon_moment(x)
    assert m.direct == pytest.approx(m.expansion, rel=1e-6)
    with pytest.raises(ValueError):
        inverse_photon_moment([1, 0])


def test_excess_variance():
    base, ex = excess_variance([2.0] * 8)
    assert base == 2 and not ex.any()
    base, ex = excess_variance([3, 2, 4, 5, 6, 7, 8], k_baseline=6)
    assert base == 2 and ex[0] == 1 and ex[-1] == 6
    with pytest.raises(ValueError):
        excess_variance([1.0], 0)


def test_fit_slope():
    x = np.linspace(0, 1, 6)
    f = fit_slope(x, 3 * x + 1)
    assert f.slope == pytest.approx(3) and f.intercept == pytest.approx(1)
    assert f.slope_se == pytest.approx(0, abs=1e-10)
    assert fit_slope(x, np.full(6, 4.0)).slope == pytest.approx(0, abs=1e-12)
    w = fit_slope(x, 2 * x, se=np.full(6, 0.1))
    assert w.slope_se == pytest.approx(0.1 / math.sqrt(np.sum((x - x.mean()) ** 2)))
    with pytest.raises(InsufficientRange):
        fit_slope([0.1, 0.2], [1, 2])


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(1, 0, SIMPLIFIED, 5, 1024, 1)
    with pytest.raises(ValueError):
        EnsembleConfig(10, 0, SIMPLIFIED, 5, 1024, 512)
    assert EnsembleConfig(10, 0, SIMPLIFIED, 5, 1024, 256).tau == 0.25


def test_run_ensemble_deterministic_and_thread_independent():
    cfg = EnsembleConfig(300, 17, ARG_A, 6.0, 1024, 4)
    a = run_ensemble(cfg, threads=1)
    b = run_ensemble(cfg, threads=1)
    c = run_ensemble(cfg, threads=4)
    assert a == b == c
    for s in (a.estimators[e] for e in ("feedback", "arg_a", "arg_c")):
        assert s.holevo_variance >= 0 and s.std_error > 0
    assert a.mean_abs_b <= 1 - cfg.tau + 2 / 1024


def test_heterodyne_has_no_feedback_estimate():
    s = run_ensemble(EnsembleConfig(50, 1, HETERODYNE, 5.0, 512, 1))
    assert s.estimators["feedback"] is None
    assert s.max_abs_b <= 2 / 512 + 1e-15


def test_b_ceiling_is_enforced():
    cfg = EnsembleConfig(2, 0, SIMPLIFIED, 5.0, 1024, 256)
    arrays = EnsembleArrays(np.zeros(2), np.ones(2, complex), np.array([0.1, 0.9 + 0j]))
    with pytest.raises(BCeilingViolation):
        summarize(cfg, arrays)


def test_delay_sweep_protocol():
    base = EnsembleConfig(64, 3, SIMPLIFIED, 5.0, 512, 1)
    with pytest.raises(ValueError):
        delay_sweep(base, [2, 4])
    with pytest.raises(ValueError):
        delay_sweep(base, [1, 3])
    table = delay_sweep(base, [1, 2, 4, 8])
    assert table.delays == (1, 2, 4, 8)
    np.testing.assert_array_equal(table.taus, [1 / 512, 2 / 512, 4 / 512, 8 / 512])
    # independent noise per delay
    assert len(set(table.variances("arg_c"))) == 4


def test_markone_slope_needs_points():
    base = EnsembleConfig(64, 3, SIMPLIFIED, 5.0, 512, 1)
    table = delay_sweep(base, [1, 2])
    with pytest.raises(InsufficientRange):
        markone_slope(table, 5.0)
