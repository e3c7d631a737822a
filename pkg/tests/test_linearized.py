import math

import numpy as np
import pytest

from delaydyne.linearized import (LinearizedConfig, integrate_linearized, linearized_ensemble,
                                  simulate_linearized, slope_vs_tau, variance_with_se)
from delaydyne.simcore import NoiseStream
from delaydyne.stats import InsufficientRange


def test_config_validation():
    with pytest.raises(ValueError):
        LinearizedConfig(100, tau=1.5e-5, n_steps=20000)
    with pytest.raises(ValueError):
        LinearizedConfig(100, tau=0.99, v1=0.01)
    cfg = LinearizedConfig(100, tau=2e-3)
    assert cfg.delay_steps == 40 and cfg.start_step == 200
    assert cfg.init_var == 2.5e-3


def test_zero_alpha_is_integrated_noise():
    cfg = LinearizedConfig(0.0, 0.0, v1=0.01, n_steps=2000)
    x = linearized_ensemble(cfg, 5, 20000)
    var, se = variance_with_se(x)
    # the Euler sum gives sum dv / v over the grid, close to -log v1
    exact = sum(1 / k for k in range(20, 2000))
    assert exact == pytest.approx(-math.log(0.01), rel=0.03)
    assert abs(var - exact) < 3 * se


@pytest.mark.parametrize("alpha", [25, 100])
def test_zero_delay_variance(alpha):
    cfg = LinearizedConfig(alpha, 0.0, n_steps=8000)
    var, se = variance_with_se(linearized_ensemble(cfg, 11, 6000))
    assert abs(var - 1 / (4 * alpha)) < 3 * se


def test_sign_flip_symmetry():
    cfg = LinearizedConfig(100, 1e-3)
    stream = NoiseStream(4, 4)
    z = stream.standard_normals(cfg.n_steps + 1)
    inc = z[:-1] * math.sqrt(1.0 / cfg.n_steps)
    x0 = z[-1] * math.sqrt(cfg.init_var)
    assert integrate_linearized(cfg, -inc, -x0) == pytest.approx(-integrate_linearized(cfg, inc, x0))
    assert simulate_linearized(cfg, stream) == integrate_linearized(cfg, inc, x0)


def test_halving_dv():
    # coarse increments are sums of fine pairs (Brownian refinement)
    n_paths = 4000
    fine_cfg = LinearizedConfig(100, 0.0, n_steps=8000)
    coarse_cfg = LinearizedConfig(100, 0.0, n_steps=4000)
    fine, coarse = [], []
    for i in range(n_paths):
        z = NoiseStream(21, i).standard_normals(8001)
        inc = z[:-1] / math.sqrt(8000)
        x0 = z[-1] * math.sqrt(fine_cfg.init_var)
        fine.append(integrate_linearized(fine_cfg, inc, x0))
        coarse.append(integrate_linearized(coarse_cfg, inc.reshape(-1, 2).sum(1), x0))
    vf, se = variance_with_se(np.array(fine))
    vc, _ = variance_with_se(np.array(coarse))
    assert abs(vf - vc) < se


def test_history_insensitivity():
    base = LinearizedConfig(100, 1e-3)
    alt = LinearizedConfig(100, 1e-3, initial_variance=4 * base.init_var)
    va, se = variance_with_se(linearized_ensemble(base, 8, 3000))
    vb, _ = variance_with_se(linearized_ensemble(alt, 8, 3000))
    assert abs(va - vb) < se


def test_slope_vs_tau_guards():
    with pytest.raises(InsufficientRange):
        slope_vs_tau(100, [0.0, 0.01], 100)
    flat = slope_vs_tau(0.0, [0.0, 1e-3, 2e-3], 50, n_steps=1000, v1=0.5)
    assert flat.fit.n_points == 3
