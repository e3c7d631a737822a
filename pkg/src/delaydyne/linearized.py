"""Euler-Maruyama integration of the linearized delayed feedback SDE

    d phi_v = v^{-1/2} [ -2 alpha phi_{v - tau} dv + dW(v) ],   v1 <= v <= 1,

used as an independent check of the first-order delay correction to the
mark I variance.  The history on [v1 - tau, v1] is held at the value drawn at v1.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .simcore import NoiseStream, derive_seed
from .stats import InsufficientRange, SlopeFit, fit_slope

BLOCK_SIZE = 256


@dataclass(frozen=True)
class LinearizedConfig:
    alpha: float
    tau: float = 0.0
    v1: float = 0.01
    n_steps: int = 20000
    initial_variance: float | None = None  # None -> 1/(4 alpha)

    def __post_init__(self):
        if self.alpha < 0 or self.tau < 0:
            raise ValueError("alpha and tau must be nonnegative")
        if not 0.0 < self.v1 < 1.0:
            raise ValueError("v1 must lie in (0, 1)")
        if self.tau >= 1.0 - self.v1:
            raise ValueError("tau must be shorter than the linearized interval")
        for name, x in (("tau", self.tau), ("v1", self.v1)):
            steps = x * self.n_steps
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ValueError(f"{name}={x} is not a whole number of steps of 1/{self.n_steps}")

    @property
    def delay_steps(self) -> int:
        return int(round(self.tau * self.n_steps))

    @property
    def start_step(self) -> int:
        return int(round(self.v1 * self.n_steps))

    @property
    def init_var(self) -> float:
        if self.initial_variance is not None:
            return self.initial_variance
        return 1.0 / (4.0 * self.alpha) if self.alpha > 0 else 0.0


@numba.njit(cache=True, nogil=True)
def _integrate_kernel(alpha, n_steps, k1, d, increments, initial, out):
    dv = 1.0 / n_steps
    path = np.empty(n_steps + 1)
    for t in range(increments.shape[0]):
        path[k1] = initial[t]
        for k in range(k1, n_steps):
            j = k - d
            lagged = path[j] if j >= k1 else path[k1]
            path[k + 1] = path[k] + (-2.0 * alpha * lagged * dv + increments[t, k]) / math.sqrt(k * dv)
        out[t] = path[n_steps]


def integrate_linearized(cfg: LinearizedConfig, increments: np.ndarray,
                         initial: np.ndarray | float) -> np.ndarray | float:
    """Terminal values for explicit Wiener increments (rows = paths, columns = steps)."""
    inc = np.ascontiguousarray(np.atleast_2d(increments), dtype=np.float64)
    if inc.shape[1] != cfg.n_steps:
        raise ValueError("increments must have n_steps columns")
    init = np.ascontiguousarray(np.broadcast_to(np.asarray(initial, float), inc.shape[:1]))
    out = np.empty(inc.shape[0])
    _integrate_kernel(float(cfg.alpha), cfg.n_steps, cfg.start_step, cfg.delay_steps, inc, init, out)
    return out if np.ndim(increments) == 2 else float(out[0])


def _draws(cfg: LinearizedConfig, stream: NoiseStream):
    # the initial value uses the normal one past the last grid step
    z = stream.standard_normals(cfg.n_steps + 1)
    return z[:-1] * math.sqrt(1.0 / cfg.n_steps), z[-1] * math.sqrt(cfg.init_var)


def simulate_linearized(cfg: LinearizedConfig, stream: NoiseStream) -> float:
    inc, init = _draws(cfg, stream)
    return integrate_linearized(cfg, inc, init)


def linearized_ensemble(cfg: LinearizedConfig, master_seed: int, n_paths: int,
                        threads: int = 1) -> np.ndarray:
    def block(i0):
        draws = [_draws(cfg, NoiseStream(master_seed, i))
                 for i in range(i0, min(i0 + BLOCK_SIZE, n_paths))]
        inc = np.stack([d[0] for d in draws])
        return integrate_linearized(cfg, inc, np.array([d[1] for d in draws]))

    starts = range(0, n_paths, BLOCK_SIZE)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(i0) for i0 in starts]
    return np.concatenate(parts)


def variance_with_se(x: np.ndarray) -> tuple[float, float]:
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.size
    dev = x - x.mean()
    var = float(dev @ dev / (n - 1))
    m4 = float(np.mean(dev ** 4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / n)


@dataclass(frozen=True)
class LinearizedSweep:
    taus: np.ndarray
    variances: np.ndarray
    std_errors: np.ndarray
    fit: SlopeFit


def slope_vs_tau(alpha: float, taus: Sequence[float], ensemble_size: int, *,
                 master_seed: int = 20240601, n_steps: int = 20000, v1: float = 0.01,
                 max_alpha_tau: float = 0.3, threads: int = 1) -> LinearizedSweep:
    """Variance of the terminal estimate at each delay and its fitted slope in tau."""
    taus = np.asarray(sorted(taus), dtype=float)
    usable = taus[alpha * taus <= max_alpha_tau]
    if usable.size < 3:
        raise InsufficientRange(f"only {usable.size} delays with alpha*tau <= {max_alpha_tau}")
    var, se = [], []
    for tau in usable:
        cfg = LinearizedConfig(alpha, float(tau), v1, n_steps)
        x = linearized_ensemble(cfg, derive_seed(master_seed, cfg.delay_steps), ensemble_size,
                                threads)
        v, s = variance_with_se(x)
        var.append(v)
        se.append(s)
    var, se = np.array(var), np.array(se)
    return LinearizedSweep(usable, var, se, fit_slope(usable, var, se))
