"""Ensemble runs, phase-variance statistics, delay sweeps and slope fits."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .estimators import C_ROUNDOFF
from .feedback import FeedbackScheme, SchemeKind
from .simcore import NoiseStream, SignalModel, TimeGrid, derive_seed, is_power_of_two
from .trajectory import run_block

ESTIMATORS = ("feedback", "arg_a", "arg_c")
BLOCK_SIZE = 128


class UnmeasurableVariance(ArithmeticError):
    """The mean resultant of the phases vanished."""


class InsufficientRange(ValueError):
    """Too few points for a slope fit."""


class BCeilingViolation(RuntimeError):
    """|B(1)| exceeded the dead-time bound 1 - tau + 2 dv."""


class PhaseVariance(NamedTuple):
    holevo: float
    moment: float


def holevo_variance(phases, true_phase: float = 0.0) -> PhaseVariance:
    """Holevo variance ``|<e^{i theta}>|^-2 - 1`` and the wrapped second moment
    about ``true_phase``."""
    theta = np.asarray(phases, dtype=float)
    if theta.size == 0:
        raise ValueError("no phases")
    r = abs(np.mean(np.exp(1j * theta)))
    if r < 1e-12:
        raise UnmeasurableVariance("mean resultant length is zero")
    dev = np.remainder(theta - true_phase + math.pi, 2 * math.pi) - math.pi
    return PhaseVariance(1.0 / (r * r) - 1.0, float(np.mean(dev * dev)))


def holevo_jackknife_se(phases) -> float:
    """Jackknife standard error of the Holevo variance."""
    z = np.exp(1j * np.asarray(phases, dtype=float))
    n = z.size
    if n < 2:
        raise ValueError("need at least two phases")
    loo = np.abs(z.sum() - z) / (n - 1)
    v = 1.0 / loo ** 2 - 1.0
    return float(math.sqrt((n - 1) / n * np.sum((v - v.mean()) ** 2)))


@dataclass(frozen=True)
class EstimatorStats:
    holevo_variance: float
    moment_variance: float
    std_error: float
    n_valid: int


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    master_seed: int
    scheme: FeedbackScheme
    alpha: float
    n_steps: int
    delay_steps: int
    true_phase: float = 0.0

    def __post_init__(self):
        if self.n_traj < 2:
            raise ValueError("n_traj must be >= 2")
        TimeGrid(self.n_steps)
        if not 1 <= self.delay_steps <= self.n_steps // 4:
            raise ValueError(f"delay_steps must lie in [1, n_steps/4], got {self.delay_steps}")

    @property
    def tau(self) -> float:
        return self.delay_steps / self.n_steps


@dataclass(frozen=True)
class EnsembleSummary:
    config: EnsembleConfig
    estimators: dict = field(repr=False)  # name -> EstimatorStats | None
    mean_inv_np: float
    mean_abs_b: float
    max_abs_b: float
    invalid_count: int
    singular_count: int

    def variance(self, estimator: str) -> float:
        return self.estimators[estimator].holevo_variance

    def std_error(self, estimator: str) -> float:
        return self.estimators[estimator].std_error


@dataclass(frozen=True)
class EnsembleArrays:
    """Per-trajectory final quantities, in trajectory-index order."""

    final_phase: np.ndarray
    A: np.ndarray
    B: np.ndarray


def simulate_ensemble(cfg: EnsembleConfig, threads: int = 1) -> EnsembleArrays:
    grid = TimeGrid(cfg.n_steps)
    signal = SignalModel(cfg.alpha, cfg.true_phase)
    starts = range(0, cfg.n_traj, BLOCK_SIZE)

    def block(i0):
        idx = range(i0, min(i0 + BLOCK_SIZE, cfg.n_traj))
        noise = np.stack([NoiseStream(cfg.master_seed, i).increments(grid.n_steps, grid.dv)
                          for i in idx])
        return run_block(cfg.scheme, signal, grid, cfg.delay_steps, noise)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(i0) for i0 in starts]
    phase, a, b = (np.concatenate(x) for x in zip(*parts))
    return EnsembleArrays(phase, a, b)


def _stats(phases: np.ndarray, true_phase: float) -> EstimatorStats:
    hv = holevo_variance(phases, true_phase)
    return EstimatorStats(hv.holevo, hv.moment, holevo_jackknife_se(phases), phases.size)


def summarize(cfg: EnsembleConfig, arrays: EnsembleArrays) -> EnsembleSummary:
    dv = 1.0 / cfg.n_steps
    A, B = arrays.A, arrays.B
    C = A + B * np.conj(A)
    abs_b = np.abs(B)
    ceiling = 1.0 - cfg.tau + 2.0 * dv
    if abs_b.max() > ceiling:
        raise BCeilingViolation(f"max |B(1)| = {abs_b.max():.15g} > {ceiling:.15g}")

    valid_a = A != 0
    valid_c = np.abs(C) > C_ROUNDOFF * np.abs(A) * (1.0 + abs_b)
    est = {"arg_a": _stats(np.angle(A[valid_a]), cfg.true_phase),
           "arg_c": _stats(np.angle(C[valid_c]), cfg.true_phase)}
    if cfg.scheme.kind is SchemeKind.HETERODYNE:
        est["feedback"] = None
    else:
        est["feedback"] = _stats(arrays.final_phase - 0.5 * math.pi, cfg.true_phase)

    regular = abs_b < 1.0
    beta = C[regular] / (1.0 - abs_b[regular] ** 2)
    n_p = np.abs(beta) ** 2 + np.sinh(np.arctanh(abs_b[regular])) ** 2
    n_p = n_p[n_p > 0]
    mean_inv_np = float(np.mean(1.0 / n_p)) if n_p.size else math.nan
    return EnsembleSummary(
        config=cfg,
        estimators=est,
        mean_inv_np=mean_inv_np,
        mean_abs_b=float(abs_b.mean()),
        max_abs_b=float(abs_b.max()),
        invalid_count=int(np.count_nonzero(~(valid_a & valid_c))),
        singular_count=int(np.count_nonzero(~regular)),
    )


def run_ensemble(cfg: EnsembleConfig, threads: int = 1) -> EnsembleSummary:
    """Simulate ``cfg.n_traj`` trajectories and reduce them in index order."""
    return summarize(cfg, simulate_ensemble(cfg, threads))


@dataclass(frozen=True)
class SweepTable:
    delays: tuple
    summaries: tuple

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.config.tau for s in self.summaries])

    def variances(self, estimator: str) -> np.ndarray:
        return np.array([s.variance(estimator) for s in self.summaries])

    def std_errors(self, estimator: str) -> np.ndarray:
        return np.array([s.std_error(estimator) for s in self.summaries])


def sweep_seed(master_seed: int, delay_steps: int) -> int:
    return derive_seed(master_seed, delay_steps)


def delay_sweep(base_cfg: EnsembleConfig, delays: Sequence[int], threads: int = 1) -> SweepTable:
    """Run ``base_cfg`` at each delay with an independent noise seed per delay."""
    delays = tuple(int(d) for d in delays)
    if not delays or delays[0] != 1 or list(delays) != sorted(set(delays)):
        raise ValueError("delays must be strictly ascending and start at 1")
    if not all(is_power_of_two(d) for d in delays):
        raise ValueError("delays must be powers of two")
    out = []
    for d in delays:
        cfg = replace(base_cfg, delay_steps=d, master_seed=sweep_seed(base_cfg.master_seed, d))
        out.append(run_ensemble(cfg, threads))
    return SweepTable(delays, tuple(out))


def excess_variance(variances: Sequence[float], k_baseline: int = 6):
    """Baseline (minimum of the first ``k_baseline`` entries) and per-delay excess."""
    if k_baseline < 1:
        raise ValueError("k_baseline must be >= 1")
    v = np.asarray(variances, dtype=float)
    baseline = float(v[:k_baseline].min())
    return baseline, v - baseline


class InverseMoment(NamedTuple):
    direct: float
    expansion: float


def inverse_photon_moment(values) -> InverseMoment:
    """Mean of 1/n directly and via ``1/<n> + <dn^2>/<n>^3``."""
    n = np.asarray(values, dtype=float)
    if n.size == 0 or np.any(n <= 0):
        raise ValueError("values must be positive")
    mean = n.mean()
    return InverseMoment(float(np.mean(1.0 / n)), float(1.0 / mean + n.var() / mean ** 3))


class SlopeFit(NamedTuple):
    slope: float
    slope_se: float
    intercept: float
    n_points: int


def fit_slope(x, y, se=None, min_points: int = 3) -> SlopeFit:
    """Weighted least-squares line; ``se`` are the per-point standard errors.

    The slope error is propagated from ``se`` (not rescaled by the residuals).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < min_points:
        raise InsufficientRange(f"need at least {min_points} points, got {x.size}")
    w = np.ones_like(x) if se is None else 1.0 / np.asarray(se, dtype=float) ** 2
    sw, sx, sy = w.sum(), (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    det = sw * sxx - sx * sx
    if det <= 0:
        raise InsufficientRange("x values are degenerate")
    slope = (sw * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    if se is None:
        resid = y - intercept - slope * x
        s2 = (resid ** 2).sum() / max(x.size - 2, 1)
        slope_se = math.sqrt(s2 * sw / det)
    else:
        slope_se = math.sqrt(sw / det)
    return SlopeFit(float(slope), float(slope_se), float(intercept), int(x.size))


def markone_slope(table: SweepTable, alpha: float, estimator: str = "feedback",
                  k_baseline: int = 6, max_alpha_tau: float = 0.3) -> SlopeFit:
    """Slope of the excess variance against tau over the points with alpha*tau <= cutoff."""
    var = table.variances(estimator)
    _, excess = excess_variance(var, k_baseline)
    keep = alpha * table.taus <= max_alpha_tau
    return fit_slope(table.taus[keep], excess[keep], table.std_errors(estimator)[keep])
