"""Single-trajectory simulation.

``simulate_trajectory`` is the readable step-by-step loop built from the
per-step operations; it feeds the ``traj`` dump and the property tests.
``run_block`` is the compiled kernel used for ensembles.  Both follow the same
step order:

    for k = 0 .. N:
        k > 0: read datum published at k - d (dead time if k < d), set phase
        k = N: stop (the phase just set is the final feedback phase)
        draw I_k dv with the current phase, accumulate A, B, publish
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .estimators import C_ROUNDOFF, DyneRecord, EstimateSet, accumulate, combine_c, finalize
from .feedback import (
    DelayedDatum,
    FeedbackScheme,
    FeedbackState,
    SchemeKind,
    intermediate_estimate_of,
    next_phase,
)
from .simcore import DelayLine, NoiseStream, SignalModel, TimeGrid, delay_read, photocurrent_increment
from .theory import SingularMapping, SqueezeParams, squeeze_params, squeezed_photon_number


@dataclass(frozen=True)
class TrajectoryResult:
    estimates: EstimateSet
    A: complex
    B: complex
    squeeze: SqueezeParams | None
    n_p: float | None

    @property
    def C(self) -> complex:
        return self.A + self.B * self.A.conjugate()


@dataclass(frozen=True)
class StepRow:
    """State after ``step``: ``v`` is the end of the increment, ``lo_phase`` the
    phase used during it."""

    step: int
    v: float
    lo_phase: float
    i_dv: float
    A: complex
    B: complex
    C: complex
    eps: float


def _result(record: DyneRecord, final_phase: float | None) -> TrajectoryResult:
    try:
        sq = squeeze_params(record.A, record.B, record.v)
        n_p = squeezed_photon_number(sq)
    except SingularMapping:
        sq, n_p = None, None
    return TrajectoryResult(finalize(record, final_phase), record.A, record.B, sq, n_p)


def simulate_trajectory(scheme: FeedbackScheme, signal: SignalModel, grid: TimeGrid,
                        delay_steps: int, stream: NoiseStream | None = None, *,
                        increments: np.ndarray | None = None,
                        initial_lo_phase: float = 0.0,
                        keep_rows: bool = False):
    """Run one trajectory; returns ``(TrajectoryResult, rows)``.

    Pass either a noise ``stream`` or explicit Wiener ``increments``.
    """
    n, dv = grid.n_steps, grid.dv
    if increments is None:
        increments = stream.increments(n, dv)
    if delay_steps > n:
        raise ValueError("delay longer than the measurement")
    line = DelayLine(delay_steps)
    record = DyneRecord()
    state = FeedbackState(lo_phase=initial_lo_phase)
    rows = []
    for k in range(n + 1):
        if k > 0:
            datum = delay_read(line, k)
            state = next_phase(scheme, state, datum, k, grid,
                               alpha=signal.alpha, delay_steps=delay_steps)
        if k == n:
            break
        i_dv = photocurrent_increment(signal, state.lo_phase, float(increments[k]), dv)
        record = accumulate(record, i_dv, state.lo_phase, dv)
        line.publish(k, DelayedDatum(k, i_dv, record))
        if keep_rows:
            rows.append(StepRow(k, record.v, state.lo_phase, i_dv, record.A, record.B,
                                combine_c(record), _row_eps(scheme, state)))
    final = None if scheme.kind is SchemeKind.HETERODYNE else intermediate_estimate_of(scheme, state)
    return _result(record, final), rows


def _row_eps(scheme: FeedbackScheme, state: FeedbackState) -> float:
    if scheme.kind is SchemeKind.CONST_EPS:
        return scheme.eps
    if scheme.kind is SchemeKind.VAR_EPS:
        return state.eps
    if scheme.kind is SchemeKind.ARG_A:
        return 1.0
    return math.nan


# ---- compiled ensemble kernel ------------------------------------------------

_HALF_PI = 0.5 * math.pi
_PI = math.pi
_TWO_PI = 2.0 * math.pi
_C_ROUNDOFF = C_ROUNDOFF


@numba.njit(cache=True, nogil=True)
def _c_negligible(a, b, v, c):
    return abs(c) <= _C_ROUNDOFF * abs(a) * (v + abs(b))


@numba.njit(cache=True, nogil=True)
def _arg_blend(a, c, eps, c_zero):
    # returns (estimate, ok)
    if eps == 1.0:
        if a == 0:
            return 0.0, False
        return math.atan2(a.imag, a.real), True
    if c_zero:
        if a == 0:
            return 0.0, False
        return math.atan2(a.imag, a.real), True
    arg_c = math.atan2(c.imag, c.real)
    if eps == 0.0 or a == 0:
        return arg_c, True
    arg_a = math.atan2(a.imag, a.real)
    arg_a = arg_a + _TWO_PI * np.round((arg_c - arg_a) / _TWO_PI)
    return eps * arg_a + (1.0 - eps) * arg_c, True


@numba.njit(cache=True, nogil=True)
def _run_block_kernel(kind, eps_const, published, alpha, true_phase, lo_init, n_steps,
                      d, increments, out_phase, out_a, out_b):
    dv = 1.0 / n_steps
    corr = alpha * d * dv if kind == 2 else 0.0
    buf_idv = np.empty(d)
    buf_a = np.empty(d, dtype=np.complex128)
    buf_b = np.empty(d, dtype=np.complex128)
    buf_v = np.empty(d)
    for t in range(increments.shape[0]):
        lo = lo_init
        a = 0j
        b = 0j
        v = 0.0
        eps_prev = 1.0
        for k in range(n_steps + 1):
            if k > 0:
                if kind == 0 or k < d:
                    lo += _HALF_PI
                    if lo > _PI:
                        lo -= _TWO_PI
                else:
                    slot = (k - d) % d
                    if kind == 1 or kind == 2:
                        if published:
                            vv = buf_v[slot]
                        else:
                            vv = k * dv
                        lo = lo + buf_idv[slot] / math.sqrt(vv + corr)
                    else:
                        ra = buf_a[slot]
                        rb = buf_b[slot]
                        rv = buf_v[slot]
                        rc = ra * rv + rb * ra.conjugate()
                        c_zero = _c_negligible(ra, rb, rv, rc)
                        if kind == 3:
                            eps = 1.0
                        elif kind == 4:
                            eps = eps_const
                        else:
                            abs_c = abs(rc)
                            if rv < 1.0 and abs_c != 0.0 and not c_zero:
                                e = (rv * rv - abs(rb) ** 2) / abs_c * math.sqrt(rv / (1.0 - rv))
                                eps_prev = min(1.0, max(0.0, e))
                            eps = eps_prev
                        est, ok = _arg_blend(ra, rc, eps, c_zero)
                        if ok:
                            lo = est + _HALF_PI
            if k == n_steps:
                break
            i_dv = 2.0 * alpha * math.cos(true_phase - lo) * dv + increments[t, k]
            rot = complex(math.cos(lo), math.sin(lo))
            a = a + i_dv * rot
            b = b - rot * rot * dv
            v = v + dv
            slot = k % d
            buf_idv[slot] = i_dv
            buf_a[slot] = a
            buf_b[slot] = b
            buf_v[slot] = v
        out_phase[t] = lo
        out_a[t] = a
        out_b[t] = b


def run_block(scheme: FeedbackScheme, signal: SignalModel, grid: TimeGrid, delay_steps: int,
              increments: np.ndarray, initial_lo_phase: float = 0.0):
    """Simulate each row of ``increments`` as one trajectory.

    Returns ``(final_lo_phase, A, B)`` arrays.
    """
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    m = increments.shape[0]
    out_phase = np.empty(m)
    out_a = np.empty(m, dtype=np.complex128)
    out_b = np.empty(m, dtype=np.complex128)
    eps = -1.0 if scheme.eps is None else float(scheme.eps)
    _run_block_kernel(int(scheme.kind), eps, scheme.denominator == "published",
                      float(signal.alpha), float(signal.true_phase), float(initial_lo_phase),
                      grid.n_steps, int(delay_steps), increments, out_phase, out_a, out_b)
    return out_phase, out_a, out_b
