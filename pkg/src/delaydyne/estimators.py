"""Running functionals of the dyne record and the phase estimates built on them."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

_TWO_PI = 2.0 * math.pi


class UndefinedEstimate(ArithmeticError):
    """An angle was requested from a zero complex amplitude."""


class EpsilonEndpoint(ArithmeticError):
    """The time-dependent epsilon cannot be evaluated (v = 1 or C = 0)."""


def wrap_angle(theta: float) -> float:
    """Map ``theta`` to (-pi, pi]."""
    w = math.remainder(theta, _TWO_PI)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class DyneRecord:
    A: complex = 0j
    B: complex = 0j
    v: float = 0.0

    @property
    def C(self) -> complex:
        return combine_c(self)


def accumulate(record: DyneRecord, i_dv: float, lo_phase: float, dv: float) -> DyneRecord:
    """Advance the record by one left-point step."""
    rot = cmath.exp(1j * lo_phase)
    return DyneRecord(record.A + i_dv * rot, record.B - rot * rot * dv, record.v + dv)


def combine_c(record: DyneRecord) -> complex:
    A = record.A
    return A * record.v + record.B * A.conjugate()


# |C| below this multiple of eps*|A|*(v+|B|) is indistinguishable from an exact
# cancellation (a pure homodyne record gives C = 0 analytically)
C_ROUNDOFF = 8.0 * 2.0 ** -52


def c_negligible(record: DyneRecord, C: complex | None = None) -> bool:
    if C is None:
        C = combine_c(record)
    return abs(C) <= C_ROUNDOFF * abs(record.A) * (record.v + abs(record.B))


def _arg(z: complex) -> float:
    if z == 0:
        raise UndefinedEstimate("argument of zero")
    return math.atan2(z.imag, z.real)


def blend_angles(arg_a: float, arg_c: float, eps: float) -> float:
    """Linear blend ``eps*arg_a + (1-eps)*arg_c`` after unwrapping arg_a onto arg_c."""
    arg_a = arg_a + _TWO_PI * round((arg_c - arg_a) / _TWO_PI)
    return eps * arg_a + (1.0 - eps) * arg_c


def epsilon_estimate(record: DyneRecord, eps: float) -> float:
    """Phase estimate between arg A (eps=1) and arg C (eps=0)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if eps == 1.0:
        return _arg(record.A)
    C = combine_c(record)
    if c_negligible(record, C):
        raise UndefinedEstimate("C vanishes to roundoff")
    arg_c = _arg(C)
    if eps == 0.0:
        return arg_c
    return blend_angles(_arg(record.A), arg_c, eps)


def variable_epsilon(record: DyneRecord) -> float:
    """Time-dependent epsilon ``(v^2-|B|^2)/|C| * sqrt(v/(1-v))`` clamped to [0, 1]."""
    v = record.v
    C = combine_c(record)
    abs_c = abs(C)
    if v >= 1.0 or abs_c == 0.0 or c_negligible(record, C):
        raise EpsilonEndpoint(f"epsilon undefined at v={v}, |C|={abs_c}")
    eps = (v * v - abs(record.B) ** 2) / abs_c * math.sqrt(v / (1.0 - v))
    return min(1.0, max(0.0, eps))


@dataclass(frozen=True)
class EstimateSet:
    """Final estimates; ``None`` marks an estimate that could not be formed."""

    feedback_final: float | None
    arg_a: float | None
    arg_c: float | None

    @property
    def invalid_count(self) -> int:
        return sum(x is None for x in (self.arg_a, self.arg_c))


def finalize(record: DyneRecord, feedback_phase_final: float | None) -> EstimateSet:
    def safe(z):
        try:
            return wrap_angle(_arg(z))
        except UndefinedEstimate:
            return None

    fb = None if feedback_phase_final is None else wrap_angle(feedback_phase_final)
    C = combine_c(record)
    return EstimateSet(fb, safe(record.A), None if c_negligible(record, C) else safe(C))
