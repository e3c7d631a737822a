"""Local-oscillator phase policies driven by delayed measurement data."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .estimators import (
    DyneRecord,
    EpsilonEndpoint,
    UndefinedEstimate,
    epsilon_estimate,
    variable_epsilon,
    wrap_angle,
)
from .simcore import DEAD_TIME, ProtocolViolation, TimeGrid

HALF_PI = 0.5 * math.pi
PI = math.pi
TWO_PI = 2.0 * math.pi


class SchemeKind(enum.IntEnum):
    HETERODYNE = 0
    SIMPLIFIED = 1
    CORRECTED_SIMPLIFIED = 2
    ARG_A = 3
    CONST_EPS = 4
    VAR_EPS = 5


_TAGS = {
    SchemeKind.HETERODYNE: "heterodyne",
    SchemeKind.SIMPLIFIED: "simplified",
    SchemeKind.CORRECTED_SIMPLIFIED: "corrected_simplified",
    SchemeKind.ARG_A: "arg_a",
    SchemeKind.CONST_EPS: "const_eps",
    SchemeKind.VAR_EPS: "var_eps",
}


class NoIntermediateEstimate(LookupError):
    pass


@dataclass(frozen=True)
class FeedbackScheme:
    """A feedback policy.

    ``denominator`` only matters for the simplified schemes: ``"current"``
    divides the delayed increment by sqrt(v) at the time the phase is applied,
    ``"published"`` by sqrt(v) at the end of the increment being fed back.
    """

    kind: SchemeKind
    eps: float | None = None
    denominator: str = "current"

    def __post_init__(self):
        if self.kind is SchemeKind.CONST_EPS:
            if self.eps is None or not 0.0 <= self.eps <= 1.0:
                raise ValueError(f"const_eps needs eps in [0, 1], got {self.eps}")
        elif self.eps is not None:
            raise ValueError(f"{self.tag} takes no eps")
        if self.denominator not in ("current", "published"):
            raise ValueError(f"unknown denominator mode {self.denominator!r}")

    @property
    def tag(self) -> str:
        base = _TAGS[self.kind]
        if self.kind is SchemeKind.CONST_EPS:
            return f"{base}:{self.eps:g}"
        return base

    @property
    def is_simplified(self) -> bool:
        return self.kind in (SchemeKind.SIMPLIFIED, SchemeKind.CORRECTED_SIMPLIFIED)

    @classmethod
    def parse(cls, text: str, denominator: str = "current") -> "FeedbackScheme":
        name, _, arg = text.strip().lower().partition(":")
        for kind, tag in _TAGS.items():
            if name == tag:
                eps = float(arg) if arg else None
                return cls(kind, eps, denominator)
        raise ValueError(f"unknown feedback scheme {text!r}")


HETERODYNE = FeedbackScheme(SchemeKind.HETERODYNE)
SIMPLIFIED = FeedbackScheme(SchemeKind.SIMPLIFIED)
CORRECTED_SIMPLIFIED = FeedbackScheme(SchemeKind.CORRECTED_SIMPLIFIED)
ARG_A = FeedbackScheme(SchemeKind.ARG_A)
VAR_EPS = FeedbackScheme(SchemeKind.VAR_EPS)


@dataclass(frozen=True)
class DelayedDatum:
    """What the producer publishes after step ``step``: the increment and the
    record including it (so ``record.v`` is the end of that increment)."""

    step: int
    i_dv: float
    record: DyneRecord


@dataclass(frozen=True)
class FeedbackState:
    lo_phase: float = 0.0
    intermediate_estimate: float | None = None
    eps: float = 1.0  # last usable time-dependent epsilon


def _rotate(phase: float, delta: float) -> float:
    phase += delta
    if phase > PI:
        phase -= TWO_PI
    return phase


def next_phase(scheme: FeedbackScheme, state: FeedbackState, delayed, step: int,
               grid: TimeGrid, *, alpha: float = 0.0, delay_steps: int = 1) -> FeedbackState:
    """Local-oscillator phase for ``step`` given the datum read from the delay line."""
    kind = scheme.kind
    if kind is SchemeKind.HETERODYNE or delayed is DEAD_TIME:
        if delayed is DEAD_TIME and step >= delay_steps:
            raise ProtocolViolation(f"no delayed datum at step {step} (delay {delay_steps})")
        return replace(state, lo_phase=_rotate(state.lo_phase, HALF_PI))
    if delayed is None:
        raise ProtocolViolation(f"missing datum at step {step}")

    if scheme.is_simplified:
        if scheme.denominator == "current":
            v = step * grid.dv
        else:
            v = delayed.record.v
        if kind is SchemeKind.CORRECTED_SIMPLIFIED:
            v += alpha * delay_steps * grid.dv
        lo = state.lo_phase + delayed.i_dv / math.sqrt(v)
        return FeedbackState(lo, lo - HALF_PI, state.eps)

    record = delayed.record
    eps = state.eps
    if kind is SchemeKind.ARG_A:
        target = 1.0
    elif kind is SchemeKind.CONST_EPS:
        target = scheme.eps
    else:
        try:
            eps = variable_epsilon(record)
        except EpsilonEndpoint:
            pass
        target = eps
    try:
        est = _estimate_with_fallback(record, target)
    except UndefinedEstimate:
        return replace(state, eps=eps)
    return FeedbackState(est + HALF_PI, est, eps)


def _estimate_with_fallback(record: DyneRecord, eps: float) -> float:
    # C vanishes (up to roundoff) while the record is a pure homodyne record,
    # e.g. after the first step; fall back to whichever angle exists
    try:
        return epsilon_estimate(record, eps)
    except UndefinedEstimate:
        if record.A == 0:
            return epsilon_estimate(record, 0.0)
        return epsilon_estimate(record, 1.0)


def intermediate_estimate_of(scheme: FeedbackScheme, state: FeedbackState) -> float:
    if scheme.kind is SchemeKind.HETERODYNE:
        raise NoIntermediateEstimate("heterodyne detection forms no intermediate estimate")
    return wrap_angle(state.lo_phase - HALF_PI)
