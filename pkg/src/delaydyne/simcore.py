"""Time grid, signal model, counter-based noise and the feedback delay line.

Time is scaled to the unit interval and discretized on a uniform grid of
``n_steps`` points.  Each trajectory draws its Wiener increments from its own
Philox stream keyed by ``(master_seed, trajectory_index)``; the increment for
step ``k`` lives at a fixed counter position, so any step can be regenerated
without replaying the stream.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.random import Philox

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class ProtocolViolation(RuntimeError):
    """Raised when feedback data is requested that has not been published."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2 or not is_power_of_two(self.n_steps):
            raise ValueError(f"n_steps must be a power of two >= 2, got {self.n_steps}")

    @property
    def dv(self) -> float:
        return 1.0 / self.n_steps

    def v(self, step: int) -> float:
        """Scaled time at the left edge of ``step``."""
        return step / self.n_steps


@dataclass(frozen=True)
class SignalModel:
    alpha: float
    true_phase: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")

    @property
    def n_bar(self) -> float:
        return self.alpha * self.alpha


def photocurrent_increment(signal: SignalModel, lo_phase: float, dW: float,
                           dv: float) -> float:
    """Return ``I dv`` for a coherent signal seen through a local oscillator."""
    return 2.0 * signal.alpha * math.cos(signal.true_phase - lo_phase) * dv + dW


def derive_seed(master_seed: int, *tags: int) -> int:
    """Mix integer tags into a 64-bit seed (used to decorrelate sweep runs)."""
    ss = np.random.SeedSequence([master_seed & _MASK64, *[t & _MASK64 for t in tags]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _normals_from_raw(raw: np.ndarray) -> np.ndarray:
    # Box-Muller on consecutive (u1, u2) pairs; each pair yields two normals
    raw = raw.reshape(-1, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = _TWO_PI * u2
    out = np.empty(2 * raw.shape[0])
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out


@dataclass(frozen=True)
class NoiseStream:
    master_seed: int
    trajectory_index: int

    def _key(self) -> np.ndarray:
        return np.array([self.master_seed & _MASK64, self.trajectory_index & _MASK64],
                        dtype=np.uint64)

    def standard_normals(self, n: int, start: int = 0) -> np.ndarray:
        """Standard normals for steps ``start .. start+n-1``.

        Steps ``2m`` and ``2m+1`` share the uniform pair formed by raw outputs
        ``2m`` and ``2m+1`` of the Philox stream (cosine and sine branch), so
        counter block ``c`` covers steps ``4c .. 4c+3``.
        """
        if n <= 0:
            return np.empty(0)
        first_pair, last_pair = start // 2, (start + n - 1) // 2
        block, pair_offset = divmod(first_pair, 2)
        bitgen = Philox(key=self._key(), counter=np.array([block, 0, 0, 0], dtype=np.uint64))
        raw = bitgen.random_raw(2 * (pair_offset + last_pair - first_pair + 1))
        z = _normals_from_raw(raw[2 * pair_offset:])
        lead = start % 2
        return z[lead:lead + n]

    def increments(self, n_steps: int, dv: float) -> np.ndarray:
        return self.standard_normals(n_steps) * math.sqrt(dv)


def wiener_increment(stream: NoiseStream, step: int, dv: float) -> float:
    """The Wiener increment of ``stream`` at ``step`` (variance ``dv``)."""
    return float(stream.standard_normals(1, start=step)[0]) * math.sqrt(dv)


class _DeadTime:
    __slots__ = ()

    def __repr__(self):
        return "DEAD_TIME"


DEAD_TIME = _DeadTime()  # returned by delay_read before any datum is usable


@dataclass
class DelayLine:
    """FIFO carrying feedback data from producer to consumer with a fixed lag.

    The datum published at step ``j`` becomes readable at step ``j + delay_steps``.
    """

    delay_steps: int
    _buffer: deque = field(default_factory=deque, repr=False)
    _next_publish: int = 0
    _next_read: int = 0

    def __post_init__(self):
        if self.delay_steps < 1:
            raise ValueError(f"delay_steps must be >= 1, got {self.delay_steps}")

    def publish(self, step: int, datum: Any) -> None:
        if step != self._next_publish:
            raise ProtocolViolation(f"published step {step}, expected {self._next_publish}")
        self._buffer.append(datum)
        self._next_publish += 1

    def read(self, step: int) -> Any:
        return delay_read(self, step)


def delay_read(line: DelayLine, step: int) -> Any:
    """Return the datum published at ``step - d``, or ``DEAD_TIME``.

    Reads must be made in increasing step order; each datum is consumed once.
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    source = step - line.delay_steps
    if source < 0:
        return DEAD_TIME
    if source >= line._next_publish:
        raise ProtocolViolation(
            f"step {step} needs datum from step {source}, last published is "
            f"{line._next_publish - 1}")
    if source != line._next_read:
        raise ProtocolViolation(f"out-of-order read of step {source}")
    line._next_read += 1
    return line._buffer.popleft()
