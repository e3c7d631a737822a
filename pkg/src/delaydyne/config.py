"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .feedback import FeedbackScheme
from .simcore import is_power_of_two
from .stats import ESTIMATORS


class ConfigError(ValueError):
    pass


def _ints(text):
    return [int(x) for x in _items(text)]


def _floats(text):
    return [float(x) for x in _items(text)]


def _items(text):
    return [x.strip() for x in text.split(",") if x.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 20240601
    n_steps: int = 2 ** 14
    delays: tuple = tuple(2 ** n for n in range(12))
    alphas: tuple = (5.0, 10.0, 20.0)
    schemes: tuple = ("simplified",)
    n_traj: int = 4000
    estimators: tuple = ESTIMATORS
    output_dir: str = "out"
    k_baseline: int = 6
    denominator: str = "current"
    trajectory_index: int = 0
    # markone-check
    max_alpha_tau: float = 0.3
    slope_min: float = 0.3
    slope_max: float = 0.6
    lin_alpha: float = 100.0
    lin_taus: tuple = (0.0, 5e-4, 1e-3, 2e-3)
    lin_n_traj: int = 10000
    lin_n_steps: int = 20000
    lin_v1: float = 0.01
    # theory
    n_bars: tuple = (100.0, 10000.0)
    taus: tuple = tuple(10.0 ** (-4 + k / 4) for k in range(17))

    def __post_init__(self):
        if self.n_steps < 2 or not is_power_of_two(self.n_steps):
            raise ConfigError(f"n_steps must be a power of two, got {self.n_steps}")
        for name in ("delays", "alphas", "schemes", "estimators", "lin_taus", "n_bars", "taus"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        for d in self.delays:
            if not is_power_of_two(d) or not 1 <= d <= self.n_steps // 4:
                raise ConfigError(f"delay {d} must be a power of two in [1, n_steps/4]")
        if list(self.delays) != sorted(set(self.delays)):
            raise ConfigError("delays must be strictly ascending")
        if any(a < 0 for a in self.alphas):
            raise ConfigError("alphas must be nonnegative")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
        if self.n_traj < 2:
            raise ConfigError("n_traj must be >= 2")
        if self.k_baseline < 1:
            raise ConfigError("k_baseline must be >= 1")
        try:
            self.feedback_schemes()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def feedback_schemes(self) -> list:
        return [FeedbackScheme.parse(s, self.denominator) for s in self.schemes]


_PARSERS = {
    "master_seed": int, "n_steps": int, "n_traj": int, "k_baseline": int,
    "trajectory_index": int, "lin_n_traj": int, "lin_n_steps": int,
    "max_alpha_tau": float, "slope_min": float, "slope_max": float, "lin_alpha": float,
    "lin_v1": float,
    "delays": lambda t: tuple(_ints(t)), "alphas": lambda t: tuple(_floats(t)),
    "lin_taus": lambda t: tuple(_floats(t)), "n_bars": lambda t: tuple(_floats(t)),
    "taus": lambda t: tuple(_floats(t)),
    "schemes": lambda t: tuple(_items(t)), "estimators": lambda t: tuple(_items(t)),
    "output_dir": str.strip, "denominator": str.strip,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    if path is None:
        return replace(ExperimentConfig(), **{k: v for k, v in overrides.items() if v is not None})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)
