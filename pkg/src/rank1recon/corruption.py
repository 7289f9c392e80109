"""Corruption models producing an observed signal and its observation mask."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import ParameterError
from .model import ObservationMask


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str  # "clip" | "random_missing" | "additive_noise" | "none"
    clip_level: float = 0.0
    missing_rate: float = 0.0
    noise_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind == "clip" and not self.clip_level > 0:
            raise ParameterError("clip level must be positive")
        if self.kind == "random_missing" and not 0 <= self.missing_rate < 1:
            raise ParameterError("missing rate must lie in [0, 1)")
        if self.kind == "additive_noise" and self.noise_std < 0:
            raise ParameterError("noise std must be nonnegative")
        if self.kind not in ("clip", "random_missing", "additive_noise", "none"):
            raise ParameterError(f"unknown corruption kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "clip":
            return f"clip({self.clip_level:g})"
        if self.kind == "random_missing":
            return f"missing({self.missing_rate:g})"
        if self.kind == "additive_noise":
            return f"noise({self.noise_std:g})"
        return "none"

    def apply(self, y0, seed_offset: int = 0) -> Tuple[np.ndarray, ObservationMask]:
        """Corrupt ``y0``; ``seed_offset`` decorrelates segments sharing one spec."""
        seed = self.rng_seed + seed_offset
        if self.kind == "clip":
            return clip(y0, self.clip_level)
        if self.kind == "random_missing":
            return random_missing(y0, self.missing_rate, seed)
        if self.kind == "additive_noise":
            y = add_noise(y0, self.noise_std, seed)
            return y, ObservationMask.full(y.size)
        y = np.array(y0, dtype=float)
        return y, ObservationMask.full(y.size)


def clip(y0, c: float) -> Tuple[np.ndarray, ObservationMask]:
    """Saturate at ``+-c``; samples with ``|y0| > c`` become unobserved."""
    if not c > 0:
        raise ParameterError("clip level must be positive")
    y0 = np.asarray(y0, dtype=float)
    y = np.clip(y0, -c, c)
    return y, ObservationMask((y0 >= -c) & (y0 <= c))


def random_missing(y0, rate: float, seed: int) -> Tuple[np.ndarray, ObservationMask]:
    """Drop exactly ``floor(rate * N)`` samples chosen uniformly without replacement.

    Dropped samples are zeroed in the returned signal.
    """
    y0 = np.asarray(y0, dtype=float)
    if not 0 <= rate < 1:
        raise ParameterError("missing rate must lie in [0, 1)")
    n = y0.size
    n_missing = int(np.floor(rate * n))
    if n - n_missing < 2:
        raise ParameterError(f"rate {rate} leaves fewer than 2 observed samples")
    rng = np.random.default_rng(seed)
    missing = rng.choice(n, size=n_missing, replace=False)
    observed = np.ones(n, dtype=bool)
    observed[missing] = False
    return np.where(observed, y0, 0.0), ObservationMask(observed)


def add_noise(y0, std: float, seed: int) -> np.ndarray:
    if std < 0:
        raise ParameterError("noise std must be nonnegative")
    y0 = np.asarray(y0, dtype=float)
    if std == 0:
        return y0.copy()
    rng = np.random.default_rng(seed)
    return y0 + rng.normal(0.0, std, size=y0.size)
