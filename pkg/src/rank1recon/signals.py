"""Synthetic test signals, reconstruction metrics, and the spectral check
that factor smoothness bounds a square-root-rescaled smoothness of the
reconstruction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import DimensionError, ParameterError

SNR_CAP_DB = 300.0


@dataclass(frozen=True)
class SignalSpec:
    """Parameters for :func:`generate`.

    ``frequency`` is in cycles/sample. For chirps it is the start frequency
    and ``chirp_rate`` the increase per sample. For wavelets ``width`` is the
    Gaussian envelope standard deviation (``inf`` gives a pure cosine) and
    ``center`` defaults to the midpoint.
    """

    kind: str = "sine"
    n: int = 128
    frequency: float = 1 / 32
    amplitude: float = 1.0
    phase: float = 0.0
    chirp_rate: float = 0.0
    width: float = 16.0
    center: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("sine", "wavelet", "chirp"):
            raise ParameterError(f"unknown signal kind {self.kind!r}")
        if self.n < 2:
            raise ParameterError("signal length must be at least 2")
        if not 0 < self.frequency < 0.5:
            raise ParameterError("frequency must lie in (0, 0.5) cycles/sample")
        if self.kind == "chirp":
            f_end = self.frequency + self.chirp_rate * (self.n - 1)
            if not 0 < f_end < 0.5:
                raise ParameterError("chirp leaves the (0, 0.5) frequency band")
        if self.kind == "wavelet" and not self.width > 0:
            raise ParameterError("wavelet width must be positive")


def generate(spec: SignalSpec) -> np.ndarray:
    t = np.arange(spec.n, dtype=float)
    if spec.kind == "sine":
        return spec.amplitude * np.sin(2 * np.pi * spec.frequency * t + spec.phase)
    if spec.kind == "chirp":
        return spec.amplitude * np.sin(
            2 * np.pi * (spec.frequency * t + 0.5 * spec.chirp_rate * t**2) + spec.phase)
    center = (spec.n - 1) / 2 if spec.center is None else spec.center
    shifted = t - center
    envelope = np.exp(-shifted**2 / (2 * spec.width**2)) if math.isfinite(spec.width) else 1.0
    return spec.amplitude * envelope * np.cos(2 * np.pi * spec.frequency * shifted + spec.phase)


def snr_db(x0, x_hat) -> float:
    """``10 log10(||x0||^2 / ||x0 - x_hat||^2)``, capped at 300 dB for exact recovery."""
    x0 = np.asarray(x0, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x0.shape != x_hat.shape:
        raise DimensionError("reference and estimate differ in length")
    ref = float(x0 @ x0)
    if ref == 0.0:
        raise ParameterError("SNR undefined for a zero reference")
    err = float((x0 - x_hat) @ (x0 - x_hat))
    if err == 0.0:
        return SNR_CAP_DB
    return min(10.0 * math.log10(ref / err), SNR_CAP_DB)


def mse(x0, x_hat) -> float:
    x0 = np.asarray(x0, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x0.shape != x_hat.shape:
        raise DimensionError("reference and estimate differ in length")
    d = x0 - x_hat
    return float(d @ d) / d.size


def circular_difference(v) -> np.ndarray:
    """Circular convolution with the kernel ``[-1, 1, 0, ..., 0]``: ``v[k-1] - v[k]``."""
    v = np.asarray(v, dtype=float)
    return np.roll(v, 1) - v


def soft_smoothness_gap(a, b) -> Tuple[float, float]:
    """Both sides of the factor-smoothness bound for circular signals.

    ``lhs = ||l (*) a||^2 + ||l (*) b||^2`` computed in the time domain.
    ``rhs = 2 sum_k |l~_k|^2 |x~_k|`` with ``x~ = a~ . b~`` the product of
    the orthonormal DFTs of ``a`` and ``b`` and ``l~`` the DFT multiplier of
    the difference kernel. ``lhs >= rhs`` always holds.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise DimensionError("factors must be 1-D vectors of equal length")
    da = circular_difference(a)
    db = circular_difference(b)
    lhs = float(da @ da + db @ db)
    kernel = np.zeros(a.size)
    kernel[0] -= 1.0
    kernel[1 % a.size] += 1.0  # wraps to a zero kernel when size is 1
    l_spec = np.fft.fft(kernel)
    x_spec = np.fft.fft(a, norm="ortho") * np.fft.fft(b, norm="ortho")
    rhs = float(2.0 * np.sum(np.abs(l_spec) ** 2 * np.abs(x_spec)))
    return lhs, rhs
