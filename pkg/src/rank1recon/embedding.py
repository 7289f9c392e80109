"""Delay embedding (Hankelization), its anti-diagonal-averaging inverse, and
the convolutional form of the inverse applied to a rank-1 matrix.

Indices are zero-based throughout. For a signal of length ``n`` and window
``tau`` the embedded matrix has ``t_rows = n + tau - 1`` rows and ``tau``
columns; cell ``(i, j)`` maps to signal index ``i + j - (tau - 1)``. Cells
whose mapped index falls outside ``[0, n)`` are the undefined corners.

The selector tensor linking the factor pair ``(a, b)`` to the signal is never
built. Every product with it is a valid convolution, a full convolution, or
a valid correlation, each O(n * tau).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError


@dataclass(frozen=True)
class EmbeddingGeometry:
    """Sizes tying the signal space to the embedded space."""

    n: int
    tau: int

    def __post_init__(self):
        if not (1 <= self.tau <= self.n):
            raise DimensionError(
                f"window tau={self.tau} must lie in [1, n={self.n}]")

    @property
    def t_rows(self) -> int:
        return self.n + self.tau - 1

    @classmethod
    def from_factors(cls, a_len: int, b_len: int) -> "EmbeddingGeometry":
        """Recover the geometry from factor lengths ``T`` and ``tau``."""
        n = a_len - b_len + 1
        if b_len < 1 or n < b_len:
            raise DimensionError(
                f"factor lengths T={a_len}, tau={b_len} match no geometry "
                "(need T >= 2*tau - 1)")
        return cls(n=n, tau=b_len)


@dataclass(frozen=True)
class EmbeddedMatrix:
    """A ``t_rows x tau`` matrix plus the mask of cells that map into the signal.

    Undefined corner cells hold 0 and must never be read.
    """

    geometry: EmbeddingGeometry
    values: np.ndarray
    defined_mask: np.ndarray


def band_mask(geometry: EmbeddingGeometry) -> np.ndarray:
    """Boolean ``t_rows x tau`` mask, true where a cell maps into ``[0, n)``."""
    i = np.arange(geometry.t_rows)[:, None]
    j = np.arange(geometry.tau)[None, :]
    idx = i + j - (geometry.tau - 1)
    return (idx >= 0) & (idx < geometry.n)


def delay_embed(y, tau: int) -> EmbeddedMatrix:
    """Hankelize ``y`` with window ``tau``.

    Row ``i`` holds the window ending at signal index ``i``; the top-left and
    bottom-right triangles are undefined.

    >>> delay_embed([7.0, -2.0], 1).values.ravel().tolist()
    [7.0, -2.0]
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError("signal must be one-dimensional")
    geometry = EmbeddingGeometry(n=y.size, tau=tau)
    defined = band_mask(geometry)
    padded = np.concatenate([np.zeros(tau - 1), y, np.zeros(tau - 1)])
    # cell (i, j) reads padded[i + j]
    values = np.lib.stride_tricks.sliding_window_view(padded, tau).copy()
    values[~defined] = 0.0
    return EmbeddedMatrix(geometry=geometry, values=values, defined_mask=defined)


def inverse_delay_embed(X, geometry: EmbeddingGeometry) -> np.ndarray:
    """Average the anti-diagonals of ``X`` that fall inside the band.

    ``out[k] = (1/tau) * sum_j X[k + tau - 1 - j, j]``. Corner cells are not
    touched.
    """
    X = np.asarray(X.values if isinstance(X, EmbeddedMatrix) else X, dtype=float)
    if X.shape != (geometry.t_rows, geometry.tau):
        raise DimensionError(
            f"matrix shape {X.shape} does not match "
            f"({geometry.t_rows}, {geometry.tau})")
    tau = geometry.tau
    # flip columns so anti-diagonals become diagonals
    flipped = X[:, ::-1]
    k = np.arange(geometry.n)
    out = np.zeros(geometry.n)
    for col in range(tau):
        # flipped[k + col, col] == X[k + col, tau - 1 - col]
        out += flipped[k + col, col]
    return out / tau


def _check_pair(a: np.ndarray, b: np.ndarray) -> EmbeddingGeometry:
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError("factors must be one-dimensional")
    return EmbeddingGeometry.from_factors(a.size, b.size)


def inverse_embed_rank1(a, b) -> np.ndarray:
    """Inverse embedding of ``a b^T``, computed as ``valid(a * b) / tau``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_pair(a, b)
    return np.convolve(a, b, mode="valid") / b.size


def adjoint_wrt_a(r, b) -> np.ndarray:
    """Adjoint of ``a -> inverse_embed_rank1(a, b)``; returns a length-T vector."""
    r = np.asarray(r, dtype=float)
    b = np.asarray(b, dtype=float)
    if r.ndim != 1 or b.ndim != 1:
        raise DimensionError("inputs must be one-dimensional")
    if b.size < 1 or r.size < b.size:
        raise DimensionError(
            f"residual length {r.size} incompatible with window {b.size}")
    return np.convolve(r, b[::-1], mode="full") / b.size


def adjoint_wrt_b(r, a) -> np.ndarray:
    """Adjoint of ``b -> inverse_embed_rank1(a, b)``; returns a length-tau vector."""
    r = np.asarray(r, dtype=float)
    a = np.asarray(a, dtype=float)
    if r.ndim != 1 or a.ndim != 1:
        raise DimensionError("inputs must be one-dimensional")
    tau = a.size - r.size + 1
    if tau < 1 or r.size < tau:
        raise DimensionError(
            f"residual length {r.size} incompatible with factor length {a.size}")
    return np.correlate(a, r, mode="valid")[::-1] / tau


def inverse_embed_rank1_fft(a, b) -> np.ndarray:
    """FFT route to :func:`inverse_embed_rank1`, for long factors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    geometry = _check_pair(a, b)
    size = a.size + b.size - 1
    nfft = 1 << (size - 1).bit_length()
    full = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:size]
    start = geometry.tau - 1
    return full[start:start + geometry.n] / geometry.tau
