"""Comparison reconstructors: quadratic-variation smoothing, natural cubic
spline interpolation, and masked OMP over a Gabor dictionary."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.interpolate
import scipy.linalg

from .exceptions import DimensionError, ParameterError, SolverError
from .model import as_mask


def qv_reconstruct(y, mask, lam: float) -> np.ndarray:
    """Exact minimizer of ``||P(y - x)||^2 + lam * sum (x[i+1] - x[i])^2``.

    Solves the tridiagonal system ``(P + lam L^T L) x = P y``.
    """
    y = np.asarray(y, dtype=float)
    mask = as_mask(mask, y.size)
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    n = y.size
    if mask.count == 0:
        raise SolverError("QV system is singular: no observed samples")
    if lam == 0:
        if mask.count < n:
            raise SolverError("QV system is singular: lambda=0 with missing samples")
        return y.copy()
    diag = mask.observed.astype(float)
    if n > 1:
        diag += lam * np.r_[1.0, np.full(n - 2, 2.0), 1.0]
    # upper form for solveh_banded: row 0 superdiagonal, row 1 diagonal
    banded = np.zeros((2, n))
    banded[0, 1:] = -lam
    banded[1] = diag
    try:
        return scipy.linalg.solveh_banded(banded, mask.project(y))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"QV system is singular: {exc}") from exc


def spline_reconstruct(y, mask) -> np.ndarray:
    """Natural cubic spline through the observed samples, evaluated at every index.

    Outside the first/last observed sample the boundary cubic piece is
    extended.
    """
    y = np.asarray(y, dtype=float)
    mask = as_mask(mask, y.size)
    if mask.count < 2:
        raise ParameterError("spline interpolation needs at least 2 observed samples")
    knots = np.flatnonzero(mask.observed)
    spline = scipy.interpolate.CubicSpline(knots, y[knots], bc_type="natural",
                                           extrapolate=True)
    out = spline(np.arange(y.size))
    out[knots] = y[knots]
    return out


@dataclass(frozen=True)
class GaborDictionary:
    n: int
    rho: float
    atoms: np.ndarray


def gabor_dictionary(n: int, rho: float = 2.0) -> GaborDictionary:
    """Gaussian-windowed cosines and sines, ``rho * n`` unit-norm atoms.

    Window: centered at the segment midpoint with standard deviation ``n/4``.
    Frequencies ``k / (rho * n)`` for ``k = 0 .. rho*n/2 - 1``, each with a
    cosine and a sine. The zero-frequency sine vanishes, so its slot holds
    the Nyquist cosine instead.
    """
    n_atoms = int(round(rho * n))
    if n < 2 or rho <= 0 or n_atoms < 2 or n_atoms % 2:
        raise ParameterError("need n >= 2 and rho * n an even integer >= 2")
    t = np.arange(n)
    window = np.exp(-0.5 * ((t - (n - 1) / 2) / (n / 4)) ** 2)
    freqs = np.arange(n_atoms // 2) / n_atoms
    phase = 2 * np.pi * np.outer(t, freqs)
    cos_atoms = window[:, None] * np.cos(phase)
    sin_atoms = window[:, None] * np.sin(phase)
    sin_atoms[:, 0] = window * np.cos(np.pi * t)
    atoms = np.empty((n, n_atoms))
    atoms[:, 0::2] = cos_atoms
    atoms[:, 1::2] = sin_atoms
    atoms /= np.linalg.norm(atoms, axis=0)
    return GaborDictionary(n=n, rho=rho, atoms=atoms)


@dataclass(frozen=True)
class SparseCode:
    support: Tuple[int, ...]
    coefficients: np.ndarray
    residual_norm_sq: float
    # masked residual energy after each added atom
    residual_history: Tuple[float, ...] = ()


def omp_reconstruct(y, mask, dictionary, epsilon: float = 1e-3,
                    max_atoms: Optional[int] = None) -> Tuple[np.ndarray, SparseCode]:
    """Orthogonal matching pursuit on the observed rows of ``dictionary``.

    Atoms are selected by ``|<r, P d>| / ||P d||``; the coefficients on the
    support are refit by least squares on the observed rows. Stops once
    ``||P(y - D w)||^2 <= epsilon`` or the support reaches ``max_atoms``
    (default ``ceil(n / 4)``). Returns the full-length synthesis ``D w``.
    """
    y = np.asarray(y, dtype=float)
    atoms = dictionary.atoms if isinstance(dictionary, GaborDictionary) else np.asarray(dictionary, dtype=float)
    if atoms.shape[0] != y.size:
        raise DimensionError(f"dictionary atoms have length {atoms.shape[0]}, signal {y.size}")
    mask = as_mask(mask, y.size)
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if mask.count == 0:
        raise ParameterError("observation set is empty")
    if max_atoms is None:
        max_atoms = math.ceil(y.size / 4)

    obs = mask.observed
    sub = atoms[obs]
    y_obs = y[obs]
    norms = np.linalg.norm(sub, axis=0)
    usable = norms > 1e-12 * max(norms.max(), 1e-300)
    if not usable.any():
        raise SolverError("no dictionary atom has support on the observed samples")
    inv_norms = np.where(usable, 1.0 / np.where(usable, norms, 1.0), 0.0)

    support: list[int] = []
    coef = np.zeros(0)
    residual = y_obs.copy()
    history = []
    res_sq = float(residual @ residual)
    available = usable.copy()
    while res_sq > epsilon and len(support) < max_atoms and available.any():
        scores = np.abs(residual @ sub) * inv_norms
        scores[~available] = -np.inf
        k = int(np.argmax(scores))
        support.append(k)
        available[k] = False
        coef = np.linalg.lstsq(sub[:, support], y_obs, rcond=None)[0]
        residual = y_obs - sub[:, support] @ coef
        res_sq = float(residual @ residual)
        history.append(res_sq)

    w = np.zeros(atoms.shape[1])
    w[support] = coef
    code = SparseCode(support=tuple(support), coefficients=coef,
                      residual_norm_sq=res_sq, residual_history=tuple(history))
    return atoms @ w, code
