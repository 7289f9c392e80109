"""Rank-1 signal model ``x = H^dagger(sigma * a b^T)`` and its objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .embedding import EmbeddingGeometry, inverse_embed_rank1
from .exceptions import DimensionError, ParameterError


@dataclass(frozen=True)
class ObservationMask:
    """Observation set as a boolean vector; ``observed[k]`` is true when sample k is known."""

    observed: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool)
        if obs.ndim != 1:
            raise DimensionError("mask must be one-dimensional")
        object.__setattr__(self, "observed", obs)

    @classmethod
    def full(cls, n: int) -> "ObservationMask":
        return cls(np.ones(n, dtype=bool))

    @property
    def n(self) -> int:
        return self.observed.size

    @property
    def count(self) -> int:
        return int(self.observed.sum())

    def project(self, v) -> np.ndarray:
        """Zero the unobserved entries of ``v``."""
        return np.where(self.observed, v, 0.0)


def as_mask(mask, n: Optional[int] = None) -> ObservationMask:
    if mask is None:
        if n is None:
            raise DimensionError("mask length unknown")
        return ObservationMask.full(n)
    if not isinstance(mask, ObservationMask):
        mask = ObservationMask(mask)
    if n is not None and mask.n != n:
        raise DimensionError(f"mask length {mask.n} != signal length {n}")
    return mask


@dataclass(frozen=True)
class Hyperparams:
    """Smoothness weights actually used by the objective.

    ``lambda1``/``lambda2`` are the unscaled user-facing values when the
    weights came from :func:`scale_hyperparameters`; they are ``None`` when
    ``lambda_a``/``lambda_b`` were given directly.
    """

    lambda_a: float
    lambda_b: float
    tau: Optional[int] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None

    def __post_init__(self):
        if self.lambda_a < 0 or self.lambda_b < 0:
            raise ParameterError("smoothness weights must be nonnegative")


def scale_hyperparameters(lambda1: float, lambda2: float, mask,
                          geometry: EmbeddingGeometry) -> Hyperparams:
    """Scale by the observed fraction and factor length:
    ``lambda_a = lambda1 |Omega| / (T N)``, ``lambda_b = lambda2 |Omega| / (tau N)``.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ParameterError("lambda1 and lambda2 must be nonnegative")
    mask = as_mask(mask, geometry.n)
    n_obs = mask.count
    if n_obs == 0:
        raise ParameterError("observation set is empty")
    return Hyperparams(
        lambda_a=lambda1 * n_obs / (geometry.t_rows * geometry.n),
        lambda_b=lambda2 * n_obs / (geometry.tau * geometry.n),
        tau=geometry.tau,
        lambda1=lambda1,
        lambda2=lambda2,
    )


class DifferenceOperator:
    """First differences ``(Lv)[i] = v[i+1] - v[i]`` on vectors of length ``size``."""

    def __init__(self, size: int):
        self.size = size

    def apply(self, v) -> np.ndarray:
        return np.diff(v)

    def adjoint(self, w) -> np.ndarray:
        # L^T w = [-w_0, w_0 - w_1, ..., w_{m-2}]
        w = np.asarray(w, dtype=float)
        out = np.zeros(self.size)
        out[:-1] -= w
        out[1:] += w
        return out

    def gram(self, v) -> np.ndarray:
        """``L^T L v`` (the path-graph Laplacian)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        if v.size > 1:
            d = np.diff(v)
            out[:-1] -= d
            out[1:] += d
        return out

    def penalty(self, v) -> float:
        d = np.diff(v)
        return float(d @ d)


@dataclass(frozen=True)
class Rank1Model:
    a: np.ndarray
    b: np.ndarray
    sigma: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        EmbeddingGeometry.from_factors(a.size, b.size)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def geometry(self) -> EmbeddingGeometry:
        return EmbeddingGeometry.from_factors(self.a.size, self.b.size)


def reconstruct(model: Rank1Model) -> np.ndarray:
    return model.sigma * inverse_embed_rank1(model.a, model.b)


def data_fit(model: Rank1Model, y, mask) -> float:
    """Masked squared residual ``||P(y - x)||^2``."""
    y = np.asarray(y, dtype=float)
    mask = as_mask(mask, y.size)
    r = mask.project(y - reconstruct(model))
    return float(r @ r)


def objective(model: Rank1Model, y, mask, hp: Hyperparams) -> float:
    y = np.asarray(y, dtype=float)
    geometry = model.geometry
    if y.shape != (geometry.n,):
        raise DimensionError(f"signal length {y.size} != model length {geometry.n}")
    mask = as_mask(mask, geometry.n)
    if mask.count == 0:
        raise ParameterError("objective undefined on an empty observation set")
    fit = data_fit(model, y, mask)
    penalty_a = DifferenceOperator(geometry.t_rows).penalty(model.a)
    penalty_b = DifferenceOperator(geometry.tau).penalty(model.b)
    return fit + hp.lambda_a * penalty_a + hp.lambda_b * penalty_b
