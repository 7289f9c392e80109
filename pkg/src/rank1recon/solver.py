"""Alternating least squares for the rank-1 model, plus Monte-Carlo restarts.

Each factor update solves a regularized normal equation. The left operator
for ``a`` is::

    v -> sigma^2 * M_b^T P M_b v + lambda_a * L^T L v

where ``M_b v = inverse_embed_rank1(v, b)`` and ``P`` zeroes unobserved
samples; the right-hand side is ``sigma * M_b^T P y``. The update for ``b``
mirrors it with the roles of the factors swapped.

Large systems are solved by matrix-free conjugate gradient. When the factor
is short (``T <= direct_max_size``) the normal matrix is assembled from the
Toeplitz structure of the convolution and factored directly, which is much
faster for the poorly conditioned systems small smoothness weights produce.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft
import scipy.linalg

from .cg import CGResult, conjugate_gradient
from .embedding import (EmbeddingGeometry, adjoint_wrt_a, adjoint_wrt_b,
                        inverse_embed_rank1)
from .exceptions import (CGConvergenceWarning, DegenerateModelError,
                         ParameterError, SolverError)
from .model import (DifferenceOperator, Hyperparams, Rank1Model, as_mask,
                    objective)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 1000
    outer_tol: float = 1e-9
    cg_tol: float = 1e-10
    cg_max_iters: Optional[int] = None
    restarts_k: int = 1
    rng_seed: int = 0
    # "cg" (matrix-free), "direct" (assembled normal matrix), or "auto"
    linear_solver: str = "auto"
    direct_max_size: int = 512

    def __post_init__(self):
        if self.linear_solver not in ("auto", "cg", "direct"):
            raise ParameterError(f"unknown linear_solver {self.linear_solver!r}")
        if self.outer_tol <= 0 or self.cg_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.restarts_k < 1:
            raise ParameterError("iteration and restart counts must be >= 1")
        if self.cg_max_iters is not None and self.cg_max_iters < 1:
            raise ParameterError("cg_max_iters must be >= 1")

    def use_direct(self, geometry: EmbeddingGeometry) -> bool:
        if self.linear_solver == "auto":
            return geometry.t_rows <= self.direct_max_size
        return self.linear_solver == "direct"

    def cg_cap(self, geometry: EmbeddingGeometry) -> int:
        if self.cg_max_iters is not None:
            return self.cg_max_iters
        return min(10 * max(geometry.t_rows, geometry.tau), 2000)


@dataclass
class SolverReport:
    objective_trajectory: np.ndarray
    final_model: Rank1Model
    restart_index: int = 0
    converged: bool = False
    iterations_used: int = 0
    degenerate: bool = False
    cg_failures: int = 0
    restart_objectives: Tuple[float, ...] = ()
    restart_trajectories: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    restart_degenerate: Tuple[bool, ...] = ()

    @property
    def objective(self) -> float:
        return float(self.objective_trajectory[-1])


def _conv_matrix_in_a(b: np.ndarray, n: int) -> np.ndarray:
    """``N x T`` matrix of ``a -> inverse_embed_rank1(a, b)``."""
    tau = b.size
    first_row = np.zeros(n + tau - 1)
    first_row[:tau] = b[::-1]
    first_col = np.zeros(n)
    first_col[0] = b[-1]
    return scipy.linalg.toeplitz(first_col, first_row) / tau


def _conv_matrix_in_b(a: np.ndarray, tau: int) -> np.ndarray:
    """``N x tau`` matrix of ``b -> inverse_embed_rank1(a, b)``."""
    return np.lib.stride_tricks.sliding_window_view(a, tau)[:, ::-1] / tau


def _dense_solve(design: np.ndarray, sigma: float, lam: float,
                 y_obs: np.ndarray) -> np.ndarray:
    rhs = sigma * (design.T @ y_obs)
    gram = (sigma * sigma) * (design.T @ design)
    m = gram.shape[0]
    if m > 1 and lam:
        idx = np.arange(m)
        gram[idx, idx] += lam * np.r_[1.0, np.full(m - 2, 2.0), 1.0]
        gram[idx[:-1], idx[1:]] -= lam
        gram[idx[1:], idx[:-1]] -= lam
    try:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram, check_finite=False),
                                   rhs, check_finite=False)
    except np.linalg.LinAlgError:
        # semidefinite: take the minimum-norm solution
        x = scipy.linalg.lstsq(gram, rhs)[0]
    # normwise backward error: stays near machine precision for consistent
    # singular systems, unlike the residual relative to ||rhs||
    scale = np.linalg.norm(gram, 1) * np.linalg.norm(x) + np.linalg.norm(rhs)
    backward = np.linalg.norm(rhs - gram @ x) / scale if scale > 0 else 0.0
    if not np.isfinite(backward) or backward > 1e-8:
        raise SolverError(f"normal equation solve failed (backward error {backward:.2e})")
    return x


def _laplacian_eigenvalues(m: int) -> np.ndarray:
    """Eigenvalues of ``L^T L`` for the path graph; eigenvectors are the DCT-II basis."""
    return 4.0 * np.sin(np.pi * np.arange(m) / (2 * m)) ** 2


def _dual_solve(design: np.ndarray, rho: float, t: np.ndarray) -> np.ndarray:
    """Minimize ``||D x - t||^2 + rho ||L x||^2`` through an |Omega|-sized system.

    In DCT-II coordinates ``z`` the penalty is diagonal, ``rho * mu_k z_k^2``,
    with ``mu_0 = 0`` for the constant mode. The penalized modes are
    eliminated by the push-through identity, leaving
    ``W = (I + E_r Lambda_r^{-1} E_r^T)^{-1}`` on the observed rows and a
    scalar weighted least-squares problem for the constant mode.
    """
    m = design.shape[1]
    coeffs = scipy.fft.dct(design, type=2, norm="ortho", axis=1)
    e0, rest = coeffs[:, 0], coeffs[:, 1:]
    inv_pen = 1.0 / (rho * _laplacian_eigenvalues(m)[1:])
    scaled = rest * inv_pen
    kernel = scaled @ rest.T
    kernel[np.diag_indices_from(kernel)] += 1.0
    factor = scipy.linalg.cho_factor(kernel, check_finite=False)
    w_t = scipy.linalg.cho_solve(factor, t, check_finite=False)
    w_e0 = scipy.linalg.cho_solve(factor, e0, check_finite=False)
    curvature = e0 @ w_e0
    # constant mode invisible on the observed rows: minimum-norm choice
    z0 = (e0 @ w_t) / curvature if curvature > 1e-14 * (t @ t + 1.0) else 0.0
    v = w_t - z0 * w_e0
    z = np.empty(m)
    z[0] = z0
    z[1:] = scaled.T @ v
    return scipy.fft.idct(z, type=2, norm="ortho")


def _direct_solve(design: np.ndarray, sigma: float, lam: float, y_obs: np.ndarray,
                  ) -> CGResult:
    """Solve ``(sigma^2 D^T D + lam L^T L) x = sigma D^T y`` with ``D`` the observed rows."""
    if sigma == 0.0 or not np.any(design.T @ y_obs):
        return CGResult(np.zeros(design.shape[1]), True, 0, 0.0)
    m_obs, m = design.shape
    if lam > 0 and m > 1 and 2 * m_obs <= m:
        return CGResult(_dual_solve(design, lam / sigma**2, y_obs / sigma), True, 0, 0.0)
    return CGResult(_dense_solve(design, sigma, lam, y_obs), True, 0, 0.0)


def _solve_a(model: Rank1Model, y, mask, hp: Hyperparams,
             config: SolverConfig) -> CGResult:
    a, b, sigma = model.a, model.b, model.sigma
    observed = mask.observed
    if config.use_direct(model.geometry):
        design = _conv_matrix_in_a(b, y.size)[observed]
        return _direct_solve(design, sigma, hp.lambda_a, y[observed])
    diff = DifferenceOperator(a.size)

    def matvec(v):
        r = inverse_embed_rank1(v, b)
        r[~observed] = 0.0
        return sigma * sigma * adjoint_wrt_a(r, b) + hp.lambda_a * diff.gram(v)

    rhs = sigma * adjoint_wrt_a(mask.project(y), b)
    return conjugate_gradient(matvec, rhs, x0=a, tol=config.cg_tol,
                              max_iters=config.cg_cap(model.geometry))


def _solve_b(model: Rank1Model, y, mask, hp: Hyperparams,
             config: SolverConfig) -> CGResult:
    a, b, sigma = model.a, model.b, model.sigma
    observed = mask.observed
    if config.use_direct(model.geometry):
        design = _conv_matrix_in_b(a, b.size)[observed]
        return _direct_solve(design, sigma, hp.lambda_b, y[observed])
    diff = DifferenceOperator(b.size)

    def matvec(v):
        r = inverse_embed_rank1(a, v)
        r[~observed] = 0.0
        return sigma * sigma * adjoint_wrt_b(r, a) + hp.lambda_b * diff.gram(v)

    rhs = sigma * adjoint_wrt_b(mask.project(y), a)
    return conjugate_gradient(matvec, rhs, x0=b, tol=config.cg_tol,
                              max_iters=config.cg_cap(model.geometry))


def _warn_if_unconverged(result: CGResult, name: str) -> None:
    if not result.converged:
        warnings.warn(
            f"CG for {name} stopped after {result.iterations} iterations at "
            f"relative residual {result.relative_residual:.3e}",
            CGConvergenceWarning, stacklevel=3)


def update_a(model: Rank1Model, y, mask, hp: Hyperparams,
             config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Unnormalized minimizer of the objective over ``a`` with ``b``, ``sigma`` fixed.

    Warns with :class:`CGConvergenceWarning` and returns the best iterate
    if CG hits its iteration cap.
    """
    y = np.asarray(y, dtype=float)
    result = _solve_a(model, y, as_mask(mask, y.size), hp, config)
    _warn_if_unconverged(result, "a")
    return result.x


def update_b(model: Rank1Model, y, mask, hp: Hyperparams,
             config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Unnormalized minimizer over ``b``; see :func:`update_a`."""
    y = np.asarray(y, dtype=float)
    result = _solve_b(model, y, as_mask(mask, y.size), hp, config)
    _warn_if_unconverged(result, "b")
    return result.x


def update_sigma(model: Rank1Model, y, mask) -> float:
    """Least-squares scale ``<y, Pz> / ||Pz||^2`` with ``z`` the unit-scale reconstruction."""
    y = np.asarray(y, dtype=float)
    mask = as_mask(mask, y.size)
    z = mask.project(inverse_embed_rank1(model.a, model.b))
    energy = z @ z
    if energy <= np.finfo(float).tiny:
        raise DegenerateModelError(
            "reconstruction vanishes on every observed sample")
    return float(y @ z) / energy


def _normalize(v: np.ndarray, name: str) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise ParameterError(f"initial {name} must be a nonzero finite vector")
    return v / norm


def _project(update: np.ndarray, previous: np.ndarray, sigma: float) -> np.ndarray:
    """Normalize a factor update, handling the all-zero solution.

    With ``sigma == 0`` the subproblem is penalty-only and its minimizers on
    the unit sphere are the constant vectors. Any other zero update keeps
    the previous factor.
    """
    if np.any(update):
        return update / np.linalg.norm(update)
    if sigma == 0.0:
        sign = -1.0 if previous.sum() < 0 else 1.0
        return np.full(previous.size, sign / np.sqrt(previous.size))
    return previous


def _converged(previous: float, current: float, tol: float) -> bool:
    scale = max(abs(previous), abs(current))
    if scale == 0.0:
        return True
    return abs(previous - current) <= tol * scale


def als_solve(y, mask, hp: Hyperparams, config: SolverConfig = SolverConfig(),
              init: Tuple[np.ndarray, np.ndarray] = None,
              tau: Optional[int] = None) -> SolverReport:
    """Run the alternating scheme from ``init = (a0, b0)``.

    Per iteration: update ``a``, normalize, update ``sigma``, update ``b``,
    normalize, update ``sigma``. The objective is recorded at the start and
    after every iteration. See :func:`_project` for updates that return
    exactly zero.
    """
    y = np.asarray(y, dtype=float)
    mask = as_mask(mask, y.size)
    if mask.count == 0:
        raise ParameterError("at least one observed sample is required")
    if init is None:
        if tau is None:
            tau = hp.tau
        if tau is None:
            raise ParameterError("either init or tau must be given")
        init = gaussian_init(EmbeddingGeometry(y.size, tau),
                             np.random.default_rng(config.rng_seed))
    a = _normalize(np.asarray(init[0], dtype=float), "a")
    b = _normalize(np.asarray(init[1], dtype=float), "b")
    model = Rank1Model(a, b, 0.0)
    if model.geometry.n != y.size:
        raise ParameterError(
            f"init factors imply signal length {model.geometry.n}, got {y.size}")

    def report(trajectory, converged, iterations, degenerate=False, failures=0):
        return SolverReport(
            objective_trajectory=np.asarray(trajectory),
            final_model=model,
            converged=converged,
            iterations_used=iterations,
            degenerate=degenerate,
            cg_failures=failures,
            restart_objectives=(trajectory[-1],),
            restart_trajectories=(np.asarray(trajectory),),
            restart_degenerate=(degenerate,),
        )

    try:
        model = Rank1Model(a, b, update_sigma(model, y, mask))
    except DegenerateModelError:
        return report([objective(model, y, mask, hp)], False, 0, degenerate=True)

    trajectory = [objective(model, y, mask, hp)]
    failures = 0
    for it in range(1, config.max_outer_iters + 1):
        try:
            result = _solve_a(model, y, mask, hp, config)
            failures += not result.converged
            model = Rank1Model(_project(result.x, model.a, model.sigma), model.b, model.sigma)
            model = Rank1Model(model.a, model.b, update_sigma(model, y, mask))

            result = _solve_b(model, y, mask, hp, config)
            failures += not result.converged
            model = Rank1Model(model.a, _project(result.x, model.b, model.sigma), model.sigma)
            model = Rank1Model(model.a, model.b, update_sigma(model, y, mask))
        except DegenerateModelError:
            logger.debug("restart abandoned at iteration %d: degenerate model", it)
            trajectory.append(objective(model, y, mask, hp))
            return report(trajectory, False, it, degenerate=True, failures=failures)

        trajectory.append(objective(model, y, mask, hp))
        if _converged(trajectory[-2], trajectory[-1], config.outer_tol):
            return report(trajectory, True, it, failures=failures)
    return report(trajectory, False, config.max_outer_iters, failures=failures)


def gaussian_init(geometry: EmbeddingGeometry,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Draw i.i.d. standard normal factors ``(a0, b0)`` (unnormalized)."""
    a0 = rng.standard_normal(geometry.t_rows)
    b0 = rng.standard_normal(geometry.tau)
    return a0, b0


def select_best(reports: Sequence[SolverReport]) -> int:
    """Index of the non-degenerate report with the lowest final objective.

    Ties go to the lowest index.
    """
    best = None
    for k, rep in enumerate(reports):
        if rep.degenerate:
            continue
        if best is None or rep.objective < reports[best].objective:
            best = k
    if best is None:
        raise DegenerateModelError("every restart degenerated")
    return best


def monte_carlo_solve(y, mask, hp: Hyperparams, config: SolverConfig = SolverConfig(),
                      tau: Optional[int] = None) -> SolverReport:
    """Run ``config.restarts_k`` seeded restarts and keep the lowest-objective one."""
    y = np.asarray(y, dtype=float)
    tau = hp.tau if tau is None else tau
    if tau is None:
        raise ParameterError("window tau must be given (argument or hp.tau)")
    geometry = EmbeddingGeometry(y.size, tau)
    rng = np.random.default_rng(config.rng_seed)
    inits = [gaussian_init(geometry, rng) for _ in range(config.restarts_k)]
    reports = [als_solve(y, mask, hp, config, init=init) for init in inits]
    best = select_best(reports)
    winner = reports[best]
    return SolverReport(
        objective_trajectory=winner.objective_trajectory,
        final_model=winner.final_model,
        restart_index=best,
        converged=winner.converged,
        iterations_used=winner.iterations_used,
        degenerate=False,
        cg_failures=sum(r.cg_failures for r in reports),
        restart_objectives=tuple(r.objective for r in reports),
        restart_trajectories=tuple(r.objective_trajectory for r in reports),
        restart_degenerate=tuple(r.degenerate for r in reports),
    )
