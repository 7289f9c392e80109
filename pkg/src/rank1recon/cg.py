"""Matrix-free conjugate gradient for symmetric positive (semi)definite systems."""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .exceptions import SolverError


class CGResult(NamedTuple):
    x: np.ndarray
    converged: bool
    iterations: int
    relative_residual: float


def conjugate_gradient(matvec: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
                       x0: np.ndarray | None = None, tol: float = 1e-10,
                       max_iters: int = 1000) -> CGResult:
    """Solve ``A x = rhs`` given ``matvec(v) = A v``.

    Stops when ``||rhs - A x|| <= tol * ||rhs||``. On hitting ``max_iters``
    the iterate with the smallest residual seen so far is returned with
    ``converged=False``. A zero right-hand side returns the zero vector,
    the minimum-norm solution even when ``A`` is singular.
    """
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return CGResult(np.zeros_like(rhs), True, 0, 0.0)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - matvec(x)
    rr = r @ r
    threshold = (tol * rhs_norm) ** 2
    best_x, best_rr = x.copy(), rr
    if rr <= threshold:
        return CGResult(x, True, 0, np.sqrt(rr) / rhs_norm)
    p = r.copy()
    for it in range(1, max_iters + 1):
        Ap = matvec(p)
        curvature = p @ Ap
        if not curvature > 0.0:
            raise SolverError(
                "conjugate gradient breakdown: operator is singular or "
                "indefinite along the search direction")
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if rr_new <= threshold:
            # the recursive residual drifts; confirm with the true one
            r = rhs - matvec(x)
            rr_new = r @ r
            if rr_new <= threshold:
                return CGResult(x, True, it, np.sqrt(rr_new) / rhs_norm)
            if rr_new < best_rr:
                best_x, best_rr = x.copy(), rr_new
            p = r.copy()
            rr = rr_new
            continue
        if rr_new < best_rr:
            best_x, best_rr = x.copy(), rr_new
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CGResult(best_x, False, max_iters, np.sqrt(best_rr) / rhs_norm)
