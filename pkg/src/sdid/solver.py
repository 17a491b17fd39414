"""
Simplex-constrained ridge regression

    min_w ||b - A w||^2 + zeta ||w||^2   s.t.  w >= 0, sum(w) = 1

solved by accelerated projected gradient (fixed step 1/L) from uniform
weights. The Frank-Wolfe duality gap bounds the objective error and is
the stopping rule. Periodically and at convergence the equality-constrained
problem on the current support is solved directly; that point replaces the
iterate when it stays on the simplex and does not raise the objective.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import ConvergenceError, SdidError

LOGGER = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_ITER = 50000
POLISH_EVERY = 50


def project_simplex(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = s} by sorting"""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - s
    index = np.nonzero(u * np.arange(1, n + 1) > cssv)[0][-1]
    shift = cssv[index] / (index + 1.0)
    return np.maximum(v - shift, 0.0)


@dataclass(frozen=True)
class SimplexSolution:
    weights: np.ndarray
    objective: float
    gap: float
    iterations: int
    polished: bool


def _objective(A, b, zeta, w):
    r = b - A @ w
    return float(r @ r + zeta * (w @ w))


def _gradient(A, b, zeta, w):
    return 2.0 * (A.T @ (A @ w - b)) + 2.0 * zeta * w


def _gap(grad, w):
    """Frank-Wolfe gap <grad, w> - min_i grad_i, an upper bound on f(w) - f*"""
    return float(grad @ w - grad.min())


def _polish(A, b, zeta, w):
    """Solve the KKT system on the current support; None when the result leaves the simplex"""
    support = np.flatnonzero(w > 0)
    k = support.size
    sub = A[:, support]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * (sub.T @ sub + zeta * np.eye(k))
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([2.0 * sub.T @ b, [1.0]])
    solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    candidate = np.zeros_like(w)
    candidate[support] = solution[:k]
    if np.any(candidate < -1e-12):
        return None
    candidate = np.maximum(candidate, 0.0)
    total = candidate.sum()
    if not np.isfinite(total) or total <= 0:
        return None
    return candidate / total


def solve_simplex_ridge_full(A: np.ndarray, b: np.ndarray, zeta: float, intercept: bool = False,
                             tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> SimplexSolution:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.size:
        raise SdidError(f"A has shape {A.shape} but b has length {b.size}")
    if A.shape[1] == 0:
        raise SdidError("No candidate columns to weight")
    if zeta < 0:
        raise SdidError(f"zeta must be nonnegative, got {zeta}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise SdidError("Weight program has missing or non-finite inputs")
    if intercept:
        A = A - A.mean(axis=0, keepdims=True)
        b = b - b.mean()

    n = A.shape[1]
    w = np.full(n, 1.0 / n)
    lipschitz = 2.0 * (np.linalg.norm(A, 2) ** 2 + zeta)
    if lipschitz == 0:
        return SimplexSolution(w, 0.0, 0.0, 0, False)
    if n == 1:
        return SimplexSolution(w, _objective(A, b, zeta, w), 0.0, 0, False)

    threshold = tol * max(1.0, _objective(A, b, zeta, w))
    step = 1.0 / lipschitz
    y = w.copy()
    momentum = 1.0
    value = _objective(A, b, zeta, w)
    gap = np.inf
    for iteration in range(1, max_iter + 1):
        grad_w = _gradient(A, b, zeta, w)
        gap = _gap(grad_w, w)
        if gap <= threshold:
            candidate = _polish(A, b, zeta, w)
            if candidate is not None:
                candidate_value = _objective(A, b, zeta, candidate)
                if candidate_value <= value:
                    candidate_gap = _gap(_gradient(A, b, zeta, candidate), candidate)
                    return SimplexSolution(candidate, candidate_value, candidate_gap, iteration, True)
            return SimplexSolution(w, value, gap, iteration, False)
        if iteration % POLISH_EVERY == 0:
            candidate = _polish(A, b, zeta, w)
            if candidate is not None:
                candidate_gap = _gap(_gradient(A, b, zeta, candidate), candidate)
                candidate_value = _objective(A, b, zeta, candidate)
                if candidate_gap <= threshold and candidate_value <= value + threshold:
                    return SimplexSolution(candidate, candidate_value, candidate_gap, iteration, True)

        w_next = project_simplex(y - step * _gradient(A, b, zeta, y))
        value_next = _objective(A, b, zeta, w_next)
        if value_next > value:
            # Adaptive restart of the momentum sequence
            momentum = 1.0
            y = w.copy()
            continue
        momentum_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))
        y = w_next + ((momentum - 1.0) / momentum_next) * (w_next - w)
        w, value, momentum = w_next, value_next, momentum_next

    raise ConvergenceError(
        f"Simplex ridge solver stopped after {max_iter} iterations with duality gap {gap:.3e} "
        f"(tolerance {threshold:.3e})",
        trace={"gap": gap, "iterations": max_iter},
        module="sdid",
    )


def solve_simplex_ridge(A: np.ndarray, b: np.ndarray, zeta: float, intercept: bool = False,
                        tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """Weights on the probability simplex minimizing ||b - A w||^2 + zeta ||w||^2"""
    solution = solve_simplex_ridge_full(A, b, zeta, intercept=intercept, tol=tol, max_iter=max_iter)
    weights = solution.weights
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise SdidError("Solver returned weights off the simplex")
    LOGGER.debug("Simplex ridge: %d columns, %d iterations, gap %.2e%s", weights.size, solution.iterations,
                 solution.gap, " (polished)" if solution.polished else "")
    return weights
