"""Epsilon-support vector regression with an RBF kernel, trained by SMO.

The dual is solved in the usual 2n-variable form (one ``alpha`` and one
``alpha*`` per row)::

    min_a  1/2 a^T Q a + p^T a   s.t.  z^T a = 0,  0 <= a <= C

with ``z = (+1..., -1...)``, ``p = (eps - y, eps + y)`` and
``Q_tu = z_t z_u K(x_t, x_u)``. Each step updates the maximal violating
pair; ties go to the lowest index. The returned coefficients are
``beta_i = alpha_i - alpha*_i`` and predictions are
``f(x) = sum_i beta_i K(x_i, x) + b``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IterationLimit, NonFiniteInput

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 200_000
TAU = 1e-12


@dataclass(frozen=True)
class SvrModel:
    beta: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon: float
    support_rows: np.ndarray
    converged: bool = True
    n_iter: int = 0
    kkt_gap: float = 0.0

    def predict(self, X_new) -> np.ndarray:
        return predict_svr(self, X_new)

    def dual_objective(self, y) -> float:
        K = rbf_kernel(self.support_rows, self.support_rows, self.gamma)
        return dual_objective(self.beta, K, np.asarray(y, dtype=float), self.epsilon)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def scale_gamma(X: np.ndarray) -> float:
    """``1 / (n_features * X.var())``, falling back to ``1 / n_features``."""
    d = X.shape[1]
    var = float(X.var()) if X.size else 0.0
    return 1.0 / (d * var) if var > 0 else 1.0 / d


def dual_objective(beta: np.ndarray, K: np.ndarray, y: np.ndarray, epsilon: float) -> float:
    """Maximization form: ``-1/2 b^T K b - eps * sum|b| + y^T b``."""
    return float(-0.5 * beta @ K @ beta - epsilon * np.abs(beta).sum() + y @ beta)


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = y.shape[0]
    m = 2 * n
    alpha = np.zeros(m)
    z = np.empty(m)
    grad = np.empty(m)
    for t in range(n):
        z[t] = 1.0
        z[t + n] = -1.0
        grad[t] = eps - y[t]
        grad[t + n] = eps + y[t]

    it = 0
    gap = math.inf
    while True:
        # maximal violating pair: i from I_up maximizing -z*G, j from I_low minimizing it
        i = -1
        j = -1
        g_max = -math.inf
        g_min = math.inf
        for t in range(m):
            v = -z[t] * grad[t]
            if z[t] > 0:
                up = alpha[t] < C
                low = alpha[t] > 0.0
            else:
                up = alpha[t] > 0.0
                low = alpha[t] < C
            if up and v > g_max:
                g_max = v
                i = t
            if low and v < g_min:
                g_min = v
                j = t
        gap = g_max - g_min
        if i < 0 or j < 0 or gap < tol or it >= max_iter:
            break
        it += 1

        ii = i % n
        jj = j % n
        Kii = K[ii, ii]
        Kjj = K[jj, jj]
        Kij = K[ii, jj]
        ai_old = alpha[i]
        aj_old = alpha[j]
        # curvature along the pair direction is the same for both sign cases
        quad = Kii + Kjj - 2.0 * Kij
        if quad <= 0.0:
            quad = TAU
        if z[i] != z[j]:
            # keep alpha_i - alpha_j fixed
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0.0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = total

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        zi = z[i]
        zj = z[j]
        for t in range(m):
            tt = t % n
            grad[t] += z[t] * (zi * K[tt, ii] * dai + zj * K[tt, jj] * daj)

    # bias from free variables, else midpoint of the feasible interval
    ub = math.inf
    lb = -math.inf
    n_free = 0
    s_free = 0.0
    for t in range(m):
        yg = z[t] * grad[t]
        if alpha[t] >= C:
            if z[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0.0:
            if z[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    if n_free > 0:
        rho = s_free / n_free
    else:
        rho = (ub + lb) / 2.0

    beta = alpha[:n] - alpha[n:]
    return beta, -rho, it, gap


def fit_svr(
    X,
    y,
    C: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
    gamma: float | str = "scale",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvrModel:
    """Fit epsilon-SVR on (already standardized) ``X``.

    ``gamma="scale"`` uses ``1 / (n_features * X.var())``; a number fixes it.
    If ``max_iter`` is reached the best-so-far model is returned with
    ``converged=False`` and an :class:`IterationLimit` warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if X.shape[0] < 1:
        raise DimensionMismatch("no training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("X and y must be finite")
    if C <= 0 or epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    g = scale_gamma(X) if gamma == "scale" else float(gamma)
    if not g > 0:
        raise ValueError("gamma must be positive")
    K = rbf_kernel(X, X, g)
    beta, bias, n_iter, gap = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    converged = bool(gap < tol)
    if not converged:
        warnings.warn(IterationLimit(f"SMO stopped after {n_iter} iterations (gap {gap:.3g})"), stacklevel=2)
    X = X.copy()
    X.setflags(write=False)
    beta.setflags(write=False)
    return SvrModel(beta, float(bias), g, float(C), float(epsilon), X, converged, int(n_iter), float(gap))


def predict_svr(m: SvrModel, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    if X_new.shape[1] != m.support_rows.shape[1]:
        raise DimensionMismatch(f"expected {m.support_rows.shape[1]} features, got {X_new.shape[1]}")
    return rbf_kernel(X_new, m.support_rows, m.gamma) @ m.beta + m.bias
