"""Epsilon-insensitive support vector regression trained by SMO.

The dual is solved in its doubled form over ``a = [alpha; alpha*]``::

    min  1/2 a^T Q a + p^T a
    s.t. sum_t s_t a_t = 0,  0 <= a_t <= C

with signs ``s = [+1]*n + [-1]*n``, ``Q[u, v] = s_u s_v K(x_u, x_v)`` and
``p = [eps - y; eps + y]``. Each step optimizes the maximal-violating pair
with second-order selection of the partner, as in LIBSVM (Fan, Chen & Lin,
2005). The fitted function is ``f(x) = sum_i beta_i K(x_i, x) + bias`` with
``beta = alpha - alpha*``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

logger = logging.getLogger(__name__)

KKT_TOL = 1e-3
MAX_ITER = 10_000
DEFAULT_EPSILON = 0.1
_TAU = 1e-12


def kernel_matrix(A, B, kernel: str, gamma: float | None = None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@numba.njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter, order):
    n = y.shape[0]
    l = 2 * n
    a = np.zeros(l)
    G = np.empty(l)
    s = np.empty(l)
    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]

    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator among the variables that can move "up".
        gmax = -np.inf
        i = -1
        for r in range(l):
            t = order[r]
            if s[t] > 0:
                if a[t] < C and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            else:
                if a[t] > 0 and G[t] >= gmax:
                    gmax = G[t]
                    i = t
        # j: second-order choice among the variables that can move "down".
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        ki = i % n if i >= 0 else 0
        for r in range(l):
            t = order[r]
            kt = t % n
            if s[t] > 0:
                if a[t] > 0:
                    diff = gmax + G[t]
                    if G[t] >= gmax2:
                        gmax2 = G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = _TAU
                        od = -(diff * diff) / quad
                        if od <= obj_min:
                            obj_min = od
                            j = t
            else:
                if a[t] < C:
                    diff = gmax - G[t]
                    if -G[t] >= gmax2:
                        gmax2 = -G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = _TAU
                        od = -(diff * diff) / quad
                        if od <= obj_min:
                            obj_min = od
                            j = t
        gap = gmax + gmax2
        if gap < tol or j == -1:
            break
        it += 1

        kj = j % n
        qij = s[i] * s[j] * K[ki, kj]
        ai_old = a[i]
        aj_old = a[j]
        if s[i] != s[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            d = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if d > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = d
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -d
            if d > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - d
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + d
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total

        dai = a[i] - ai_old
        daj = a[j] - aj_old
        for t in range(l):
            kt = t % n
            G[t] += s[t] * (s[i] * K[kt, ki] * dai + s[j] * K[kt, kj] * daj)

    # Bias: average over free variables, else midpoint of the feasible interval.
    ub = np.inf
    lb = -np.inf
    acc = 0.0
    nfree = 0
    for t in range(l):
        yg = s[t] * G[t]
        if a[t] >= C:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            acc += yg
            nfree += 1
    rho = acc / nfree if nfree > 0 else 0.5 * (ub + lb)

    obj = 0.0
    for t in range(l):
        p = eps - y[t] if t < n else eps + y[t - n]
        obj += 0.5 * a[t] * (G[t] + p)
    return a, -rho, obj, it, gap


@dataclass(frozen=True)
class SvrModel:
    kernel: str
    C: float
    epsilon: float
    gamma: float | None
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    objective: float = float("nan")
    n_iter: int = 0
    converged: bool = True

    family = "svr"

    def decision_function(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"expected rows with {self.support_vectors.shape[1]} columns, got shape {rows.shape}"
            )
        if len(self.dual_coef) == 0:
            return np.full(len(rows), self.bias)
        return kernel_matrix(rows, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias

    predict = decision_function


def dual_objective(beta, K, y, epsilon) -> float:
    """``1/2 beta^T K beta - y^T beta + epsilon * |beta|_1``."""
    beta = np.asarray(beta, dtype=float)
    return float(0.5 * beta @ K @ beta - np.asarray(y) @ beta + epsilon * np.abs(beta).sum())


def fit_svr(
    X,
    y,
    kernel: str = "rbf",
    C: float = 1.0,
    epsilon: float = DEFAULT_EPSILON,
    gamma: float | None = None,
    tol: float = KKT_TOL,
    max_iter: int = MAX_ITER,
    seed: int = 0,
) -> SvrModel:
    """Fit epsilon-SVR.

    ``seed`` fixes the scan order used to break ties during working-pair
    selection, so fits are reproducible. Reaching ``max_iter`` before the KKT
    gap falls below ``tol`` logs a warning and returns the current iterate
    with ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if len(y) < 2:
        raise ValueError("SVR needs at least 2 rows")
    if not C > 0:
        raise ValueError("C must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if kernel == "rbf":
        if gamma is None or not gamma > 0:
            raise ValueError("rbf kernel needs gamma > 0")
    elif kernel == "linear":
        gamma = None
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    n = len(y)
    K = kernel_matrix(X, X, kernel, gamma)
    order = np.random.default_rng(seed).permutation(2 * n).astype(np.int64)
    a, bias, obj, n_iter, gap = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter), order)
    converged = gap < tol
    if not converged:
        logger.warning("SMO stopped after %d iterations with KKT gap %.3g", n_iter, gap)
    beta = a[:n] - a[n:]
    sv = np.flatnonzero(beta != 0)
    return SvrModel(
        kernel=kernel,
        C=float(C),
        epsilon=float(epsilon),
        gamma=gamma,
        support_vectors=X[sv],
        dual_coef=beta[sv],
        bias=float(bias),
        objective=float(obj),
        n_iter=int(n_iter),
        converged=bool(converged),
    )


def predict_svr(model: SvrModel, rows) -> np.ndarray:
    return model.predict(rows)
