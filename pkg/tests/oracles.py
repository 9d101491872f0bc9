"""Independent reference computations used as test oracles."""

import math
from itertools import combinations


def brute_force_cooccurrence(histories):
    """Pairwise cosine of binary incidence vectors, by explicit enumeration.

    Returns ``{(i, j): sim}`` for ``i < j`` with a non-zero similarity.
    """
    songs = sorted({s for h in histories for s in h.song_ids})
    vec = {s: [1 if s in h.song_ids else 0 for h in histories] for s in songs}
    out = {}
    for i, j in combinations(songs, 2):
        dot = sum(a * b for a, b in zip(vec[i], vec[j]))
        if dot == 0:
            continue
        ni = sum(vec[i])
        nj = sum(vec[j])
        out[(i, j)] = dot / math.sqrt(float(ni) * float(nj))
    return out


def svr_dual_qp(K, y, C, epsilon):
    """Optimal value of the epsilon-SVR dual, solved as a generic convex QP.

    Minimizes ``1/2 b^T K b - y^T b + epsilon |b|_1`` subject to
    ``sum(b) = 0`` and ``|b_i| <= C``.
    """
    import cvxpy as cp
    import numpy as np

    w, v = np.linalg.eigh((K + K.T) / 2)
    F = (v * np.sqrt(np.clip(w, 0, None))).T  # K = F^T F
    b = cp.Variable(len(y))
    obj = 0.5 * cp.sum_squares(F @ b) - y @ b + epsilon * cp.norm1(b)
    prob = cp.Problem(cp.Minimize(obj), [cp.sum(b) == 0, cp.abs(b) <= C])
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value), np.asarray(b.value)


def exact_knn_indices(X, q, k):
    """k nearest rows by sorting (distance, index) tuples in pure Python."""
    dists = []
    for i, row in enumerate(X):
        dists.append((sum((float(a) - float(b)) ** 2 for a, b in zip(row, q)), i))
    return [i for _, i in sorted(dists)[:k]]
