"""Mean-of-neighbors regression: exact linear scan and LSH-forest approximation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_BLOCK = 1 << 22  # elements per distance block


def _check_rows(rows, n_features):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != n_features:
        raise ValueError(f"expected rows with {n_features} columns, got shape {rows.shape}")
    return rows


def _sq_dist(q, X):
    diff = q[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def nearest(X, queries, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest rows of ``X`` for every query, closest first.

    Distances are Euclidean and ties go to the lower row index.
    """
    X = np.asarray(X, dtype=float)
    queries = np.asarray(queries, dtype=float)
    out = np.empty((len(queries), k), dtype=np.int64)
    step = max(1, _BLOCK // max(len(X) * X.shape[1], 1))
    for start in range(0, len(queries), step):
        d = _sq_dist(queries[start : start + step], X)
        out[start : start + step] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


@dataclass(frozen=True)
class KnnModel:
    k: int
    X: np.ndarray
    y: np.ndarray

    family = "knn"

    def neighbors(self, rows) -> np.ndarray:
        return nearest(self.X, _check_rows(rows, self.X.shape[1]), self.k)

    def predict(self, rows) -> np.ndarray:
        return self.y[self.neighbors(rows)].mean(axis=1)


def fit_knn(X, y, k: int = 5) -> KnnModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if not 1 <= k <= len(y):
        raise ValueError(f"k={k} must lie in [1, {len(y)}]")
    return KnnModel(k=int(k), X=X, y=y)


def predict_knn(model: KnnModel, rows) -> np.ndarray:
    return model.predict(rows)


@dataclass(frozen=True)
class LshForest:
    """Sign-random-projection hash trees over the stored rows.

    Each tree hashes a row to ``hash_len`` bits, one per random hyperplane
    through the training mean, and keeps the rows sorted by hash key so that
    every key prefix is a contiguous range. A query descends all trees
    together from the full key length, shortening the prefix until the
    union of matching rows holds ``candidate_multiplier * k`` candidates,
    then ranks those candidates by exact distance.
    """

    k: int
    n_trees: int
    hash_len: int
    candidate_multiplier: int
    seed: int
    center: np.ndarray
    hyperplanes: np.ndarray  # (n_trees, hash_len, n_features)
    X: np.ndarray
    y: np.ndarray
    _keys: np.ndarray = field(init=False, repr=False, compare=False)
    _order: np.ndarray = field(init=False, repr=False, compare=False)

    family = "lsh"

    def __post_init__(self):
        keys = self.hash(self.X)
        order = np.argsort(keys, axis=1, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_keys", np.take_along_axis(keys, order, axis=1))

    def hash(self, rows) -> np.ndarray:
        """Integer hash keys, shape ``(n_trees, n_rows)``."""
        rows = np.asarray(rows, dtype=float) - self.center
        planes = self.hyperplanes.reshape(-1, self.hyperplanes.shape[-1])
        # Row-wise products instead of a matmul so a row hashes identically
        # whether it arrives alone or in a batch.
        side = np.empty((len(rows), len(planes)), dtype=bool)
        step = max(1, _BLOCK // max(planes.size, 1))
        for start in range(0, len(rows), step):
            chunk = rows[start : start + step]
            side[start : start + step] = (chunk[:, None, :] * planes[None, :, :]).sum(-1) > 0
        side = side.reshape(len(rows), self.n_trees, self.hash_len)
        keys = np.zeros((self.n_trees, len(rows)), dtype=np.int64)
        for b in range(self.hash_len):
            keys = (keys << 1) | side[:, :, b].T.astype(np.int64)
        return keys

    def candidates(self, row) -> np.ndarray:
        """Sorted candidate row indices for a single query."""
        want = min(self.candidate_multiplier * self.k, len(self.y))
        qkeys = self.hash(row[None, :])[:, 0]
        found = np.zeros(len(self.y), dtype=bool)
        for h in range(self.hash_len, -1, -1):
            shift = self.hash_len - h
            for t in range(self.n_trees):
                lo_key = (qkeys[t] >> shift) << shift
                lo = np.searchsorted(self._keys[t], lo_key, side="left")
                hi = np.searchsorted(self._keys[t], lo_key + (1 << shift), side="left")
                found[self._order[t, lo:hi]] = True
            if found.sum() >= want:
                break
        return np.flatnonzero(found)

    def neighbors(self, rows) -> np.ndarray:
        rows = _check_rows(rows, self.X.shape[1])
        out = np.empty((len(rows), self.k), dtype=np.int64)
        for i, row in enumerate(rows):
            cand = self.candidates(row)
            out[i] = cand[nearest(self.X[cand], row[None, :], self.k)[0]]
        return out

    def predict(self, rows) -> np.ndarray:
        return self.y[self.neighbors(rows)].mean(axis=1)


def fit_lsh(
    X,
    y,
    k: int = 5,
    n_trees: int = 10,
    hash_len: int = 16,
    seed: int = 0,
    candidate_multiplier: int = 10,
) -> LshForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if not 1 <= k <= len(y):
        raise ValueError(f"k={k} must lie in [1, {len(y)}]")
    if n_trees < 1 or not 0 <= hash_len <= 62 or candidate_multiplier < 1:
        raise ValueError("need n_trees >= 1, 0 <= hash_len <= 62, candidate_multiplier >= 1")
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((n_trees, hash_len, X.shape[1]))
    return LshForest(
        k=int(k),
        n_trees=int(n_trees),
        hash_len=int(hash_len),
        candidate_multiplier=int(candidate_multiplier),
        seed=int(seed),
        center=X.mean(axis=0),
        hyperplanes=planes,
        X=X,
        y=y,
    )


def predict_lsh(model: LshForest, rows) -> np.ndarray:
    return model.predict(rows)
