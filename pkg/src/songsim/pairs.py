"""Supervised pair datasets: graph traversal, difference features, split, scaling."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .cooccur import SimilarityGraph
from .features import FeatureMatrix

STD_FLOOR = 1e-12
DEFAULT_TEST_FRACTION = 0.2


def select_pairs(
    g: SimilarityGraph, limit: int, seed: int | None = None
) -> list[tuple[int, int, float]]:
    """Collect up to ``limit`` edges by breadth-first traversal.

    The walk starts at the highest-degree node (lowest id on ties) and, once a
    component is exhausted, restarts from the lowest-id unvisited node. Each
    edge is emitted once as ``(smaller id, larger id, similarity)``. Neighbors
    are visited in id order, or in an order shuffled by ``seed`` when given.
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    nodes = g.nodes()
    if not nodes or g.edge_count == 0:
        raise ValueError("cannot select pairs from an empty graph")
    rng = np.random.default_rng(seed) if seed is not None else None

    start = max(nodes, key=lambda n: (g.degree(n), -n))
    order = [start] + [n for n in nodes if n != start]
    seen: set[int] = set()
    done: set[int] = set()
    out: list[tuple[int, int, float]] = []
    for root in order:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            nbrs = g.neighbors(u)
            if rng is not None:
                nbrs = [nbrs[i] for i in rng.permutation(len(nbrs))]
            for v, s in nbrs:
                if v in done:
                    continue  # emitted while expanding v
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
                out.append((min(u, v), max(u, v), s))
                if len(out) >= limit:
                    return out
            done.add(u)
    return out


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class PairDataset:
    X: np.ndarray
    y: np.ndarray
    pairs: np.ndarray  # (n, 2) song ids
    train_mask: np.ndarray | None = None
    scaler: ScalerParams | None = None
    scheme: str = ""
    seeds: tuple = ()

    def __post_init__(self):
        if self.X.shape[0] != len(self.y) or len(self.y) != len(self.pairs):
            raise ValueError("X, y and pairs must have the same number of rows")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[self.train_mask], self.y[self.train_mask]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[~self.train_mask], self.y[~self.train_mask]

    def scaled(self) -> "PairDataset":
        """Standardize every row with parameters fitted on the train rows."""
        if self.train_mask is None:
            raise ValueError("dataset has not been split")
        params = fit_scaler(self.X[self.train_mask])
        return replace(self, X=apply_scaler(self.X, params), scaler=params)

    def write_pairs_csv(self, fh) -> None:
        fh.write("song_a,song_b,similarity\n")
        for (a, b), s in zip(self.pairs.tolist(), self.y.tolist()):
            fh.write(f"{a},{b},{s!r}\n")

    def save(self, path) -> None:
        arrays = {"X": self.X, "y": self.y, "pairs": self.pairs}
        if self.train_mask is not None:
            arrays["train_mask"] = self.train_mask
        if self.scaler is not None:
            arrays["scaler_mean"] = self.scaler.mean
            arrays["scaler_std"] = self.scaler.std
        meta = json.dumps({"scheme": self.scheme, "seeds": list(self.seeds)})
        np.savez(path, meta=np.array(meta), **arrays)

    @classmethod
    def load(cls, path) -> "PairDataset":
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            scaler = None
            if "scaler_mean" in z:
                scaler = ScalerParams(z["scaler_mean"], z["scaler_std"])
            return cls(
                X=z["X"],
                y=z["y"],
                pairs=z["pairs"],
                train_mask=z["train_mask"] if "train_mask" in z else None,
                scaler=scaler,
                scheme=meta["scheme"],
                seeds=tuple(meta["seeds"]),
            )


def build_pair_matrix(
    pairs, features: FeatureMatrix, both_orientations: bool = False
) -> PairDataset:
    """Row ``f_a - f_b`` and label ``sim`` for every pair ``(a, b, sim)``.

    With ``both_orientations`` each pair also contributes the negated row.
    """
    pairs = list(pairs)
    for a, b, _ in pairs:
        for s in (a, b):
            if s not in features:
                raise KeyError(f"song id {s} has no feature row")
    if both_orientations:
        pairs = pairs + [(b, a, s) for a, b, s in pairs]
    ids = np.array([(a, b) for a, b, _ in pairs], dtype=np.int64).reshape(-1, 2)
    y = np.array([s for _, _, s in pairs], dtype=float)
    if len(pairs):
        X = features.rows(ids[:, 0]) - features.rows(ids[:, 1])
    else:
        X = np.empty((0, features.dim))
    return PairDataset(X=X, y=y, pairs=ids, scheme=features.scheme)


def split(ds: PairDataset, test_fraction: float = DEFAULT_TEST_FRACTION, seed: int = 0) -> PairDataset:
    """Seeded random train/test partition with ``round(n * test_fraction)`` test rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(ds)
    n_test = int(math.floor(n * test_fraction + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    mask = np.ones(n, dtype=bool)
    mask[perm[:n_test]] = False
    return replace(ds, train_mask=mask, seeds=ds.seeds + (seed,))


def fit_scaler(rows) -> ScalerParams:
    """Column means and population standard deviations, floored at 1e-12."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit a scaler")
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), STD_FLOOR)
    return ScalerParams(mean, std)


def apply_scaler(rows, p: ScalerParams) -> np.ndarray:
    """``(x - mean) / std`` per column. Fit once, apply once."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[-1] != len(p.mean):
        raise ValueError(f"rows have {rows.shape[-1]} columns, scaler expects {len(p.mean)}")
    return (rows - p.mean) / p.std
