"""Seeded k-fold grid search over the regressor families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..metrics import r2_score
from .linear import fit_ols
from .neighbors import fit_knn, fit_lsh
from .svr import fit_svr

FAMILIES: dict[str, Callable] = {
    "ols": fit_ols,
    "svr": fit_svr,
    "knn": fit_knn,
    "lsh": fit_lsh,
}

SVR_C_VALUES = (1.0, 10.0, 100.0)
SVR_GAMMA_VALUES = (0.001, 0.0001)


def svr_grid(c_values=SVR_C_VALUES, gamma_values=SVR_GAMMA_VALUES) -> list[dict]:
    """Linear kernel for every C, then RBF for every (C, gamma)."""
    grid = [{"kernel": "linear", "C": c} for c in c_values]
    grid += [{"kernel": "rbf", "C": c, "gamma": g} for c, g in itertools.product(c_values, gamma_values)]
    return grid


@dataclass(frozen=True)
class GridSpec:
    candidates: tuple[Mapping, ...]
    cv_folds: int = 3

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("grid must contain at least one candidate")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")


@dataclass
class GridResult:
    best_params: dict
    best_index: int
    model: object
    cv_table: list[dict] = field(default_factory=list)

    @property
    def best_scores(self) -> np.ndarray:
        return np.asarray(self.cv_table[self.best_index]["scores"])


def fit(family: str, X, y, params: Mapping | None = None):
    try:
        fn = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    return fn(X, y, **dict(params or {}))


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    if any(len(p) < 2 for p in parts):
        raise ValueError(f"{n} rows cannot fill {folds} folds with at least 2 rows each")
    return [np.sort(p) for p in parts]


def cross_validate(family: str, params: Mapping, X, y, folds: Sequence[np.ndarray]) -> np.ndarray:
    scores = []
    for held in folds:
        mask = np.ones(len(y), dtype=bool)
        mask[held] = False
        model = fit(family, X[mask], y[mask], params)
        scores.append(r2_score(y[held], model.predict(X[held])))
    return np.asarray(scores)


def grid_search(family: str, grid: GridSpec | Sequence[Mapping], X, y, seed: int = 0) -> GridResult:
    """Pick the candidate with the best mean validation R^2, then refit on all rows.

    Fold membership is drawn once from ``seed`` and shared by every candidate.
    Ties keep the earliest candidate. A single-candidate grid skips
    cross-validation entirely.
    """
    if not isinstance(grid, GridSpec):
        grid = GridSpec(tuple(grid))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(grid.candidates) == 1:
        params = dict(grid.candidates[0])
        return GridResult(params, 0, fit(family, X, y, params), [])

    folds = kfold_indices(len(y), grid.cv_folds, seed)
    table = []
    best, best_mean = 0, -np.inf
    for idx, params in enumerate(grid.candidates):
        scores = cross_validate(family, params, X, y, folds)
        mean = float(scores.mean())
        table.append({"params": dict(params), "scores": scores.tolist(), "mean": mean, "std": float(scores.std())})
        if mean > best_mean:
            best, best_mean = idx, mean
    params = dict(grid.candidates[best])
    return GridResult(params, best, fit(family, X, y, params), table)
