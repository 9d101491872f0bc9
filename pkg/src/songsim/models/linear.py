"""Ordinary least squares with an unpenalized intercept."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RIDGE_JITTER = 1e-10


def _check_rows(rows, n_features):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != n_features:
        raise ValueError(f"expected rows with {n_features} columns, got shape {rows.shape}")
    return rows


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float

    family = "ols"

    def predict(self, rows) -> np.ndarray:
        return _check_rows(rows, len(self.weights)) @ self.weights + self.intercept


def fit_ols(X, y) -> LinearModel:
    """Least squares through the centered normal equations.

    A jitter of 1e-10 on the Gram diagonal keeps rank-deficient designs
    solvable; the intercept is recovered from the column means.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per target")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc
    gram[np.diag_indices_from(gram)] += RIDGE_JITTER
    w = np.linalg.solve(gram, Xc.T @ (y - y_mean))
    return LinearModel(weights=w, intercept=float(y_mean - x_mean @ w))


def predict_ols(model: LinearModel, rows) -> np.ndarray:
    return model.predict(rows)
