"""Regression scores."""

from __future__ import annotations

import math

import numpy as np


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    return y, yhat


def r2_score(y, yhat) -> float:
    """Coefficient of determination, ``1 - SS_res / SS_tot``.

    Negative whenever ``yhat`` does worse than predicting the mean. Undefined,
    and therefore an error, when ``y`` is constant.
    """
    y, yhat = _pair(y, yhat)
    if len(y) < 2:
        raise ValueError("r2_score needs at least 2 values")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2_score is undefined for constant y")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if len(y) < 1:
        raise ValueError("rmse needs at least 1 value")
    return math.sqrt(float(np.mean((yhat - y) ** 2)))
