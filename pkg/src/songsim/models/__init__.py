"""Regressors for pair similarity, their grid search and text persistence.

Saved models are JSON documents tagged with their family. Floats are written
with Python's shortest round-trip repr (at most 17 significant digits), so
reloading reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
from typing import IO

import numpy as np

from .linear import LinearModel, fit_ols, predict_ols
from .neighbors import KnnModel, LshForest, fit_knn, fit_lsh, nearest, predict_knn, predict_lsh
from .search import FAMILIES, GridResult, GridSpec, fit, grid_search, svr_grid
from .svr import SvrModel, fit_svr, predict_svr

__all__ = [
    "FAMILIES",
    "GridResult",
    "GridSpec",
    "KnnModel",
    "LinearModel",
    "LshForest",
    "SvrModel",
    "fit",
    "fit_knn",
    "fit_lsh",
    "fit_ols",
    "fit_svr",
    "grid_search",
    "load_model",
    "nearest",
    "predict_knn",
    "predict_lsh",
    "predict_ols",
    "predict_svr",
    "save_model",
    "svr_grid",
]

_ARRAYS = {
    "ols": ("weights",),
    "svr": ("support_vectors", "dual_coef"),
    "knn": ("X", "y"),
    "lsh": ("center", "hyperplanes", "X", "y"),
}
_CLASSES = {"ols": LinearModel, "svr": SvrModel, "knn": KnnModel, "lsh": LshForest}


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"shape": list(value.shape), "data": value.ravel().tolist()}
    return value


def save_model(model, fh: IO[str], seed: int | None = None) -> None:
    family = model.family
    arrays = _ARRAYS[family]
    params = {}
    for name in model.__dataclass_fields__:
        if name.startswith("_"):
            continue
        value = getattr(model, name)
        params[name] = _encode(value)
    doc = {"format": "songsim.model/1", "family": family, "seed": seed, "arrays": list(arrays), "fields": params}
    json.dump(doc, fh)


def load_model(fh: IO[str]):
    doc = json.load(fh)
    if doc.get("format") != "songsim.model/1":
        raise ValueError("not a songsim model file")
    family = doc["family"]
    kwargs = {}
    for name, value in doc["fields"].items():
        if name in _ARRAYS[family]:
            kwargs[name] = np.array(value["data"], dtype=float).reshape(value["shape"])
        else:
            kwargs[name] = value
    return _CLASSES[family](**kwargs)
