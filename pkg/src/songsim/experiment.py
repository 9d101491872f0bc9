"""Experiment matrix over feature scheme x similarity threshold x model, and reporting.

Each cell trains one model specification on one split pair dataset and scores
it on the held-out rows. Reports go to ``reports.csv`` (one row per cell) and
``tables.txt`` (one grid per model family: rows are scheme x threshold,
columns are the family's settings).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, fields
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .metrics import r2_score, rmse
from .models import GridSpec, grid_search, svr_grid
from .models.search import cross_validate, kfold_indices
from .pairs import PairDataset

logger = logging.getLogger(__name__)

DEFAULT_CV_FOLDS = 3


@dataclass(frozen=True)
class ModelSpec:
    """One column of a results table.

    ``scale=None`` standardizes the inputs for SVR only.
    """

    family: str
    label: str
    grid: tuple[Mapping, ...]
    scale: bool | None = None
    cv_folds: int = DEFAULT_CV_FOLDS
    cv: bool = True

    @property
    def scaled(self) -> bool:
        return self.family == "svr" if self.scale is None else self.scale

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "label": self.label,
            "grid": [dict(g) for g in self.grid],
            "scale": self.scale,
            "cv_folds": self.cv_folds,
            "cv": self.cv,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            family=d["family"],
            label=d.get("label", d["family"]),
            grid=tuple(dict(g) for g in d.get("grid", [{}])),
            scale=d.get("scale"),
            cv_folds=int(d.get("cv_folds", DEFAULT_CV_FOLDS)),
            cv=bool(d.get("cv", True)),
        )


def default_models() -> list[ModelSpec]:
    """Default columns: SVR raw and scaled, k-NN at k=1, 5, 10, OLS, LSH k-NN at k=1, 5, 10."""
    specs = [
        ModelSpec("svr", "raw", tuple(svr_grid()), scale=False),
        ModelSpec("svr", "scaled", tuple(svr_grid()), scale=True),
    ]
    specs += [ModelSpec("knn", f"k={k}", ({"k": k},)) for k in (1, 5, 10)]
    specs.append(ModelSpec("ols", "ols", ({},)))
    specs += [ModelSpec("lsh", f"k={k}", ({"k": k},)) for k in (1, 5, 10)]
    return specs


@dataclass
class EvalReport:
    experiment_id: str
    scheme: str
    threshold: float
    family: str
    label: str
    params: str
    scaled: bool
    n_train: int
    n_test: int
    r2: float
    rmse: float
    cv_mean: float
    cv_std: float
    seconds: float = field(default=0.0, compare=False)
    error: str = ""

    # Wall-clock time varies between runs; it goes to timings.csv instead.
    CSV_FIELDS = (
        "experiment_id", "scheme", "threshold", "family", "label", "params", "scaled",
        "n_train", "n_test", "r2", "rmse", "cv_mean", "cv_std", "error",
    )

    def __post_init__(self):
        if not (math.isnan(self.rmse) or self.rmse >= 0):
            raise ValueError("rmse must be non-negative")
        if not (math.isnan(self.r2) or self.r2 <= 1.0):
            raise ValueError("r2 cannot exceed 1")


def experiment_id(scheme: str, threshold: float, spec: ModelSpec) -> str:
    return f"{scheme}/{threshold:g}/{spec.family}/{spec.label}"


@dataclass
class TrainedCell:
    model: object | None
    params: dict
    scaled: bool
    cv_scores: list[float]
    seconds: float
    error: str = ""


def prepare(ds: PairDataset, spec: ModelSpec) -> PairDataset:
    return ds.scaled() if spec.scaled else ds


def train_cell(ds: PairDataset, spec: ModelSpec, seed: int = 0) -> TrainedCell:
    """Grid-search ``spec`` on the train rows of ``ds``.

    Failures are captured in ``TrainedCell.error`` so that a matrix run can
    carry on with the remaining cells.
    """
    start = time.perf_counter()
    try:
        data = prepare(ds, spec)
        X, y = data.train
        grid = GridSpec(tuple(spec.grid), cv_folds=spec.cv_folds)
        result = grid_search(spec.family, grid, X, y, seed=seed)
        if result.cv_table:
            scores = result.cv_table[result.best_index]["scores"]
        elif spec.cv:
            folds = kfold_indices(len(y), spec.cv_folds, seed)
            scores = cross_validate(spec.family, result.best_params, X, y, folds).tolist()
        else:
            scores = []
        return TrainedCell(result.model, result.best_params, spec.scaled, scores, time.perf_counter() - start)
    except Exception as exc:  # noqa: BLE001 - recorded in the report
        logger.warning("cell %s failed: %s", spec.label, exc)
        return TrainedCell(None, {}, spec.scaled, [], time.perf_counter() - start, f"{type(exc).__name__}: {exc}")


def evaluate_cell(
    ds: PairDataset, spec: ModelSpec, cell: TrainedCell, scheme: str, threshold: float
) -> EvalReport:
    data = ds.scaled() if cell.scaled and ds.train_mask is not None else ds
    n_train = int(ds.train_mask.sum()) if ds.train_mask is not None else 0
    n_test = len(ds) - n_train
    r2 = err = math.nan
    error = cell.error
    if not error:
        try:
            X_test, y_test = data.test
            pred = cell.model.predict(X_test)
            r2 = r2_score(y_test, pred)
            err = rmse(y_test, pred)
        except Exception as exc:  # noqa: BLE001
            error = f"{type(exc).__name__}: {exc}"
    scores = np.asarray(cell.cv_scores, dtype=float)
    return EvalReport(
        experiment_id=experiment_id(scheme, threshold, spec),
        scheme=scheme,
        threshold=float(threshold),
        family=spec.family,
        label=spec.label,
        params=json.dumps(cell.params, sort_keys=True),
        scaled=cell.scaled,
        n_train=n_train,
        n_test=n_test,
        r2=r2,
        rmse=err,
        cv_mean=float(scores.mean()) if len(scores) else math.nan,
        cv_std=float(scores.std()) if len(scores) else math.nan,
        seconds=cell.seconds,
        error=error,
    )


def run_experiment_matrix(
    datasets: Mapping[tuple[str, float], PairDataset],
    models: Sequence[ModelSpec],
    seed: int = 0,
) -> list[EvalReport]:
    """Train and score every model on every (scheme, threshold) dataset.

    Datasets must already be split. Reports come back in dataset order, then
    model order.
    """
    reports = []
    for (scheme, threshold), ds in datasets.items():
        for spec in models:
            cell = train_cell(ds, spec, seed)
            reports.append(evaluate_cell(ds, spec, cell, scheme, threshold))
    return reports


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_reports_csv(reports: Iterable[EvalReport], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EvalReport.CSV_FIELDS)
    for r in reports:
        writer.writerow([_fmt(getattr(r, f)) for f in EvalReport.CSV_FIELDS])


def write_timings_csv(reports: Iterable[EvalReport], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["experiment_id", "seconds"])
    for r in reports:
        writer.writerow([r.experiment_id, repr(float(r.seconds))])


def read_reports_csv(fh: IO[str], timings: IO[str] | None = None) -> list[EvalReport]:
    """Parse ``reports.csv``; ``timings`` (a ``timings.csv`` stream) restores ``seconds``."""
    seconds = {}
    if timings is not None:
        seconds = {row["experiment_id"]: float(row["seconds"]) for row in csv.DictReader(timings)}
    types = {f.name: f.type for f in fields(EvalReport)}
    out = []
    for row in csv.DictReader(fh):
        kwargs = {}
        for name, raw in row.items():
            t = types[name]
            if t in ("float", float):
                kwargs[name] = float(raw)
            elif t in ("int", int):
                kwargs[name] = int(raw)
            elif t in ("bool", bool):
                kwargs[name] = raw == "true"
            else:
                kwargs[name] = raw
        kwargs["seconds"] = seconds.get(kwargs["experiment_id"], 0.0)
        out.append(EvalReport(**kwargs))
    return out


_TITLES = {
    "svr": "SVR: test R^2 of the best cross-validated model",
    "knn": "k-NN: test R^2 by number of neighbors",
    "ols": "Linear regression: test R^2 and CV R^2 (mean +/- 2 std)",
    "lsh": "LSH-forest k-NN: test R^2 by number of neighbors",
}


def render_tables(reports: Sequence[EvalReport]) -> str:
    """Plain-text tables, one per model family, best R^2 marked with ``*``."""
    blocks = []
    families = list(dict.fromkeys(r.family for r in reports))
    for family in families:
        rows = [r for r in reports if r.family == family]
        labels = list(dict.fromkeys(r.label for r in rows))
        keys = list(dict.fromkeys((r.scheme, r.threshold) for r in rows))
        cells = {(r.scheme, r.threshold, r.label): r for r in rows}
        finite = [r.r2 for r in rows if math.isfinite(r.r2)]
        best = max(finite) if finite else None
        extra = family == "ols"

        header = ["dataset"] + labels + (["cv r2"] if extra else [])
        lines = []
        for scheme, thr in keys:
            name = f"{scheme} raw" if thr == 0 else f"{scheme} s>={thr:g}"
            line = [name]
            for label in labels:
                r = cells.get((scheme, thr, label))
                if r is None or not math.isfinite(r.r2):
                    line.append("failed" if r is not None else "-")
                else:
                    line.append(f"{r.r2:.3f}" + ("*" if r.r2 == best else ""))
            if extra:
                r = cells.get((scheme, thr, labels[0]))
                if r is not None and math.isfinite(r.cv_mean):
                    line.append(f"{r.cv_mean:.3f} (+/- {2 * r.cv_std:.3f})")
                else:
                    line.append("-")
            lines.append(line)
        widths = [max(len(x) for x in col) for col in zip(header, *lines)]
        fmt = lambda cols: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cols, widths)))
        rule = "-" * len(fmt(header))
        blocks.append("\n".join([_TITLES.get(family, family), rule, fmt(header), rule, *map(fmt, lines), rule]))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
