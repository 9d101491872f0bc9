"""Staged, content-addressed pipeline from raw files to evaluation reports.

Stages run in the order ingest -> groundtruth -> features -> pairs -> train
-> evaluate. Each stage writes into ``<workdir>/cache/<stage>/<key>/`` where
``key`` hashes the stage's own settings together with the keys of the stages
it reads from (and, for ingest, the bytes of the input files). A directory
holding a ``done`` marker is reused as is, so re-running an unchanged config
recomputes nothing, and changing one setting only recomputes the stages
downstream of it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from . import cooccur, embed, ingest, tfidf
from .experiment import (
    EvalReport,
    ModelSpec,
    TrainedCell,
    evaluate_cell,
    default_models,
    read_reports_csv,
    render_tables,
    train_cell,
    write_reports_csv,
    write_timings_csv,
)
from .features import FeatureMatrix
from .models import load_model, save_model
from .pairs import PairDataset, build_pair_matrix, select_pairs, split

logger = logging.getLogger(__name__)

STAGES = ("ingest", "groundtruth", "features", "pairs", "train", "evaluate")
SCHEMES = ("tfidf", "embed")
_VERSION = "1"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path, stage: str):
        self.path = path
        super().__init__(f"missing upstream artifact {path} (run the {stage!r} stage first)")


class WorkdirLocked(RuntimeError):
    pass


@dataclass
class RunConfig:
    songs: Path | None = None
    histories: Path | None = None
    similarity: Path | None = None
    workdir: Path = Path("work")
    seed: int = 0
    schemes: tuple[str, ...] = SCHEMES
    thresholds: tuple[float, ...] = cooccur.DEFAULT_THRESHOLDS
    limit: int = 3000
    test_fraction: float = 0.2
    both_orientations: bool = False
    tfidf: dict = field(default_factory=lambda: {"max_terms": tfidf.DEFAULT_MAX_TERMS, "components": tfidf.DEFAULT_COMPONENTS})
    embed: dict = field(default_factory=dict)
    models: tuple[ModelSpec, ...] = field(default_factory=lambda: tuple(default_models()))

    def __post_init__(self):
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown feature scheme {s!r}")
        for t in self.thresholds:
            if not 0.0 <= t < 1.0:
                raise ValueError(f"threshold {t} outside [0, 1)")
        if self.limit < 1:
            raise ValueError("limit must be positive")

    @classmethod
    def from_dict(cls, d: Mapping, base: Path | None = None) -> "RunConfig":
        base = Path(base) if base is not None else Path.cwd()
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("songs", "histories", "similarity", "workdir"):
            if kw.get(key) is not None:
                kw[key] = base / Path(kw[key])
        if "schemes" in kw:
            kw["schemes"] = tuple(kw["schemes"])
        if "thresholds" in kw:
            kw["thresholds"] = tuple(float(t) for t in kw["thresholds"])
        if "models" in kw:
            kw["models"] = tuple(ModelSpec.from_dict(m) for m in kw["models"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = [m.to_dict() for m in self.models]
        for key in ("songs", "histories", "similarity", "workdir"):
            d[key] = str(d[key]) if d[key] is not None else None
        return d


def _digest(*parts) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([_VERSION, *parts], sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@contextmanager
def workdir_lock(workdir: Path):
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkdirLocked(f"{workdir} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


class Pipeline:
    """Runs and caches the stages for one :class:`RunConfig`.

    With ``auto=True`` a stage first runs any missing upstream stage; with
    ``auto=False`` a missing upstream artifact raises
    :class:`MissingArtifactError` naming the file.
    """

    def __init__(self, config: RunConfig, auto: bool = True):
        self.cfg = config
        self.auto = auto
        self.root = Path(config.workdir)
        self.events: list[tuple[str, str, str]] = []  # (stage, key, "hit" | "run")
        self._input_digests: dict[str, str] = {}

    # -- keys -----------------------------------------------------------

    def _input(self, name: str) -> str:
        if name not in self._input_digests:
            path = getattr(self.cfg, name)
            if path is None or not Path(path).exists():
                raise ingest.DataError(f"input file for {name!r} not found: {path}")
            self._input_digests[name] = _file_digest(Path(path))
        return self._input_digests[name]

    def ingest_key(self) -> str:
        return _digest("ingest", self._input("songs"), self._input("histories"))

    def groundtruth_key(self) -> str:
        if self.cfg.similarity is not None:
            return _digest("groundtruth-csv", self._input("similarity"), self.ingest_key())
        return _digest("groundtruth", self.ingest_key())

    def features_key(self, scheme: str) -> str:
        params = self.cfg.tfidf if scheme == "tfidf" else self.cfg.embed
        return _digest("features", scheme, params, self.cfg.seed, self.ingest_key())

    def pairs_key(self, scheme: str, threshold: float) -> str:
        c = self.cfg
        return _digest(
            "pairs", float(threshold), c.limit, c.test_fraction, c.both_orientations, c.seed,
            self.groundtruth_key(), self.features_key(scheme),
        )

    def train_key(self, scheme: str, threshold: float, spec: ModelSpec) -> str:
        return _digest("train", spec.to_dict(), self.cfg.seed, self.pairs_key(scheme, threshold))

    def evaluate_key(self) -> str:
        cells = [self.train_key(s, t, m) for s in self.cfg.schemes for t in self.cfg.thresholds for m in self.cfg.models]
        return _digest("evaluate", cells)

    # -- plumbing -------------------------------------------------------

    def stage_dir(self, stage: str, key: str) -> Path:
        return self.root / "cache" / stage / key

    def _cached(self, stage: str, key: str) -> Path | None:
        d = self.stage_dir(stage, key)
        if (d / "done").exists():
            self.events.append((stage, key, "hit"))
            return d
        return None

    def _begin(self, stage: str, key: str) -> Path:
        d = self.stage_dir(stage, key)
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        self.events.append((stage, key, "run"))
        logger.info("running %s [%s]", stage, key)
        return d

    @staticmethod
    def _finish(d: Path) -> Path:
        (d / "done").write_text("")
        return d

    def _upstream(self, stage: str, key: str, filename: str, run) -> Path:
        d = self.stage_dir(stage, key)
        if (d / "done").exists():
            return d / filename
        if not self.auto:
            raise MissingArtifactError(d / filename, stage)
        run()
        return d / filename

    # -- stages ---------------------------------------------------------

    def ingest(self) -> Path:
        key = self.ingest_key()
        if (d := self._cached("ingest", key)) is not None:
            return d
        d = self._begin("ingest", key)
        issues: list[ingest.ParseIssue] = []
        with open(self.cfg.songs, "rb") as fh:
            docs = ingest.parse_song_docs(fh, issues)
        records, ids = ingest.build_song_records(docs)
        if not records:
            raise ingest.DataError("no usable song records")
        with open(self.cfg.histories, "rb") as fh:
            histories = ingest.parse_histories(fh, ids["song"], issues)
        with open(d / "records.jsonl", "w", encoding="utf-8") as fh:
            ingest.write_records(records, fh)
        for ns, assigner in ids.items():
            with open(d / f"{ns}_idmap.tsv", "w", encoding="utf-8") as fh:
                assigner.write_tsv(fh)
        with open(d / "histories.json", "w", encoding="utf-8") as fh:
            json.dump([[h.user_id, sorted(h.song_ids)] for h in histories], fh)
        with open(d / "issues.txt", "w", encoding="utf-8") as fh:
            for issue in issues:
                fh.write(f"{issue.line}\t{issue.message}\n")
        return self._finish(d)

    def groundtruth(self) -> Path:
        key = self.groundtruth_key()
        if (d := self._cached("groundtruth", key)) is not None:
            return d
        if self.cfg.similarity is not None:
            d = self._begin("groundtruth", key)
            with open(self.cfg.similarity, "rb") as fh:
                graph = cooccur.parse_similarity_csv(fh)
        else:
            hist_path = self._upstream("ingest", self.ingest_key(), "histories.json", self.ingest)
            d = self._begin("groundtruth", key)
            with open(hist_path, encoding="utf-8") as fh:
                histories = [ingest.UserHistory(u, frozenset(s)) for u, s in json.load(fh)]
            graph = cooccur.build_similarity_graph(histories)
        with open(d / "similarity.csv", "w", encoding="utf-8") as fh:
            graph.write_csv(fh)
        return self._finish(d)

    def features(self, scheme: str) -> Path:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown feature scheme {scheme!r}")
        key = self.features_key(scheme)
        if (d := self._cached("features", key)) is not None:
            return d
        rec_path = self._upstream("ingest", self.ingest_key(), "records.jsonl", self.ingest)
        d = self._begin("features", key)
        with open(rec_path, encoding="utf-8") as fh:
            records = ingest.read_records(fh)
        if scheme == "tfidf":
            p = self.cfg.tfidf
            model, fm = tfidf.fit_tfidf_features(
                records,
                max_terms=int(p.get("max_terms", tfidf.DEFAULT_MAX_TERMS)),
                k=int(p.get("components", tfidf.DEFAULT_COMPONENTS)),
                seed=self.cfg.seed,
            )
            with open(d / "tfidf_model.json", "w", encoding="utf-8") as fh:
                model.save(fh)
        else:
            params = embed.SkipGramParams(**{"seed": self.cfg.seed, **self.cfg.embed})
            emb = embed.train_skipgram(embed.build_corpus(records), params)
            with open(d / "embedding.txt", "w", encoding="utf-8") as fh:
                emb.save(fh)
            fm = embed.build_feature_matrix_embed(records, emb)
        with open(d / "features.npz", "wb") as fh:
            fm.save(fh)
        return self._finish(d)

    def pairs(self, scheme: str, threshold: float) -> Path:
        key = self.pairs_key(scheme, threshold)
        if (d := self._cached("pairs", key)) is not None:
            return d
        sim_path = self._upstream("groundtruth", self.groundtruth_key(), "similarity.csv", self.groundtruth)
        feat_path = self._upstream("features", self.features_key(scheme), "features.npz", lambda: self.features(scheme))
        d = self._begin("pairs", key)
        with open(sim_path, encoding="utf-8") as fh:
            graph = cooccur.filter_graph(cooccur.parse_similarity_csv(fh), threshold)
        features = FeatureMatrix.load(feat_path)
        chosen = select_pairs(graph, self.cfg.limit)
        ds = build_pair_matrix(chosen, features, both_orientations=self.cfg.both_orientations)
        ds = split(ds, self.cfg.test_fraction, seed=self.cfg.seed)
        with open(d / "pairs.csv", "w", encoding="utf-8") as fh:
            ds.write_pairs_csv(fh)
        with open(d / "dataset.npz", "wb") as fh:
            ds.save(fh)
        return self._finish(d)

    def train(self, scheme: str, threshold: float, spec: ModelSpec) -> Path:
        key = self.train_key(scheme, threshold, spec)
        if (d := self._cached("train", key)) is not None:
            return d
        ds_path = self._upstream("pairs", self.pairs_key(scheme, threshold), "dataset.npz", lambda: self.pairs(scheme, threshold))
        d = self._begin("train", key)
        ds = PairDataset.load(ds_path)
        cell = train_cell(ds, spec, seed=self.cfg.seed)
        if cell.model is not None:
            with open(d / "model.json", "w", encoding="utf-8") as fh:
                save_model(cell.model, fh, seed=self.cfg.seed)
        with open(d / "cell.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "spec": spec.to_dict(),
                    "params": cell.params,
                    "scaled": cell.scaled,
                    "cv_scores": cell.cv_scores,
                    "seconds": cell.seconds,
                    "error": cell.error,
                },
                fh,
            )
        return self._finish(d)

    def _load_cell(self, d: Path) -> TrainedCell:
        with open(d / "cell.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        model = None
        if (d / "model.json").exists():
            with open(d / "model.json", encoding="utf-8") as fh:
                model = load_model(fh)
        return TrainedCell(model, meta["params"], meta["scaled"], meta["cv_scores"], meta["seconds"], meta["error"])

    def evaluate(self) -> list[EvalReport]:
        key = self.evaluate_key()
        d = self._cached("evaluate", key)
        cells = [(s, t, m) for s in self.cfg.schemes for t in self.cfg.thresholds for m in self.cfg.models]
        if d is None:
            train_dirs = [
                self._upstream("train", self.train_key(s, t, m), "cell.json", lambda s=s, t=t, m=m: self.train(s, t, m)).parent
                for s, t, m in cells
            ]
            d = self._begin("evaluate", key)
            reports = []
            for (s, t, m), td in zip(cells, train_dirs):
                ds_path = self._upstream("pairs", self.pairs_key(s, t), "dataset.npz", lambda: None)
                ds = PairDataset.load(ds_path)
                reports.append(evaluate_cell(ds, m, self._load_cell(td), s, t))
            with open(d / "reports.csv", "w", encoding="utf-8", newline="") as fh:
                write_reports_csv(reports, fh)
            with open(d / "timings.csv", "w", encoding="utf-8", newline="") as fh:
                write_timings_csv(reports, fh)
            (d / "tables.txt").write_text(render_tables(reports), encoding="utf-8")
            self._finish(d)
        for name in ("reports.csv", "timings.csv", "tables.txt"):
            shutil.copyfile(d / name, self.root / name)
        with open(d / "reports.csv", encoding="utf-8") as fh, open(d / "timings.csv", encoding="utf-8") as tf:
            return read_reports_csv(fh, tf)

    def run_stage(self, stage: str, scheme: str | None = None, threshold: float | None = None):
        """Run one stage for every (scheme, threshold, model) it covers in the config."""
        schemes = (scheme,) if scheme else self.cfg.schemes
        thresholds = (threshold,) if threshold is not None else self.cfg.thresholds
        try:
            if stage == "ingest":
                return self.ingest()
            if stage == "groundtruth":
                return self.groundtruth()
            if stage == "features":
                return [self.features(s) for s in schemes]
            if stage == "pairs":
                return [self.pairs(s, t) for s in schemes for t in thresholds]
            if stage == "train":
                return [self.train(s, t, m) for s in schemes for t in thresholds for m in self.cfg.models]
            if stage == "evaluate":
                return self.evaluate()
        except (MissingArtifactError, ingest.DataError):
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc
        raise ValueError(f"unknown stage {stage!r}")

    def run(self) -> list[EvalReport]:
        """Every stage, reusing whatever is cached."""
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / "config.json", "w", encoding="utf-8") as fh:
            json.dump(self.cfg.to_dict(), fh, indent=2, sort_keys=True)
        for stage in STAGES[:-1]:
            self.run_stage(stage)
        return self.run_stage("evaluate")


def cmd_pipeline(config: RunConfig) -> list[EvalReport]:
    with workdir_lock(Path(config.workdir)):
        return Pipeline(config, auto=True).run()
