"""Tag-document tf-idf features reduced by randomized truncated SVD."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .features import FeatureMatrix
from .ingest import SongRecord

logger = logging.getLogger(__name__)

DEFAULT_MAX_TERMS = 5000
DEFAULT_COMPONENTS = 100


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, term: str) -> int | None:
        return self._index.get(term)

    @property
    def idf(self) -> np.ndarray:
        """Smoothed idf, ``ln((1 + N) / (1 + df)) + 1``."""
        df = np.asarray(self.doc_freq, dtype=float)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0


def build_documents(records: Iterable[SongRecord]) -> list[dict[str, int]]:
    """One bag of tags per song, each tag counted as often as users applied it.

    Songs without tags keep an empty document (and a zero feature row).
    """
    docs = [dict(rec.tags) for rec in records]
    empty = sum(1 for d in docs if not d)
    if empty:
        logger.warning("%d song(s) have no tags; their tf-idf rows are zero", empty)
    return docs


def fit_vocabulary(docs: Sequence[Mapping[str, int]], max_terms: int = DEFAULT_MAX_TERMS) -> Vocabulary:
    """Keep the ``max_terms`` terms found in the most documents.

    Ties go to the lexicographically smaller term, and ids follow the same
    (document frequency desc, term asc) order.
    """
    if max_terms < 1:
        raise ValueError("max_terms must be positive")
    df = Counter()
    for d in docs:
        df.update(t for t, c in d.items() if c > 0)
    if not df:
        raise ValueError("cannot fit a vocabulary: every document is empty")
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:max_terms]
    return Vocabulary(
        terms=tuple(t for t, _ in ranked),
        doc_freq=tuple(c for _, c in ranked),
        n_docs=len(docs),
        max_terms=max_terms,
    )


def tfidf_transform(docs: Sequence[Mapping[str, int]], vocab: Vocabulary) -> sp.csr_matrix:
    """Raw-count tf times smoothed idf, each row scaled to unit L2 norm.

    Terms missing from ``vocab`` are ignored; a document with no known term
    stays an all-zero row.
    """
    idf = vocab.idf
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for d in docs:
        row = sorted((j, c) for t, c in d.items() if c > 0 and (j := vocab.index(t)) is not None)
        weights = np.array([c * idf[j] for j, c in row], dtype=float)
        norm = math.sqrt(float(weights @ weights)) if len(row) else 0.0
        if norm > 0:
            weights /= norm
        indices.extend(j for j, _ in row)
        data.extend(weights.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(docs), len(vocab)),
    )


@dataclass(frozen=True)
class SvdModel:
    components: np.ndarray  # (k, n_terms), orthonormal rows
    singular_values: np.ndarray  # (k,), descending
    seed: int = 0

    @property
    def k(self) -> int:
        return self.components.shape[0]


def _orth(a: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(a)
    return q


def fit_truncated_svd(
    m,
    k: int = DEFAULT_COMPONENTS,
    seed: int = 0,
    n_oversamples: int = 10,
    n_power_iter: int = 2,
    tol: float | None = 1e-12,
    max_iter: int = 500,
) -> SvdModel:
    """Top-``k`` right singular vectors of ``m`` by randomized subspace iteration.

    A Gaussian test matrix with ``k + n_oversamples`` columns sketches the
    range of ``m``; ``n_power_iter`` rounds of QR-stabilised subspace iteration
    sharpen it. With ``tol`` set, iteration continues past that point until the
    top-``k`` Ritz values change by less than ``tol`` (relative) between rounds,
    or ``max_iter`` rounds have run. ``tol=None`` gives the plain fixed-round
    algorithm.
    """
    n_rows, n_cols = m.shape
    if not 1 <= k <= min(n_rows, n_cols):
        raise ValueError(f"k={k} must lie in [1, {min(n_rows, n_cols)}]")
    if sp.issparse(m):
        m = m.tocsr()
        mt = m.T.tocsr()
    else:
        m = np.asarray(m, dtype=float)
        mt = m.T
    rng = np.random.default_rng(seed)
    width = min(k + n_oversamples, min(n_rows, n_cols))

    def step(q):
        return _orth(np.asarray(m @ _orth(np.asarray(mt @ q))))

    q = _orth(np.asarray(m @ rng.standard_normal((n_cols, width))))
    for _ in range(n_power_iter):
        q = step(q)
    if tol is not None:
        prev = np.linalg.svd(np.asarray(mt @ q).T, compute_uv=False)[:k]
        for _ in range(max_iter):
            q = step(q)
            s = np.linalg.svd(np.asarray(mt @ q).T, compute_uv=False)[:k]
            if np.all(np.abs(s - prev) <= tol * max(s[0], 1e-300)):
                break
            prev = s

    b = np.asarray(mt @ q).T  # (width, n_cols) = q.T @ m
    _, s, vt = np.linalg.svd(b, full_matrices=False)
    vt = vt[:k]
    # Sign convention: largest-magnitude entry of each component positive.
    flip = np.sign(vt[np.arange(k), np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    return SvdModel(components=vt * flip[:, None], singular_values=s[:k].copy(), seed=seed)


def project(m, svd: SvdModel) -> np.ndarray:
    """Rows of ``m`` expressed in the SVD component basis."""
    if m.shape[1] != svd.components.shape[1]:
        raise ValueError(f"matrix has {m.shape[1]} terms, model expects {svd.components.shape[1]}")
    return np.asarray(m @ svd.components.T)


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: Vocabulary
    svd: SvdModel

    def transform(self, records: Sequence[SongRecord]) -> FeatureMatrix:
        docs = build_documents(records)
        values = project(tfidf_transform(docs, self.vocabulary), self.svd)
        return FeatureMatrix(ids=np.array([r.song_id for r in records], dtype=np.int64), values=values, scheme="tfidf")

    def save(self, fh: IO[str]) -> None:
        doc = {
            "format": "songsim.tfidf/1",
            "n_docs": self.vocabulary.n_docs,
            "max_terms": self.vocabulary.max_terms,
            "vocabulary": [
                [t, i, df] for i, (t, df) in enumerate(zip(self.vocabulary.terms, self.vocabulary.doc_freq))
            ],
            "idf": self.vocabulary.idf.tolist(),
            "k": self.svd.k,
            "seed": self.svd.seed,
            "singular_values": self.svd.singular_values.tolist(),
            "components": self.svd.components.tolist(),
        }
        json.dump(doc, fh)

    @classmethod
    def load(cls, fh: IO[str]) -> "TfidfModel":
        doc = json.load(fh)
        if doc.get("format") != "songsim.tfidf/1":
            raise ValueError("not a tf-idf model file")
        vocab = sorted(doc["vocabulary"], key=lambda e: e[1])
        vocabulary = Vocabulary(
            terms=tuple(t for t, _, _ in vocab),
            doc_freq=tuple(int(df) for _, _, df in vocab),
            n_docs=int(doc["n_docs"]),
            max_terms=int(doc["max_terms"]),
        )
        svd = SvdModel(
            components=np.array(doc["components"], dtype=float).reshape(int(doc["k"]), len(vocabulary)),
            singular_values=np.array(doc["singular_values"], dtype=float),
            seed=int(doc["seed"]),
        )
        return cls(vocabulary, svd)


def fit_tfidf_features(
    records: Sequence[SongRecord],
    max_terms: int = DEFAULT_MAX_TERMS,
    k: int = DEFAULT_COMPONENTS,
    seed: int = 0,
) -> tuple[TfidfModel, FeatureMatrix]:
    """Fit vocabulary, idf and SVD on ``records`` and return their features.

    ``k`` is reduced to the matrix rank bound when the corpus is too small to
    support it.
    """
    docs = build_documents(records)
    vocab = fit_vocabulary(docs, max_terms)
    m = tfidf_transform(docs, vocab)
    k = min(k, *m.shape)
    model = TfidfModel(vocab, fit_truncated_svd(m, k, seed=seed))
    values = project(m, model.svd)
    return model, FeatureMatrix(ids=np.array([r.song_id for r in records], dtype=np.int64), values=values, scheme="tfidf")
