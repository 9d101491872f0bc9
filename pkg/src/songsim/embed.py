"""Skip-gram (negative sampling) embeddings over song metadata and tags.

Every song contributes one sentence: its artist, album and title, each fused
into a single token, followed by its tags. Song vectors are the count-weighted
mean of tag vectors plus the artist vector at the maximum tag weight.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Sequence

import numba
import numpy as np

from .features import FeatureMatrix
from .ingest import MAX_TAG_COUNT, SongRecord

logger = logging.getLogger(__name__)

ARTIST_WEIGHT = MAX_TAG_COUNT


def fuse(text: str) -> str:
    return text.replace(" ", "")


@dataclass(frozen=True)
class Corpus:
    sentences: list[list[str]]
    counts: dict[str, int]

    @property
    def vocab(self) -> list[str]:
        """Tokens by descending frequency, ties in lexicographic order."""
        return sorted(self.counts, key=lambda t: (-self.counts[t], t))


def build_corpus(records: Sequence[SongRecord]) -> Corpus:
    sentences = []
    for rec in records:
        head = [fuse(rec.artist_norm), fuse(rec.album_norm), fuse(rec.name_norm)]
        tags = sorted(rec.tags, key=lambda tc: (-tc[1], tc[0]))
        sent = [t for t in head if t] + [fuse(t) for t, _ in tags if fuse(t)]
        sentences.append(sent)
    counts = Counter(tok for s in sentences for tok in s)
    return Corpus(sentences, dict(counts))


@dataclass(frozen=True)
class SkipGramParams:
    dim: int = 100
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    window: int | None = None  # None: the whole sentence is context
    ns_exponent: float = 0.75
    seed: int = 0
    workers: int = 1


@dataclass
class EmbeddingModel:
    tokens: list[str]
    vectors: np.ndarray
    params: SkipGramParams = field(default_factory=SkipGramParams)
    epoch_loss: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self._index[token]]

    def similarity(self, a: str, b: str) -> float:
        va, vb = self[a], self[b]
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        return float(va @ vb / denom) if denom > 0 else 0.0

    def save(self, fh: IO[str]) -> None:
        """Write the conventional text word-vector format."""
        fh.write(f"{len(self.tokens)} {self.dim}\n")
        for tok, vec in zip(self.tokens, self.vectors):
            fh.write(tok + " " + " ".join(format(x, ".17g") for x in vec) + "\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "EmbeddingModel":
        n, dim = (int(x) for x in fh.readline().split())
        tokens = []
        vectors = np.empty((n, dim))
        for i in range(n):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"vector line {i + 2}: expected {dim} values")
            tokens.append(parts[0])
            vectors[i] = [float(x) for x in parts[1:]]
        return cls(tokens, vectors, SkipGramParams(dim=dim))


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x > 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@numba.njit(cache=True)
def _sgns_update(w_in, w_out, c, o, negs, lr, work):
    dim = w_in.shape[1]
    for d in range(dim):
        work[d] = 0.0
    loss = 0.0
    for t in range(negs.shape[0] + 1):
        if t == 0:
            target = o
            label = 1.0
        else:
            target = negs[t - 1]
            if target == o:
                continue
            label = 0.0
        f = 0.0
        for d in range(dim):
            f += w_in[c, d] * w_out[target, d]
        if label > 0:
            loss -= _log_sigmoid(f)
        else:
            loss -= _log_sigmoid(-f)
        g = (label - 1.0 / (1.0 + np.exp(-f))) * lr
        for d in range(dim):
            work[d] += g * w_out[target, d]
            w_out[target, d] += g * w_in[c, d]
    for d in range(dim):
        w_in[c, d] += work[d]
    return loss


@numba.njit(cache=True)
def _sgns_epoch(w_in, w_out, centers, contexts, negs, lr0, lr1):
    n = centers.shape[0]
    work = np.empty(w_in.shape[1])
    total = 0.0
    for p in range(n):
        lr = lr0 + (lr1 - lr0) * p / max(n - 1, 1)
        total += _sgns_update(w_in, w_out, centers[p], contexts[p], negs[p], lr, work)
    return total


@numba.njit(cache=True, parallel=True)
def _sgns_epoch_racy(w_in, w_out, centers, contexts, negs, lr0, lr1, n_chunks):
    # Lock-free updates from several threads; results depend on scheduling.
    n = centers.shape[0]
    total = 0.0
    for chunk in numba.prange(n_chunks):
        work = np.empty(w_in.shape[1])
        start = chunk * n // n_chunks
        stop = (chunk + 1) * n // n_chunks
        for p in range(start, stop):
            lr = lr0 + (lr1 - lr0) * p / max(n - 1, 1)
            total += _sgns_update(w_in, w_out, centers[p], contexts[p], negs[p], lr, work)
    return total


def _context_pairs(sentences: list[np.ndarray], window: int | None) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for s in sentences:
        n = len(s)
        for i in range(n):
            lo, hi = (0, n) if window is None else (max(0, i - window), min(n, i + window + 1))
            for j in range(lo, hi):
                if j != i:
                    centers.append(s[i])
                    contexts.append(s[j])
    return np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


def train_skipgram(corpus: Corpus, params: SkipGramParams = SkipGramParams()) -> EmbeddingModel:
    """Train skip-gram vectors with negative sampling.

    Sentence order is reshuffled every epoch and negatives are drawn from the
    unigram distribution raised to ``ns_exponent``, all from one generator
    seeded by ``params.seed``. The learning rate decays linearly from
    ``learning_rate`` to ``min_learning_rate`` over the whole run. With
    ``workers == 1`` training is bit-for-bit reproducible.
    """
    if not any(corpus.sentences):
        raise ValueError("cannot train on an empty corpus")
    tokens = corpus.vocab
    index = {t: i for i, t in enumerate(tokens)}
    encoded = [np.array([index[t] for t in s], dtype=np.int64) for s in corpus.sentences if s]
    freq = np.array([corpus.counts[t] for t in tokens], dtype=float) ** params.ns_exponent
    noise = np.cumsum(freq / freq.sum())
    noise[-1] = 1.0

    rng = np.random.default_rng(params.seed)
    w_in = (rng.random((len(tokens), params.dim)) - 0.5) / params.dim
    w_out = np.zeros((len(tokens), params.dim))

    lr_span = np.linspace(params.learning_rate, params.min_learning_rate, params.epochs + 1)
    losses = []
    for epoch in range(params.epochs):
        order = rng.permutation(len(encoded))
        centers, contexts = _context_pairs([encoded[i] for i in order], params.window)
        negs = np.searchsorted(noise, rng.random((len(centers), params.negatives)), side="right")
        negs = np.minimum(negs, len(tokens) - 1).astype(np.int64)
        if len(centers) == 0:
            losses.append(0.0)
            continue
        lr0, lr1 = lr_span[epoch], lr_span[epoch + 1]
        if params.workers > 1:
            total = _sgns_epoch_racy(w_in, w_out, centers, contexts, negs, lr0, lr1, params.workers)
        else:
            total = _sgns_epoch(w_in, w_out, centers, contexts, negs, lr0, lr1)
        losses.append(total / len(centers))
        logger.debug("epoch %d: mean loss %.6f", epoch, losses[-1])
    return EmbeddingModel(tokens, w_in, params, losses)


def song_vector(record: SongRecord, emb: EmbeddingModel) -> np.ndarray:
    """Weighted mean of the song's tag vectors and its artist vector.

    Tag vectors weigh their tag count and the artist vector weighs 100. Tags
    missing from the model are left out of both numerator and denominator.
    """
    artist = fuse(record.artist_norm)
    if artist not in emb:
        raise KeyError(f"artist token {artist!r} of song {record.song_id} is not in the embedding vocabulary")
    total = ARTIST_WEIGHT * emb[artist]
    weight = float(ARTIST_WEIGHT)
    for tag, count in record.tags:
        tok = fuse(tag)
        if tok in emb:
            total = total + count * emb[tok]
            weight += count
    return total / weight


def build_feature_matrix_embed(records: Sequence[SongRecord], emb: EmbeddingModel) -> FeatureMatrix:
    values = np.empty((len(records), emb.dim))
    for i, rec in enumerate(records):
        values[i] = song_vector(rec, emb)
    return FeatureMatrix(ids=np.array([r.song_id for r in records], dtype=np.int64), values=values, scheme="embed")
