"""Co-occurrence ground truth: cosine similarity of binary user-incidence vectors."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from .ingest import DataError, ParseIssue, UserHistory, _as_text

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.0, 0.01, 0.025)


def cosine_similarity(x, y) -> float:
    """Cosine of the angle between ``x`` and ``y``; 0 when either has zero norm."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    nx = math.sqrt(float(np.dot(x, x)))
    ny = math.sqrt(float(np.dot(y, y)))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(x, y)) / (nx * ny)


@dataclass
class SimilarityGraph:
    """Undirected weighted song graph stored as a symmetric adjacency map.

    ``adjacency[a][b]`` is the similarity of songs ``a`` and ``b``. Both
    directions are always present; self-loops never are.
    """

    adjacency: dict[int, dict[int, float]] = field(default_factory=dict)

    def add_edge(self, a: int, b: int, sim: float) -> None:
        if a == b:
            raise ValueError("self-loops are not allowed")
        if not 0.0 <= sim <= 1.0:
            raise ValueError(f"similarity {sim} outside [0, 1]")
        self.adjacency.setdefault(a, {})[b] = sim
        self.adjacency.setdefault(b, {})[a] = sim

    @property
    def edge_count(self) -> int:
        return sum(len(n) for n in self.adjacency.values()) // 2

    def nodes(self) -> list[int]:
        return sorted(self.adjacency)

    def neighbors(self, node: int) -> list[tuple[int, float]]:
        return sorted(self.adjacency.get(node, {}).items())

    def degree(self, node: int) -> int:
        return len(self.adjacency.get(node, ()))

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Each undirected edge once as ``(smaller id, larger id, sim)``, sorted."""
        for a in sorted(self.adjacency):
            for b, s in sorted(self.adjacency[a].items()):
                if a < b:
                    yield a, b, s

    def similarity(self, a: int, b: int) -> float | None:
        return self.adjacency.get(a, {}).get(b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimilarityGraph):
            return NotImplemented
        strip = lambda g: {k: v for k, v in g.adjacency.items() if v}
        return strip(self) == strip(other)

    def write_csv(self, fh: IO[str]) -> None:
        for a, b, s in self.edges():
            fh.write(f"{a},{b},{s!r}\n")


def build_similarity_graph(histories: Iterable[UserHistory]) -> SimilarityGraph:
    """Ground-truth graph from listening histories.

    The weight of songs ``i`` and ``j`` is ``|U_i & U_j| / sqrt(|U_i| |U_j|)``
    where ``U_i`` is the set of users who listened to ``i``. Pairs that share
    no listener get no edge.
    """
    histories = list(histories)
    if not histories:
        raise DataError("no user histories")
    rows, cols = [], []
    for u, h in enumerate(histories):
        for s in h.song_ids:
            rows.append(s)
            cols.append(u)
    n_songs = max(rows) + 1 if rows else 0
    incidence = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)),
        shape=(n_songs, len(histories)),
    )
    listeners = np.asarray(incidence.sum(axis=1)).ravel()
    shared = sp.triu(incidence @ incidence.T, k=1).tocoo()

    graph = SimilarityGraph()
    for i, j, c in zip(shared.row.tolist(), shared.col.tolist(), shared.data.tolist()):
        if c == 0:
            continue
        graph.add_edge(i, j, c / math.sqrt(float(listeners[i]) * float(listeners[j])))
    return graph


def filter_graph(g: SimilarityGraph, min_similarity: float) -> SimilarityGraph:
    """Keep the edges with similarity ``>= min_similarity``."""
    if not 0.0 <= min_similarity < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    out = SimilarityGraph()
    for a, b, s in g.edges():
        if s >= min_similarity:
            out.add_edge(a, b, s)
    return out


def parse_similarity_csv(stream, issues: list[ParseIssue] | None = None) -> SimilarityGraph:
    """Read ``id1,id2,sim`` rows; later duplicates overwrite earlier ones.

    Self-pairs are ignored silently. Rows with a similarity outside ``[0, 1]``
    or unparsable fields are rejected and recorded in ``issues``.
    """
    graph = SimilarityGraph()
    bad = []
    for lineno, row in enumerate(csv.reader(_as_text(stream)), 1):
        if not row or (lineno == 1 and not row[0].strip().lstrip("-").isdigit()):
            continue
        try:
            a, b, s = int(row[0]), int(row[1]), float(row[2])
            if len(row) != 3:
                raise ValueError("expected 3 fields")
        except (ValueError, IndexError) as exc:
            bad.append(ParseIssue(lineno, str(exc)))
            continue
        if not 0.0 <= s <= 1.0:
            bad.append(ParseIssue(lineno, f"similarity {s} outside [0, 1]"))
            continue
        if a == b:
            continue
        graph.add_edge(a, b, s)
    if bad:
        logger.warning("rejected %d similarity row(s)", len(bad))
        if issues is not None:
            issues.extend(bad)
    return graph
