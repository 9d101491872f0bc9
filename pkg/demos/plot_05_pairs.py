"""
From a similarity graph to a regression dataset
===============================================

Edges of the similarity graph are collected breadth first. A pair becomes the
difference of the two songs' feature rows, labelled with the edge weight.
"""

import numpy as np

from songsim.cooccur import SimilarityGraph
from songsim.features import FeatureMatrix
from songsim.pairs import build_pair_matrix, select_pairs, split

g = SimilarityGraph()
for a, b, s in [(0, 1, 0.3), (1, 2, 0.6), (2, 3, 0.1), (1, 3, 0.8), (4, 5, 0.5)]:
    g.add_edge(a, b, s)

pairs = select_pairs(g, limit=10)
print(pairs)

fm = FeatureMatrix(np.arange(6), np.random.default_rng(0).standard_normal((6, 3)), "tfidf")
ds = split(build_pair_matrix(pairs, fm), test_fraction=0.2, seed=0)
print("train rows", ds.train_mask.sum(), "test rows", (~ds.train_mask).sum())

# scaling parameters come from the train rows only
scaled = ds.scaled()
print("train means", np.round(scaled.train[0].mean(axis=0), 12))
print("test means ", np.round(scaled.test[0].mean(axis=0), 3))
