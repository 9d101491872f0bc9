"""
Ground-truth similarity from co-occurrence
==========================================

Two songs are similar when the same users listen to both. Each song is a
binary vector over users and the similarity is the cosine of two such
vectors.
"""

from songsim.cooccur import build_similarity_graph, filter_graph
from songsim.ingest import UserHistory

histories = [
    UserHistory(0, frozenset({0, 1, 2})),
    UserHistory(1, frozenset({0, 1})),
    UserHistory(2, frozenset({2, 3})),
]
g = build_similarity_graph(histories)

for a, b, s in g.edges():
    print(f"{a} - {b}: {s:.4f}")

# songs 0 and 1 share both of their listeners, so they score 1
assert g.similarity(0, 1) == 1.0

# dropping weak edges, as done for the 0.01 and 0.025 datasets
strong = filter_graph(g, 0.5)
print(strong.edge_count, "of", g.edge_count, "edges survive s >= 0.5")
