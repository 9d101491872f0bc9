"""
Skip-gram tag embeddings
========================

Every song is a sentence of fused artist, album and title tokens followed by
its tags. Tags that keep appearing together end up with similar vectors.
"""

import numpy as np

from songsim.embed import SkipGramParams, build_corpus, song_vector, train_skipgram
from songsim.ingest import SongRecord

rng = np.random.default_rng(0)
records = []
for i in range(120):
    g = int(rng.integers(5))
    tags = [(f"g{g}t{j}", int(rng.integers(1, 100))) for j in rng.choice(6, 3, replace=False)]
    if g == 0 and rng.random() < 0.5:
        tags += [("alpha", 60), ("beta", 60)]
    records.append(SongRecord(i, 0, 0, f"song {i}", f"artist {g} {i % 3}", "", tuple(tags)))

corpus = build_corpus(records)
print(corpus.sentences[0])

model = train_skipgram(corpus, SkipGramParams(seed=0))
print("loss per epoch", np.round(model.epoch_loss, 4))
print("alpha~beta ", round(model.similarity("alpha", "beta"), 3))
print("alpha~g3t0 ", round(model.similarity("alpha", "g3t0"), 3))

# song vectors mix tag vectors by count, with the artist at weight 100
print(song_vector(records[0], model)[:5])
