"""
Tag tf-idf and truncated SVD
============================

Each song's tags form a document whose term counts are the tag counts.
The weighted matrix is reduced with a randomized truncated SVD.
"""

import io
import json

import numpy as np

from songsim.ingest import build_song_records, parse_song_docs
from songsim.synth import SynthSpec, generate
from songsim.tfidf import build_documents, fit_truncated_svd, fit_vocabulary, tfidf_transform

corpus = generate(SynthSpec(n_songs=300, n_users=50, n_genres=4, seed=0))
lines = "".join(json.dumps(s) + "\n" for s in corpus.songs)
records, _ = build_song_records(parse_song_docs(io.StringIO(lines)))

texts = build_documents(records)
vocab = fit_vocabulary(texts, max_terms=5000)
m = tfidf_transform(texts, vocab)
print("tf-idf matrix", m.shape, "non-zeros", m.nnz)

# rows are unit length
print(np.sqrt(m.multiply(m).sum(axis=1)).A1[:5])

svd = fit_truncated_svd(m, 10, seed=0)
dense = np.linalg.svd(m.toarray(), compute_uv=False)[:10]
print("randomized:", np.round(svd.singular_values, 6))
print("dense     :", np.round(dense, 6))
