"""Learning song-song similarity from user tags and metadata.

Ground truth comes from listening co-occurrence; features come from tag
tf-idf reduced by truncated SVD or from skip-gram embeddings; pair features
are feature differences, scored by OLS, SVR, k-NN and LSH-forest k-NN.
"""

from .cooccur import SimilarityGraph, build_similarity_graph, cosine_similarity, filter_graph
from .features import FeatureMatrix
from .ingest import SongRecord, build_song_records, normalize_text, parse_histories, parse_song_docs
from .metrics import r2_score, rmse
from .pairs import PairDataset, build_pair_matrix, select_pairs, split

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix",
    "PairDataset",
    "SimilarityGraph",
    "SongRecord",
    "build_pair_matrix",
    "build_similarity_graph",
    "build_song_records",
    "cosine_similarity",
    "filter_graph",
    "normalize_text",
    "parse_histories",
    "parse_song_docs",
    "r2_score",
    "rmse",
    "select_pairs",
    "split",
]
