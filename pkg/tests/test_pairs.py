import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from songsim.cooccur import SimilarityGraph
from songsim.features import FeatureMatrix
from songsim.pairs import (
    PairDataset,
    apply_scaler,
    build_pair_matrix,
    fit_scaler,
    select_pairs,
    split,
)


def graph(*edges):
    g = SimilarityGraph()
    for a, b, s in edges:
        g.add_edge(a, b, s)
    return g


def features(table, scheme="tfidf"):
    ids = sorted(table)
    return FeatureMatrix(np.array(ids, dtype=np.int64), np.array([table[i] for i in ids], dtype=float), scheme)


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 12))
    possible = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(possible), min_size=1, unique=True))
    g = SimilarityGraph()
    for a, b in chosen:
        g.add_edge(a, b, draw(st.floats(0.01, 1.0)))
    return g


class TestSelectPairs:
    def test_triangle_exhausted(self):
        g = graph((0, 1, 0.5), (1, 2, 0.25), (0, 2, 1.0))
        assert len(select_pairs(g, 10)) == 3

    def test_limit_one(self):
        g = graph((0, 1, 0.5), (1, 2, 0.25), (0, 2, 1.0))
        assert len(select_pairs(g, 1)) == 1

    def test_two_components(self):
        # All degrees equal: start at 0, emit (0,1); then restart at 2.
        g = graph((2, 3, 0.7), (0, 1, 0.4))
        assert select_pairs(g, 10) == [(0, 1, 0.4), (2, 3, 0.7)]

    def test_starts_at_hub(self):
        # Node 2 has degree 2, so its edges come first, then the component of 5.
        g = graph((5, 6, 0.1), (1, 2, 0.2), (2, 3, 0.3))
        assert select_pairs(g, 10) == [(1, 2, 0.2), (2, 3, 0.3), (5, 6, 0.1)]

    def test_breadth_first_order(self):
        # Path 3-0-1-2 plus 0-4: hub is 0; its edges come before the 1-2 edge.
        g = graph((0, 3, 0.1), (0, 1, 0.2), (1, 2, 0.3), (0, 4, 0.4))
        assert select_pairs(g, 10) == [(0, 1, 0.2), (0, 3, 0.1), (0, 4, 0.4), (1, 2, 0.3)]

    def test_canonical_orientation(self):
        g = graph((9, 4, 0.5))
        assert select_pairs(g, 5) == [(4, 9, 0.5)]

    def test_empty_graph(self):
        with pytest.raises(ValueError):
            select_pairs(SimilarityGraph(), 5)

    def test_bad_limit(self):
        with pytest.raises(ValueError):
            select_pairs(graph((0, 1, 0.5)), 0)

    def test_seeded_shuffle_is_deterministic(self):
        g = graph(*[(0, i, i / 10) for i in range(1, 9)])
        a, b = select_pairs(g, 8, seed=3), select_pairs(g, 8, seed=3)
        assert a == b
        assert sorted(a) == select_pairs(g, 8)

    @settings(max_examples=60, deadline=None)
    @given(graphs(), st.integers(1, 80), st.one_of(st.none(), st.integers(0, 5)))
    def test_unique_edges_and_size(self, g, limit, seed):
        out = select_pairs(g, limit, seed)
        assert len(out) == min(limit, g.edge_count)
        keys = [(a, b) for a, b, _ in out]
        assert len(set(keys)) == len(keys)
        for a, b, s in out:
            assert a < b
            assert g.similarity(a, b) == s


class TestBuildPairMatrix:
    def test_hand_subtraction(self):
        ds = build_pair_matrix([(0, 1, 0.3)], features({0: [1.0, 2.0], 1: [0.5, 0.0]}))
        assert ds.X.tolist() == [[0.5, 2.0]]
        assert ds.y.tolist() == [0.3]
        assert ds.pairs.tolist() == [[0, 1]]

    def test_identical_rows(self):
        ds = build_pair_matrix([(0, 1, 1.0)], features({0: [3.0, 3.0], 1: [3.0, 3.0]}))
        assert np.all(ds.X == 0)

    def test_missing_id(self):
        with pytest.raises(KeyError, match="42"):
            build_pair_matrix([(0, 42, 0.1)], features({0: [1.0]}))

    def test_both_orientations(self):
        ds = build_pair_matrix([(0, 1, 0.3)], features({0: [1.0], 1: [4.0]}), both_orientations=True)
        assert ds.X.ravel().tolist() == [-3.0, 3.0]
        assert ds.y.tolist() == [0.3, 0.3]

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=6).flatmap(
        lambda a: st.tuples(st.just(a), st.lists(st.floats(-1e6, 1e6), min_size=len(a), max_size=len(a)))
    ))
    def test_antisymmetry(self, rows):
        fa, fb = rows
        fm = features({0: fa, 1: fb})
        ab = build_pair_matrix([(0, 1, 0.5)], fm)
        ba = build_pair_matrix([(1, 0, 0.5)], fm)
        assert np.array_equal(ab.X, -ba.X)
        assert np.array_equal(ab.y, ba.y)

    def test_keeps_scheme(self):
        assert build_pair_matrix([(0, 1, 0.3)], features({0: [1.0], 1: [0.0]}, "embed")).scheme == "embed"


def toy_dataset(n, m=3, seed=0):
    rng = np.random.default_rng(seed)
    return PairDataset(X=rng.standard_normal((n, m)), y=rng.random(n), pairs=np.arange(2 * n).reshape(n, 2))


class TestSplit:
    @pytest.mark.parametrize("n, frac, n_test", [(10, 0.2, 2), (4, 0.5, 2), (5, 0.3, 2), (7, 0.5, 4), (1000, 0.2, 200)])
    def test_sizes(self, n, frac, n_test):
        ds = split(toy_dataset(n), frac, seed=1)
        assert int((~ds.train_mask).sum()) == n_test
        assert len(ds.train[1]) + len(ds.test[1]) == n

    def test_deterministic(self):
        a, b = split(toy_dataset(50), seed=7), split(toy_dataset(50), seed=7)
        assert np.array_equal(a.train_mask, b.train_mask)
        assert not np.array_equal(a.train_mask, split(toy_dataset(50), seed=8).train_mask)

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            split(toy_dataset(10), frac)

    def test_disjoint_and_exhaustive(self):
        ds = split(toy_dataset(30), 0.25, seed=2)
        train_rows = {tuple(r) for r in ds.train[0].tolist()}
        test_rows = {tuple(r) for r in ds.test[0].tolist()}
        assert not train_rows & test_rows
        assert len(train_rows) + len(test_rows) == 30


class TestScaler:
    def test_hand_values(self):
        p = fit_scaler([[1.0], [2.0], [3.0]])
        assert p.mean.tolist() == [2.0]
        assert p.std[0] == pytest.approx(0.81650, abs=1e-5)
        np.testing.assert_allclose(apply_scaler([[1.0], [2.0], [3.0]], p).ravel(), [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_population_std(self):
        rows = np.array([[1.0], [2.0], [3.0]])
        assert fit_scaler(rows).std[0] == np.sqrt(2.0 / 3.0)

    def test_constant_column(self):
        p = fit_scaler([[5.0, 1.0], [5.0, 2.0]])
        assert p.std[0] == 1e-12
        scaled = apply_scaler([[5.0, 1.0], [6.0, 1.0]], p)
        assert scaled[0, 0] == 0.0
        assert abs(scaled[1, 0]) > 1e11

    def test_standardized_column(self):
        col = np.array([[-1.0], [1.0], [-1.0], [1.0]])
        p = fit_scaler(col)
        assert p.mean[0] == pytest.approx(0.0) and p.std[0] == pytest.approx(1.0)

    def test_not_idempotent(self):
        rows = np.array([[1.0], [2.0], [10.0]])
        p = fit_scaler(rows)
        once = apply_scaler(rows, p)
        assert not np.allclose(apply_scaler(once, p), once)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_scaler([[1.0, 2.0]])
        with pytest.raises(ValueError):
            apply_scaler([[1.0, 2.0]], fit_scaler([[1.0], [2.0]]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(5, 60), st.integers(1, 6), st.integers(0, 1000))
    def test_train_standardized(self, n, m, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, m)) * rng.uniform(0.01, 100, m) + rng.uniform(-50, 50, m)
        ds = split(PairDataset(X=X, y=rng.random(n), pairs=np.zeros((n, 2), dtype=np.int64)), 0.2, seed).scaled()
        Xtr, _ = ds.train
        assert np.all(np.abs(Xtr.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(Xtr.var(axis=0) - 1) < 1e-6)
        # Test rows use the train parameters, not their own.
        np.testing.assert_allclose(ds.test[0], (X[~ds.train_mask] - ds.scaler.mean) / ds.scaler.std)

    def test_scaled_requires_split(self):
        with pytest.raises(ValueError):
            toy_dataset(5).scaled()


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds = split(toy_dataset(20), seed=4).scaled()
        ds.save(tmp_path / "pairs.npz")
        back = PairDataset.load(tmp_path / "pairs.npz")
        for name in ("X", "y", "pairs", "train_mask"):
            assert np.array_equal(getattr(back, name), getattr(ds, name))
        assert np.array_equal(back.scaler.std, ds.scaler.std)
        assert back.seeds == ds.seeds

    def test_end_to_end_deterministic(self):
        g = graph(*[(i, j, (i + j) / 20) for i in range(6) for j in range(i + 1, 6)])
        fm = features({i: [float(i), float(i * i)] for i in range(6)})
        a = split(build_pair_matrix(select_pairs(g, 10), fm), seed=1)
        b = split(build_pair_matrix(select_pairs(g, 10), fm), seed=1)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.train_mask, b.train_mask)
