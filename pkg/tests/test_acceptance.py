"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from songsim.cooccur import build_similarity_graph
from songsim.embed import SkipGramParams, build_corpus, train_skipgram
from songsim.ingest import SongRecord, UserHistory
from songsim.metrics import r2_score, rmse
from songsim.models import fit_knn, fit_lsh, fit_svr, nearest
from songsim.models.svr import kernel_matrix
from songsim.pairs import PairDataset, split
from songsim.pipeline import Pipeline, RunConfig
from songsim.synth import SynthSpec, cmd_synth
from songsim.tfidf import fit_truncated_svd, project

from .oracles import brute_force_cooccurrence, svr_dual_qp


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail, seconds, limit):
        ok = bool(ok) and seconds < limit
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail} ({seconds:.2f}s, limit {limit:g}s)")
        return ok

    return emit


def test_criterion_1_metric_identities(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    ok = True
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 50))
        y = rng.standard_normal(n)
        yhat = y + rng.standard_normal(n)
        ok &= r2_score(y, y) == 1.0
        ok &= r2_score(y, np.full(n, y.mean())) == 0.0
        ok &= rmse(y, y) == 0.0
        ss = float(np.sum((y - y.mean()) ** 2))
        worst = max(worst, abs(r2_score(y, yhat) - (1 - rmse(y, yhat) ** 2 * n / ss)))
    ok &= worst <= 1e-10
    assert verdict(1, ok, f"exact identities hold, worst cross-identity gap {worst:.2e}", time.perf_counter() - start, 1)


def test_criterion_2_cosine_ground_truth(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    ok = True
    for _ in range(100):
        n_songs, n_users = int(rng.integers(2, 21)), int(rng.integers(1, 11))
        hist = [
            UserHistory(u, frozenset(rng.choice(n_songs, size=int(rng.integers(1, n_songs + 1)), replace=False).tolist()))
            for u in range(n_users)
        ]
        g = build_similarity_graph(hist)
        edges = {(a, b): s for a, b, s in g.edges()}
        ok &= edges == brute_force_cooccurrence(hist)
        ok &= all(0.0 <= s <= 1.0 for s in edges.values())
        ok &= all(g.similarity(b, a) == s for (a, b), s in edges.items())
    assert verdict(2, ok, "100 micro-instances equal the incidence-vector oracle", time.perf_counter() - start, 5)


def test_criterion_3_truncated_svd(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(50):
        n, m = (int(v) for v in rng.integers(2, 51, size=2))
        k = int(rng.integers(1, min(n, m) + 1))
        a = rng.standard_normal((n, m))
        oracle = np.linalg.svd(a, compute_uv=False)[:k]
        got = fit_truncated_svd(a, k, seed=i).singular_values
        worst = max(worst, float(np.max(np.abs(got - oracle) / oracle)))
    r1 = np.outer(rng.standard_normal(30), rng.standard_normal(20))
    svd = fit_truncated_svd(r1, 1)
    recon = float(np.max(np.abs(project(r1, svd) @ svd.components - r1)))
    ok = worst <= 1e-6 and recon < 1e-8
    assert verdict(3, ok, f"worst relative error {worst:.2e}, rank-1 reconstruction {recon:.2e}", time.perf_counter() - start, 10)


def test_criterion_4_scaling_protocol(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    X = rng.standard_normal((500, 20)) * rng.uniform(0.001, 1000, 20) + rng.uniform(-100, 100, 20)
    raw = split(PairDataset(X=X, y=rng.random(500), pairs=np.zeros((500, 2), dtype=np.int64)), seed=3)
    ds = raw.scaled()
    Xtr, _ = ds.train
    mean_err = float(np.max(np.abs(Xtr.mean(axis=0))))
    var_err = float(np.max(np.abs(Xtr.var(axis=0) - 1)))
    test_ok = np.allclose(ds.test[0], (raw.test[0] - raw.train[0].mean(axis=0)) / raw.train[0].std(axis=0), rtol=1e-12)
    ok = mean_err < 1e-9 and var_err < 1e-6 and test_ok
    assert verdict(4, ok, f"train |mean| {mean_err:.1e}, |var-1| {var_err:.1e}, test uses train parameters", time.perf_counter() - start, 1)


def test_criterion_5_svr(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(20):
        n = int(rng.integers(4, 13))
        X = rng.standard_normal((n, int(rng.integers(1, 4))))
        y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(n)
        kernel, gamma = ("linear", None) if i % 2 else ("rbf", float(rng.uniform(0.1, 2.0)))
        C, eps = float(rng.choice([0.5, 1.0, 10.0])), float(rng.choice([0.01, 0.1]))
        model = fit_svr(X, y, kernel=kernel, C=C, epsilon=eps, gamma=gamma, seed=i)
        K = kernel_matrix(X, X, kernel, gamma)
        opt, _ = svr_dual_qp(K, y, C, eps)
        worst = max(worst, abs(model.objective - opt) / abs(opt))
    x = np.arange(10.0)[:, None]
    line = fit_svr(x, 2 * x.ravel() + 1, kernel="linear", C=10, epsilon=0.01)
    q = np.array([[0.5], [2.5], [4.5], [6.5], [8.5]])
    pred_err = float(np.max(np.abs(line.predict(q) - (2 * q.ravel() + 1))))
    ok = worst <= 1e-2 and pred_err <= 0.05
    assert verdict(5, ok, f"worst dual-objective gap {worst:.2e}, y=2x+1 max error {pred_err:.4f}", time.perf_counter() - start, 30)


def test_criterion_6_knn_contract(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    X, y = rng.standard_normal((200, 5)), rng.random(200)
    exact = np.array_equal(fit_knn(X, y, k=1).predict(X), y)
    gap = float(np.max(np.abs(fit_knn(X, y, k=200).predict(rng.standard_normal((20, 5))) - y.mean())))
    ok = exact and gap <= 1e-12
    assert verdict(6, ok, f"k=1 self-query exact: {exact}, k=n gap to mean {gap:.1e}", time.perf_counter() - start, 1)


def mixture_rows(seed, n=1000, d=10, clusters=8):
    """Rows from a Gaussian mixture with a smooth label and small noise."""
    rng = np.random.default_rng(seed)
    centers = 3 * rng.standard_normal((clusters, d))
    X = centers[rng.integers(clusters, size=n)] + rng.standard_normal((n, d))
    w = rng.standard_normal(d) / np.sqrt(d)
    y = 1 / (1 + np.exp(-X @ w)) + 0.05 * rng.standard_normal(n)
    return X, y


def test_criterion_7_lsh_quality(verdict):
    start = time.perf_counter()
    recalls, gaps = [], []
    for seed in range(5):
        X, y = mixture_rows(seed)
        train = np.arange(len(y)) < 800
        Xtr, ytr, Xte, yte = X[train], y[train], X[~train], y[~train]
        forest = fit_lsh(Xtr, ytr, k=10, seed=seed)
        approx, exact = forest.neighbors(Xte), nearest(Xtr, Xte, 10)
        recalls.append(np.mean([len(set(a) & set(e)) / 10 for a, e in zip(approx.tolist(), exact.tolist())]))
        gaps.append(abs(r2_score(yte, forest.predict(Xte)) - r2_score(yte, fit_knn(Xtr, ytr, k=10).predict(Xte))))
    ok = np.mean(recalls) >= 0.8 and max(gaps) <= 0.15
    detail = f"mean recall@10 {np.mean(recalls):.3f}, worst R^2 gap {max(gaps):.3f}"
    assert verdict(7, ok, detail, time.perf_counter() - start, 60)


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    cmd_synth(SynthSpec(n_songs=2000, n_users=500, n_genres=8, noise=0.1, seed=0), root / "data")
    out = []
    for name in ("run_a", "run_b"):
        cfg = RunConfig(songs=root / "data" / "songs.jsonl", histories=root / "data" / "histories.csv", workdir=root / name, seed=0)
        start = time.perf_counter()
        reports = Pipeline(cfg).run()
        out.append((root / name, reports, time.perf_counter() - start))
    return out


def test_criterion_8_knn_beats_ols(full_runs, verdict):
    _, reports, seconds = full_runs[0]
    cell = [r for r in reports if r.scheme == "tfidf" and r.threshold == 0.0]
    best_knn = max(r.r2 for r in cell if r.family == "knn")
    (ols,) = [r.r2 for r in cell if r.family == "ols"]
    ok = best_knn > 0 and best_knn > ols and len(reports) == 2 * 3 * 9
    assert verdict(8, ok, f"unfiltered tf-idf best k-NN R^2 {best_knn:.3f} vs OLS {ols:.3f}", seconds, 600)


def test_criterion_9_determinism(full_runs, verdict):
    (a, _, ta), (b, _, tb) = full_runs
    same = (a / "reports.csv").read_bytes() == (b / "reports.csv").read_bytes()
    assert verdict(9, same, "reports.csv byte-identical across fresh workdirs", ta + tb, 1200)


def micro_corpus(seed=0, n=120, groups=5, per_group=6):
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        g = int(rng.integers(groups))
        pool = [f"g{g}t{j}" for j in range(per_group)]
        tags = [(t, int(rng.integers(1, 100))) for t in rng.choice(pool, 3, replace=False)]
        if g == 0 and rng.random() < 0.5:
            tags += [("alpha", 60), ("beta", 60)]
        recs.append(SongRecord(i, 0, 0, f"song {i}", f"artist {g} {i % 3}", "", tuple(tags)))
    return recs


def test_criterion_10_embedding_sanity(verdict):
    start = time.perf_counter()
    corpus = build_corpus(micro_corpus())
    wins = []
    for seed in range(5):
        model = train_skipgram(corpus, SkipGramParams(seed=seed))
        unit = model.vectors / np.linalg.norm(model.vectors, axis=1, keepdims=True)
        cos = unit @ unit.T
        median = float(np.median(cos[np.triu_indices(len(cos), 1)]))
        wins.append(model.similarity("alpha", "beta") > median)
    ok = sum(wins) >= 4
    assert verdict(10, ok, f"pair beats median cosine in {sum(wins)}/5 seeds", time.perf_counter() - start, 30)
