import json
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from songsim.cli import main
from songsim.experiment import ModelSpec
from songsim.ingest import UserHistory
from songsim.pipeline import (
    MissingArtifactError,
    Pipeline,
    RunConfig,
    WorkdirLocked,
    workdir_lock,
)
from songsim.synth import SynthSpec, cmd_synth, generate

from .oracles import brute_force_cooccurrence

SMALL_MODELS = (
    ModelSpec("knn", "k=1", ({"k": 1},)),
    ModelSpec("knn", "k=5", ({"k": 5},)),
    ModelSpec("ols", "ols", ({},)),
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    cmd_synth(SynthSpec(n_songs=150, n_users=60, n_genres=3, tags_per_genre=8, seed=1), out)
    return out


def small_config(corpus, workdir, **kw):
    base = dict(
        songs=corpus / "songs.jsonl",
        histories=corpus / "histories.csv",
        workdir=workdir,
        thresholds=(0.0, 0.05),
        limit=120,
        tfidf={"max_terms": 200, "components": 8},
        embed={"dim": 8, "epochs": 2},
        models=SMALL_MODELS,
    )
    base.update(kw)
    return RunConfig(**base)


def stage_runs(pipe):
    return [(stage, key) for stage, key, kind in pipe.events if kind == "run"]


class TestSynth:
    def test_byte_identical(self, tmp_path):
        spec = SynthSpec(n_songs=50, n_users=20, seed=4)
        cmd_synth(spec, tmp_path / "a")
        cmd_synth(spec, tmp_path / "b")
        for name in ("songs.jsonl", "histories.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_noise_zero_single_pool(self):
        c = generate(SynthSpec(n_songs=100, n_genres=2, noise=0.0, seed=0))
        pools = [set(t) for t in c.genre_tags]
        for song, g in zip(c.songs, c.song_genre.tolist()):
            assert {t for t, _ in song["tags"]} <= pools[g]

    @pytest.mark.parametrize("noise", [0.0, 0.1, 0.2])
    def test_within_genre_more_similar(self, noise):
        c = generate(SynthSpec(n_songs=300, n_users=150, n_genres=4, noise=noise, seed=2))
        index = {s["mbid"]: i for i, s in enumerate(c.songs)}
        users = {}
        for u, m in c.histories:
            users.setdefault(u, set()).add(index[m])
        hist = [UserHistory(i, frozenset(s)) for i, s in enumerate(users.values())]
        sims = brute_force_cooccurrence(hist)
        listened = sorted({s for h in hist for s in h.song_ids})
        within, across = [], []
        for a, b in combinations(listened, 2):
            (within if c.song_genre[a] == c.song_genre[b] else across).append(sims.get((a, b), 0.0))
        assert np.mean(within) > np.mean(across)

    @pytest.mark.parametrize("kw", [{"n_songs": 0}, {"noise": 1.5}, {"n_genres": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SynthSpec(**kw)


class TestRunConfig:
    def test_json_round_trip(self, tmp_path, corpus):
        cfg = small_config(corpus, tmp_path / "w")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert RunConfig.load(path) == cfg

    def test_relative_paths(self, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({"songs": "data/s.jsonl", "workdir": "out"}))
        cfg = RunConfig.load(tmp_path / "cfg.json")
        assert cfg.songs == tmp_path / "data" / "s.jsonl"
        assert cfg.workdir == tmp_path / "out"

    @pytest.mark.parametrize("kw", [{"schemes": ("bow",)}, {"thresholds": (1.0,)}, {"limit": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RunConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="colour"):
            RunConfig.from_dict({"colour": "red"})


class TestPipeline:
    def test_smoke_and_cache(self, corpus, tmp_path):
        cfg = small_config(corpus, tmp_path / "w")
        first = Pipeline(cfg)
        reports = first.run()
        assert len(reports) == 2 * 2 * 3
        assert (tmp_path / "w" / "reports.csv").exists()
        assert (tmp_path / "w" / "tables.txt").exists()
        assert not any(r.error for r in reports)

        again = Pipeline(cfg)
        assert again.run() == reports
        assert stage_runs(again) == []

        # A new threshold leaves ingest, ground truth and features untouched.
        changed = Pipeline(replace(cfg, thresholds=(0.0, 0.1)))
        changed.run()
        ran = {stage for stage, _ in stage_runs(changed)}
        assert ran == {"pairs", "train", "evaluate"}
        pair_runs = [key for stage, key in stage_runs(changed) if stage == "pairs"]
        assert sorted(pair_runs) == sorted(changed.pairs_key(s, 0.1) for s in cfg.schemes)

    def test_fresh_workdirs_identical(self, corpus, tmp_path):
        for name in ("a", "b"):
            Pipeline(small_config(corpus, tmp_path / name, schemes=("tfidf",))).run()
        assert (tmp_path / "a" / "reports.csv").read_bytes() == (tmp_path / "b" / "reports.csv").read_bytes()

    def test_seed_changes_key(self, corpus, tmp_path):
        a = Pipeline(small_config(corpus, tmp_path / "w"))
        b = Pipeline(small_config(corpus, tmp_path / "w", seed=1))
        assert a.ingest_key() == b.ingest_key()
        assert a.features_key("tfidf") != b.features_key("tfidf")

    def test_missing_upstream(self, corpus, tmp_path):
        pipe = Pipeline(small_config(corpus, tmp_path / "w"), auto=False)
        pipe.run_stage("ingest")
        with pytest.raises(MissingArtifactError, match="dataset.npz"):
            pipe.run_stage("train")

    def test_tables_match_reports(self, corpus, tmp_path):
        reports = Pipeline(small_config(corpus, tmp_path / "w", schemes=("tfidf",))).run()
        text = (tmp_path / "w" / "tables.txt").read_text()
        for r in reports:
            assert f"{r.r2:.3f}" in text

    def test_similarity_file_input(self, corpus, tmp_path):
        sim = tmp_path / "sim.csv"
        Pipeline(small_config(corpus, tmp_path / "gt")).run_stage("groundtruth")
        src = next((tmp_path / "gt" / "cache" / "groundtruth").iterdir()) / "similarity.csv"
        sim.write_bytes(src.read_bytes())
        cfg = small_config(corpus, tmp_path / "w", similarity=sim, schemes=("tfidf",))
        direct = Pipeline(small_config(corpus, tmp_path / "v", schemes=("tfidf",))).run()
        assert Pipeline(cfg).run() == direct

    def test_lock(self, tmp_path):
        with workdir_lock(tmp_path):
            with pytest.raises(WorkdirLocked):
                with workdir_lock(tmp_path):
                    pass
        assert not (tmp_path / ".lock").exists()


class TestCli:
    def test_synth_and_stages(self, tmp_path, capsys):
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data), "--songs", "120", "--users", "50", "--genres", "3", "--seed", "2"]) == 0
        cfg = small_config(data, tmp_path / "w")
        (tmp_path / "cfg.json").write_text(json.dumps(cfg.to_dict()))
        common = ["--config", str(tmp_path / "cfg.json")]
        assert main(["ingest", *common]) == 0
        assert main(["features", *common, "--scheme", "tfidf"]) == 0
        assert "features.npz" not in capsys.readouterr().err
        assert list((tmp_path / "w" / "cache" / "features").glob("*/features.npz"))
        assert main(["train", *common]) == 3
        assert "dataset.npz" in capsys.readouterr().err
        assert main(["pipeline", *common, "--scheme", "tfidf", "--threshold", "0"]) == 0
        assert "k-NN" in capsys.readouterr().out

    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["pipeline", "--scheme", "bow"])
        assert exc.value.code == 1

    def test_invalid_limit_is_usage_error(self, tmp_path):
        assert main(["pipeline", "--limit", "0", "--workdir", str(tmp_path)]) == 1

    def test_missing_input_is_data_error(self, tmp_path, capsys):
        code = main(["ingest", "--workdir", str(tmp_path), "--songs", str(tmp_path / "no.jsonl"), "--histories", str(tmp_path / "no.csv")])
        assert code == 2
        assert "no.jsonl" in capsys.readouterr().err

    def test_locked_workdir(self, tmp_path):
        (tmp_path / ".lock").write_text("123")
        assert main(["ingest", "--workdir", str(tmp_path)]) == 1
