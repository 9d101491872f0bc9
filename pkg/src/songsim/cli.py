"""``songsim`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .ingest import DataError
from .pipeline import (
    STAGES,
    MissingArtifactError,
    Pipeline,
    RunConfig,
    StageError,
    WorkdirLocked,
    workdir_lock,
)
from .synth import SynthSpec, cmd_synth

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 0, 1, 2, 3

logger = logging.getLogger("songsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--workdir", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, action="append", help="repeatable; replaces the configured list")
    p.add_argument("--scheme", choices=("tfidf", "embed"), action="append", help="repeatable")
    p.add_argument("--limit", type=int, help="maximum number of song pairs")
    p.add_argument("--songs", type=Path)
    p.add_argument("--histories", type=Path)
    p.add_argument("--similarity", type=Path, help="precomputed song1,song2,similarity file")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="songsim", description="Song similarity from tags and metadata.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic songs.jsonl and histories.csv")
    s.add_argument("--out", type=Path, default=Path("."))
    s.add_argument("--songs", dest="n_songs", type=int, default=SynthSpec.n_songs)
    s.add_argument("--users", dest="n_users", type=int, default=SynthSpec.n_users)
    s.add_argument("--genres", dest="n_genres", type=int, default=SynthSpec.n_genres)
    s.add_argument("--tags-per-genre", type=int, default=SynthSpec.tags_per_genre)
    s.add_argument("--noise", type=float, default=SynthSpec.noise)
    s.add_argument("--seed", type=int, default=SynthSpec.seed)
    s.add_argument("-v", "--verbose", action="store_true")

    for stage in STAGES:
        _common(sub.add_parser(stage, help=f"run the {stage} stage only"))
    _common(sub.add_parser("pipeline", help="run every stage, reusing cached artifacts"))
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("workdir", "seed", "limit", "songs", "histories", "similarity"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.threshold:
        overrides["thresholds"] = tuple(args.threshold)
    if args.scheme:
        overrides["schemes"] = tuple(dict.fromkeys(args.scheme))
    return replace(cfg, **overrides)


def _run(args) -> int:
    if args.command == "synth":
        spec = SynthSpec(
            n_songs=args.n_songs,
            n_users=args.n_users,
            n_genres=args.n_genres,
            tags_per_genre=args.tags_per_genre,
            noise=args.noise,
            seed=args.seed,
        )
        songs, histories = cmd_synth(spec, args.out)
        print(f"wrote {songs} and {histories}")
        return EXIT_OK

    cfg = config_from_args(args)
    with workdir_lock(Path(cfg.workdir)):
        if args.command == "pipeline":
            reports = Pipeline(cfg, auto=True).run()
        else:
            pipe = Pipeline(cfg, auto=False)
            result = pipe.run_stage(args.command)
            reports = result if args.command == "evaluate" else None
            if reports is None:
                for path in result if isinstance(result, list) else [result]:
                    print(path)
    if reports is not None:
        print((Path(cfg.workdir) / "tables.txt").read_text(encoding="utf-8"), end="")
        failed = [r for r in reports if r.error]
        if failed:
            logger.warning("%d cell(s) failed; see reports.csv", len(failed))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except (ValueError, TypeError, json.JSONDecodeError, WorkdirLocked) as exc:
        if isinstance(exc, DataError):
            print(f"songsim: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"songsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingArtifactError as exc:
        print(f"songsim: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except StageError as exc:
        print(f"songsim: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.__cause__, DataError) else EXIT_STAGE
    except OSError as exc:
        print(f"songsim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
