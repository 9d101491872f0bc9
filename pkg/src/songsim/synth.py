"""Seeded, genre-clustered stand-in for the Last.fm song and listening data.

Every genre owns a pool of tags and a pool of artists. Songs draw their tags
from their own genre, except that each tag is swapped for one from another
genre with probability ``noise``. Users favour one or two genres and pick
songs from them, again leaving their genres with probability ``noise``, so
same-genre songs co-occur more often than cross-genre ones. Song choice is
weighted by a Zipf-like popularity so listener counts are heavy-tailed.
"""

from __future__ import annotations

import csv
import json
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import normalize_text

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "tr", "br"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "é"]


@dataclass(frozen=True)
class SynthSpec:
    n_songs: int = 2000
    n_users: int = 500
    n_genres: int = 8
    tags_per_genre: int = 20
    noise: float = 0.1
    seed: int = 0
    artists_per_genre: int = 12
    tags_per_song: tuple[int, int] = (3, 8)
    songs_per_user: tuple[int, int] = (20, 60)
    popularity_skew: float = 1.0

    def __post_init__(self):
        for name in ("n_songs", "n_users", "n_genres", "tags_per_genre", "artists_per_genre"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.popularity_skew < 0:
            raise ValueError("popularity_skew must be non-negative")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


@dataclass
class SynthCorpus:
    songs: list[dict]
    histories: list[tuple[str, str]]
    song_genre: np.ndarray
    genre_tags: list[list[str]]


class _Namer:
    def __init__(self, rng):
        self.rng = rng
        self.used: set[str] = set()

    def word(self, syllables: int) -> str:
        return "".join(
            _ONSETS[self.rng.integers(len(_ONSETS))] + _VOWELS[self.rng.integers(len(_VOWELS))]
            for _ in range(syllables)
        )

    def unique(self, n_words: int) -> str:
        while True:
            name = " ".join(self.word(int(self.rng.integers(2, 4))) for _ in range(n_words))
            key = normalize_text(name).replace(" ", "")
            if key not in self.used:
                self.used.add(key)
                return name


def _mbid(rng) -> str:
    return str(uuid.UUID(bytes=rng.bytes(16), version=4))


def generate(spec: SynthSpec) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    namer = _Namer(rng)

    genre_tags = [
        [namer.unique(1 + int(rng.random() < 0.2)) for _ in range(spec.tags_per_genre)]
        for _ in range(spec.n_genres)
    ]
    artists = []  # per genre: list of (name, mbid, albums[(title, mbid)])
    for _ in range(spec.n_genres):
        pool = []
        for _ in range(spec.artists_per_genre):
            name = namer.unique(int(rng.integers(1, 3))).title()
            albums = [(namer.unique(int(rng.integers(1, 4))), _mbid(rng)) for _ in range(int(rng.integers(1, 4)))]
            pool.append((name, _mbid(rng), albums))
        artists.append(pool)

    song_genre = rng.integers(spec.n_genres, size=spec.n_songs)
    songs = []
    lo, hi = spec.tags_per_song
    for g in song_genre.tolist():
        artist, artist_mbid, albums = artists[g][rng.integers(spec.artists_per_genre)]
        album, album_mbid = albums[rng.integers(len(albums))]
        tags: dict[str, int] = {}
        for _ in range(int(rng.integers(lo, hi + 1))):
            src = g
            if spec.n_genres > 1 and rng.random() < spec.noise:
                src = (g + 1 + int(rng.integers(spec.n_genres - 1))) % spec.n_genres
            tag = genre_tags[src][rng.integers(spec.tags_per_genre)]
            tags[tag] = max(tags.get(tag, 0), int(rng.integers(1, 101)))
        if tags:
            top = max(tags, key=tags.get)
            tags[top] = 100
        songs.append(
            {
                "name": namer.unique(int(rng.integers(1, 4))).capitalize(),
                "tags": sorted(([t, c] for t, c in tags.items()), key=lambda tc: -tc[1]),
                "album_mbid": album_mbid,
                "artist_name": artist,
                "mbid": _mbid(rng),
                "album_title": album,
                "artist_mbid": artist_mbid,
            }
        )

    # Zipf-like popularity over a random ranking of the songs.
    popularity = (1.0 + rng.permutation(spec.n_songs)) ** -spec.popularity_skew
    by_genre = [np.flatnonzero(song_genre == g) for g in range(spec.n_genres)]
    everything = np.cumsum(popularity / popularity.sum())
    histories = []
    lo, hi = spec.songs_per_user
    for u in range(spec.n_users):
        liked = rng.choice(spec.n_genres, size=min(int(rng.integers(1, 3)), spec.n_genres), replace=False)
        pool = np.concatenate([by_genre[g] for g in liked])
        weights = np.cumsum(popularity[pool] / popularity[pool].sum()) if len(pool) else None
        picks = set()
        for _ in range(int(rng.integers(lo, hi + 1))):
            if len(pool) == 0 or rng.random() < spec.noise:
                cdf, src = everything, None
            else:
                cdf, src = weights, pool
            i = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)
            picks.add(i if src is None else int(src[i]))
        histories.extend((f"user{u}", songs[s]["mbid"]) for s in sorted(picks))
    return SynthCorpus(songs, histories, song_genre, genre_tags)


def write_corpus(corpus: SynthCorpus, songs_path, histories_path) -> None:
    with open(songs_path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.songs:
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
    with open(histories_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "song_mbid"])
        writer.writerows(corpus.histories)


def cmd_synth(spec: SynthSpec, outdir) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    songs_path, histories_path = outdir / "songs.jsonl", outdir / "histories.csv"
    write_corpus(generate(spec), songs_path, histories_path)
    return songs_path, histories_path
