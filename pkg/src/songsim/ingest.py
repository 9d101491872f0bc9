"""Parsing and normalization of song metadata, listening histories and id maps.

Input records follow the layout returned by the Last.fm track API::

    {"name": "headspin", "tags": [["idm", 100], ["electronic", 54]],
     "album_mbid": "...", "artist_name": "plaid", "mbid": "...",
     "album_title": "not for threes", "artist_mbid": "..."}

Malformed lines never abort a parse. They are skipped and appended to the
optional ``issues`` list as :class:`ParseIssue` entries, and a warning is
logged with the total count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable

logger = logging.getLogger(__name__)

MAX_TAG_COUNT = 100

DIGIT_WORDS = {
    "0": "zero",
    "1": "one",
    "2": "two",
    "3": "three",
    "4": "four",
    "5": "five",
    "6": "six",
    "7": "seven",
    "8": "eight",
    "9": "nine",
}

_SPACES = re.compile(r" +")


class DataError(ValueError):
    """Input data that cannot be used at all (as opposed to a skippable line)."""


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str


@dataclass(frozen=True)
class RawSongDoc:
    name: str
    tags: tuple[tuple[str, int], ...]
    album_mbid: str
    artist_name: str
    mbid: str
    album_title: str
    artist_mbid: str


@dataclass(frozen=True)
class SongRecord:
    song_id: int
    artist_id: int
    album_id: int
    name_norm: str
    artist_norm: str
    album_norm: str
    tags: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "song_id": self.song_id,
            "artist_id": self.artist_id,
            "album_id": self.album_id,
            "name_norm": self.name_norm,
            "artist_norm": self.artist_norm,
            "album_norm": self.album_norm,
            "tags": [[t, c] for t, c in self.tags],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SongRecord":
        return cls(
            song_id=int(d["song_id"]),
            artist_id=int(d["artist_id"]),
            album_id=int(d["album_id"]),
            name_norm=d["name_norm"],
            artist_norm=d["artist_norm"],
            album_norm=d["album_norm"],
            tags=tuple((str(t), int(c)) for t, c in d["tags"]),
        )


@dataclass
class IdAssigner:
    """Maps string keys to 0, 1, 2, ... in first-seen order."""

    mapping: dict[str, int] = field(default_factory=dict)

    @property
    def next_id(self) -> int:
        return len(self.mapping)

    def assign(self, key: str) -> int:
        try:
            return self.mapping[key]
        except KeyError:
            idx = self.mapping[key] = len(self.mapping)
            return idx

    def get(self, key: str) -> int | None:
        return self.mapping.get(key)

    def __len__(self) -> int:
        return len(self.mapping)

    def __contains__(self, key: str) -> bool:
        return key in self.mapping

    def write_tsv(self, fh: IO[str]) -> None:
        for key, idx in self.mapping.items():
            fh.write(f"{key}\t{idx}\n")

    @classmethod
    def read_tsv(cls, fh: IO[str]) -> "IdAssigner":
        out = cls()
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, idx = line.rpartition("\t")
            if int(idx) != len(out.mapping):
                raise DataError(f"id map line {lineno}: ids must be sequential")
            out.mapping[key] = int(idx)
        return out


@dataclass(frozen=True)
class UserHistory:
    user_id: int
    song_ids: frozenset[int]


def normalize_text(s: str) -> str:
    """Fold ``s`` to lowercase ASCII words separated by single spaces.

    Accents are removed through canonical decomposition, every digit is spelled
    out on its own ("10" -> "one zero"), ASCII punctuation and any non-letter
    symbol becomes a word break, and letters without a Latin base are dropped.
    """
    out = []
    for ch in unicodedata.normalize("NFD", s.lower()):
        if "a" <= ch <= "z":
            out.append(ch)
        elif ch in DIGIT_WORDS:
            out.append(f" {DIGIT_WORDS[ch]} ")
        elif ch.isascii():
            out.append(" ")
        else:
            cat = unicodedata.category(ch)
            if cat == "Mn" or cat[0] == "L":
                continue
            out.append(" ")
    return _SPACES.sub(" ", "".join(out)).strip()


def _as_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(bytes(stream).decode("utf-8"))
    if isinstance(stream, io.TextIOBase):
        return stream
    if hasattr(stream, "read") and "b" in getattr(stream, "mode", "b"):
        return io.TextIOWrapper(stream, encoding="utf-8")
    return stream


def _str_field(obj: dict, key: str) -> str:
    value = obj.get(key, "")
    if value is None:
        return ""
    if not isinstance(value, str):
        raise ValueError(f"field {key!r} must be a string")
    return value


def _parse_doc(obj) -> RawSongDoc:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    mbid = _str_field(obj, "mbid")
    if not mbid:
        raise ValueError("missing mbid")
    tags = []
    for item in obj.get("tags") or []:
        name, count = item
        if not isinstance(name, str):
            raise ValueError("tag name must be a string")
        count = min(max(int(count), 0), MAX_TAG_COUNT)
        tags.append((name, count))
    return RawSongDoc(
        name=_str_field(obj, "name"),
        tags=tuple(tags),
        album_mbid=_str_field(obj, "album_mbid"),
        artist_name=_str_field(obj, "artist_name"),
        mbid=mbid,
        album_title=_str_field(obj, "album_title"),
        artist_mbid=_str_field(obj, "artist_mbid"),
    )


def parse_song_docs(stream, issues: list[ParseIssue] | None = None) -> list[RawSongDoc]:
    """Read JSON-lines song documents.

    Tag counts outside ``[0, 100]`` are clamped. Lines that fail to parse are
    skipped; each one is recorded in ``issues`` with its 1-based line number.
    """
    docs = []
    bad = []
    for lineno, line in enumerate(_as_text(stream), 1):
        if not line.strip():
            continue
        try:
            docs.append(_parse_doc(json.loads(line)))
        except (ValueError, TypeError) as exc:
            bad.append(ParseIssue(lineno, str(exc)))
    if bad:
        logger.warning("skipped %d malformed song line(s)", len(bad))
        if issues is not None:
            issues.extend(bad)
    return docs


def _merge_tags(tags: Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    merged: dict[str, int] = {}
    for name, count in tags:
        norm = normalize_text(name)
        if not norm or count <= 0:
            continue
        merged[norm] = max(count, merged.get(norm, 0))
    return tuple(merged.items())


def _entity_key(mbid: str, norm_name: str) -> str:
    # Entities without an mbid are keyed by their normalized name.
    return mbid if mbid else f"name:{norm_name}"


def build_song_records(
    docs: Iterable[RawSongDoc],
) -> tuple[list[SongRecord], dict[str, IdAssigner]]:
    """Normalize documents and assign song, artist and album ids.

    Returns the records plus one :class:`IdAssigner` per namespace, keyed
    ``"song"``, ``"artist"`` and ``"album"``. A repeated song mbid keeps its
    first document only.
    """
    ids = {"song": IdAssigner(), "artist": IdAssigner(), "album": IdAssigner()}
    records = []
    for doc in docs:
        if doc.mbid in ids["song"]:
            continue
        artist_norm = normalize_text(doc.artist_name)
        album_norm = normalize_text(doc.album_title)
        records.append(
            SongRecord(
                song_id=ids["song"].assign(doc.mbid),
                artist_id=ids["artist"].assign(_entity_key(doc.artist_mbid, artist_norm)),
                album_id=ids["album"].assign(_entity_key(doc.album_mbid, album_norm)),
                name_norm=normalize_text(doc.name),
                artist_norm=artist_norm,
                album_norm=album_norm,
                tags=_merge_tags(doc.tags),
            )
        )
    return records, ids


def parse_histories(
    stream, song_ids: IdAssigner, issues: list[ParseIssue] | None = None
) -> list[UserHistory]:
    """Group ``user_id,song_mbid`` rows into one history per user.

    User keys are mapped to integers in first-seen order. Rows whose mbid is
    unknown to ``song_ids`` are dropped and counted as issues, as are rows
    that do not have exactly two non-empty fields.
    """
    users = IdAssigner()
    listened: dict[int, set[int]] = {}
    bad = []
    reader = csv.reader(_as_text(stream))
    for lineno, row in enumerate(reader, 1):
        if lineno == 1 and row == ["user_id", "song_mbid"]:
            continue
        if not row:
            continue
        if len(row) != 2 or not row[0].strip() or not row[1].strip():
            bad.append(ParseIssue(lineno, f"malformed row {row!r}"))
            continue
        user, mbid = row[0].strip(), row[1].strip()
        sid = song_ids.get(mbid)
        if sid is None:
            bad.append(ParseIssue(lineno, f"unknown song mbid {mbid!r}"))
            continue
        listened.setdefault(users.assign(user), set()).add(sid)
    if bad:
        logger.warning("dropped %d history row(s)", len(bad))
        if issues is not None:
            issues.extend(bad)
    return [UserHistory(uid, frozenset(s)) for uid, s in listened.items()]


def write_records(records: Iterable[SongRecord], fh: IO[str]) -> None:
    for rec in records:
        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_records(fh: IO[str]) -> list[SongRecord]:
    return [SongRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
