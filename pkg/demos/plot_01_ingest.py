"""
Reading song documents and listening histories
==============================================

Song documents are JSON lines with a title, artist, album and a list of
``[tag, count]`` pairs. Text is normalized before anything else sees it.
"""

import io
import json

from songsim.ingest import build_song_records, normalize_text, parse_histories, parse_song_docs

# accents go, digits are spelled out, punctuation becomes a single space
for raw in ["Beyoncé", "Blink-182", "Guns N' Roses", "AC/DC"]:
    print(f"{raw!r:18} -> {normalize_text(raw)!r}")

song = {
    "name": "Headspin",
    "tags": [["IDM", 100], ["electronic", 54], ["Electronic", 20]],
    "album_mbid": "a960877b-0319-48ce-8658-c17b1e0dab9a",
    "artist_name": "Plaid",
    "mbid": "3e34ad31-8fd2-4c6c-95a7-7c1fe2bb3dbf",
    "album_title": "Not For Threes",
    "artist_mbid": "7e54d133-2525-4bc0-ae94-65584145a386",
}
lines = json.dumps(song) + "\n{broken line\n"

issues = []
docs = parse_song_docs(io.StringIO(lines), issues)
records, ids = build_song_records(docs)
print(records[0])
# the malformed line is reported, not fatal
print(issues)

# histories are user,song_mbid rows; songs get dense integer ids
hist = parse_histories(io.StringIO("user_id,song_mbid\nu1,3e34ad31-8fd2-4c6c-95a7-7c1fe2bb3dbf\n"), ids["song"])
print(hist)
