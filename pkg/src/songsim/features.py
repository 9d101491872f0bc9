"""Per-song feature matrices shared by both feature schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense per-song feature rows; ``values[i]`` belongs to song ``ids[i]``."""

    ids: np.ndarray
    values: np.ndarray
    scheme: str
    _row: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.ids) != self.values.shape[0]:
            raise ValueError("ids and values disagree in length")
        object.__setattr__(self, "_row", {int(s): i for i, s in enumerate(self.ids)})

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, song_id: int) -> bool:
        return int(song_id) in self._row

    def row(self, song_id: int) -> np.ndarray:
        try:
            return self.values[self._row[int(song_id)]]
        except KeyError:
            raise KeyError(f"song id {song_id} has no feature row") from None

    def rows(self, song_ids) -> np.ndarray:
        idx = []
        for s in song_ids:
            try:
                idx.append(self._row[int(s)])
            except KeyError:
                raise KeyError(f"song id {s} has no feature row") from None
        return self.values[np.asarray(idx, dtype=np.int64)]

    def save(self, path) -> None:
        np.savez(path, ids=self.ids, values=self.values, scheme=np.array(self.scheme))

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        with np.load(path) as z:
            return cls(ids=z["ids"], values=z["values"], scheme=str(z["scheme"]))
