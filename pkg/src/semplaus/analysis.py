"""Per-label word frequencies and cross-label similarity of the top words."""

from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .corpus import DatasetBundle, LabeledEvent
from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_STOP_WORDS = frozenset(
    "a an the of to in on at by for with from and or is are was be".split()
)


@dataclass(frozen=True)
class FrequencyTable:
    label: int
    entries: tuple[tuple[str, int], ...]

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.entries]

    def to_dict(self) -> dict:
        return {"label": self.label, "entries": [[w, c] for w, c in self.entries]}


def top_words(events: DatasetBundle | Iterable[LabeledEvent], label: int, k: int,
              stop_list: Iterable[str] = ()) -> FrequencyTable:
    """Most frequent lowercased tokens over subject, verb and object of one label.

    Ordered by descending count, ties broken lexicographically.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    stop = {w.lower() for w in stop_list}
    counts: Counter[str] = Counter()
    for ev in events:
        if ev.label != label:
            continue
        for field_ in ev.triple:
            counts.update(t for t in field_.lower().split() if t not in stop)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return FrequencyTable(label, tuple(ranked[:k]))


class WordVectors:
    """In-memory word vectors read from the word2vec text format (optional ``count dim`` header)."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self.vectors = {w: np.asarray(v, dtype=float) for w, v in vectors.items()}

    @classmethod
    def load(cls, path: str | os.PathLike) -> "WordVectors":
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                if len(parts) < 2:
                    continue
                try:
                    vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad vector line", rows=[lineno]) from exc
        return cls(vectors)

    @classmethod
    def bundled(cls) -> "WordVectors":
        with resources.as_file(resources.files("semplaus") / "data" / "toy_vectors.txt") as p:
            return cls.load(p)

    def get(self, word: str) -> np.ndarray | None:
        v = self.vectors.get(word)
        if v is None:
            v = self.vectors.get(word.lower())
        return v


@dataclass(frozen=True)
class SimilarityMatrix:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray
    skipped_rows: tuple[str, ...] = field(default=())
    skipped_cols: tuple[str, ...] = field(default=())

    def mean_off_diagonal(self) -> float:
        """Mean similarity over cells pairing two different words."""
        mask = np.array([[r != c for c in self.cols] for r in self.rows], dtype=bool)
        if not mask.any():
            return float("nan")
        return float(self.values[mask].mean())

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(self.cols, self.rows, self.values.T, self.skipped_cols, self.skipped_rows)

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.cols)]
        for word, row in zip(self.rows, self.values):
            lines.append(word + "," + ",".join(f"{x:.6f}" for x in row))
        return "\n".join(lines) + "\n"


def _resolve(words, embeddings):
    kept, vecs, skipped = [], [], []
    for w in words:
        v = embeddings.get(w)
        if v is None or not np.any(v):
            skipped.append(w)
        else:
            kept.append(w)
            vecs.append(v / np.linalg.norm(v))
    return kept, vecs, skipped


def label_similarity(top_plausible: FrequencyTable, top_implausible: FrequencyTable,
                     embeddings: WordVectors) -> SimilarityMatrix:
    """Cosine similarities; rows are plausible top words, columns implausible ones.

    Words without a vector are skipped and listed on the result.
    """
    rows, rv, rs = _resolve(top_plausible.words, embeddings)
    cols, cv, cs = _resolve(top_implausible.words, embeddings)
    if not rows or not cols:
        raise DataError("no resolvable words on one side of the similarity matrix")
    if rs or cs:
        log.info("skipped %d word(s) without vectors: %s", len(rs) + len(cs), rs + cs)
    values = np.clip(np.vstack(rv) @ np.vstack(cv).T, -1.0, 1.0)
    return SimilarityMatrix(tuple(rows), tuple(cols), values, tuple(rs), tuple(cs))
