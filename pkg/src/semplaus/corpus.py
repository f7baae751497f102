"""Loading, merging and surface realization of (subject, verb, object) events."""

from __future__ import annotations

import csv
import logging
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError, DataError, UsageError

log = logging.getLogger(__name__)

# Markers consumed by the templating stage and by the entity typer. Event
# fields containing any of these would make prompts ambiguous.
PROMPT_MARKERS = (
    "[EVT]", "[/EVT]",
    "[STYPE]", "[/STYPE]",
    "[OTYPE]", "[/OTYPE]",
    "[ETYPE]", "[/ETYPE]",
    "[DEF]", "[/DEF]",
)
SPAN_MARKERS = ("<M>", "</M>")
RESERVED_MARKERS = PROMPT_MARKERS + SPAN_MARKERS


class DatasetId(str, Enum):
    PEP3K = "PEP3K"
    PAP = "PAP"
    OTHER = "OTHER"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Origin(str, Enum):
    ORIGINAL = "original"
    AUGMENTED = "augmented"


def _check_field(name: str, value: str) -> str:
    if not isinstance(value, str):
        raise ValueError(f"{name} must be a string, got {type(value).__name__}")
    value = " ".join(value.split())
    if not value:
        raise ValueError(f"{name} is empty")
    for marker in RESERVED_MARKERS:
        if marker in value:
            raise ValueError(f"{name} {value!r} contains reserved marker {marker}")
    return value


@dataclass(frozen=True)
class EventTriple:
    """A simple event. Fields are whitespace-normalized on construction."""

    subject: str
    verb: str
    object: str

    def __post_init__(self):
        for name in ("subject", "verb", "object"):
            object.__setattr__(self, name, _check_field(name, getattr(self, name)))

    def __iter__(self):
        return iter((self.subject, self.verb, self.object))


@dataclass(frozen=True)
class LabeledEvent:
    triple: EventTriple
    label: int
    dataset_id: DatasetId = DatasetId.OTHER
    split: Split = Split.TRAIN
    origin: Origin = Origin.ORIGINAL

    def __post_init__(self):
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "dataset_id", DatasetId(self.dataset_id))
        object.__setattr__(self, "split", Split(self.split))
        object.__setattr__(self, "origin", Origin(self.origin))

    def to_record(self) -> dict:
        s, v, o = self.triple
        return {
            "subject": s,
            "verb": v,
            "object": o,
            "label": self.label,
            "dataset": self.dataset_id.value,
            "split": self.split.value,
            "origin": self.origin.value,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledEvent":
        return cls(
            EventTriple(rec["subject"], rec["verb"], rec["object"]),
            int(rec["label"]),
            DatasetId(rec.get("dataset", "OTHER")),
            Split(rec.get("split", "train")),
            Origin(rec.get("origin", "original")),
        )


@dataclass(frozen=True)
class DatasetBundle:
    events: tuple[LabeledEvent, ...]
    conflicts: tuple[tuple[EventTriple, DatasetId], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def counts(self) -> dict[tuple[str, int], int]:
        """Event counts keyed by (split, label). Always recomputed from ``events``."""
        return dict(Counter((e.split.value, e.label) for e in self.events))

    def label_counts(self) -> dict[int, int]:
        c = Counter(e.label for e in self.events)
        return {0: c.get(0, 0), 1: c.get(1, 0)}

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


@dataclass(frozen=True)
class ColumnMapping:
    """Which columns of a delimited file hold the event fields."""

    subject: str = "subject"
    verb: str = "verb"
    object: str = "object"
    label: str = "label"
    delimiter: str | None = None  # None: tab for .tsv/.tab, comma otherwise

    @classmethod
    def parse(cls, spec: str | None, delimiter: str | None = None) -> "ColumnMapping":
        """Parse ``"subject=s,verb=v,object=o,label=plausible"``; omitted keys keep defaults."""
        kwargs: dict[str, str] = {}
        for part in filter(None, (spec or "").split(",")):
            key, sep, col = part.partition("=")
            key = key.strip()
            if not sep or key not in ("subject", "verb", "object", "label"):
                raise ConfigurationError(f"bad column mapping entry {part!r}")
            kwargs[key] = col.strip()
        return cls(delimiter=delimiter, **kwargs)

    def delimiter_for(self, path: Path) -> str:
        if self.delimiter:
            return self.delimiter
        return "\t" if path.suffix.lower() in (".tsv", ".tab") else ","


def _parse_label(raw: str | None) -> int:
    raw = (raw or "").strip()
    if raw in ("0", "1"):
        return int(raw)
    # Some exports write labels as floats.
    if raw in ("0.0", "1.0"):
        return int(float(raw))
    raise ValueError(f"non-binary label {raw!r}")


def load_events(
    path: str | os.PathLike,
    dataset_id: DatasetId | str,
    split: Split | str,
    format_spec: ColumnMapping | None = None,
) -> DatasetBundle:
    """Read a delimited file with a header row into a bundle.

    Every malformed row is collected and reported together in one
    ``DataError`` whose ``rows`` lists the 1-based data-row indices.
    """
    path = Path(path)
    fmt = format_spec or ColumnMapping()
    if not path.exists():
        raise UsageError(f"missing input file: {path}")
    dataset_id, split = DatasetId(dataset_id), Split(split)

    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=fmt.delimiter_for(path))
        header = reader.fieldnames
        if not header:
            raise DataError(f"{path}: empty file")
        missing = [c for c in (fmt.subject, fmt.verb, fmt.object, fmt.label) if c not in header]
        if missing:
            raise ConfigurationError(f"{path}: missing column(s) {', '.join(missing)}; header is {header}")

        events, bad = [], []
        problems = []
        for idx, row in enumerate(reader, 1):
            try:
                triple = EventTriple(row[fmt.subject] or "", row[fmt.verb] or "", row[fmt.object] or "")
                events.append(LabeledEvent(triple, _parse_label(row[fmt.label]), dataset_id, split))
            except (ValueError, TypeError) as exc:
                bad.append(idx)
                problems.append(f"row {idx}: {exc}")

    if bad:
        shown = "; ".join(problems[:5]) + (" ..." if len(problems) > 5 else "")
        raise DataError(f"{path}: {len(bad)} malformed row(s): {shown}", rows=bad)
    if not events:
        raise DataError(f"{path}: empty file")
    return DatasetBundle(events)


def merge_splits(bundles: Sequence[DatasetBundle], target_split: Split | str) -> DatasetBundle:
    """Concatenate bundles into ``target_split``, deduplicating.

    Exact duplicates (same triple, dataset and label) keep their first
    occurrence. A (triple, dataset) pair seen with both labels is a conflict:
    every copy is dropped and the pair is listed in ``conflicts``.
    """
    target_split = Split(target_split)
    labels: dict[tuple[EventTriple, DatasetId], set[int]] = {}
    for bundle in bundles:
        for ev in bundle:
            labels.setdefault((ev.triple, ev.dataset_id), set()).add(ev.label)
    conflicted = {key for key, seen in labels.items() if len(seen) > 1}

    kept, seen_keys = [], set()
    for bundle in bundles:
        for ev in bundle:
            key = (ev.triple, ev.dataset_id)
            if key in conflicted or key in seen_keys:
                continue
            seen_keys.add(key)
            kept.append(replace(ev, split=target_split))

    conflicts = tuple(k for k in labels if k in conflicted)
    if conflicts:
        log.warning("dropped %d conflicting event(s) with contradictory labels", len(conflicts))
    log.info("merged %d bundle(s) into %s: %d events", len(bundles), target_split.value, len(kept))
    return DatasetBundle(kept, conflicts)


def surface_tokens(triple: EventTriple) -> tuple[str, str, str]:
    """The three fields as they appear in the realized sentence."""
    s, v, o = triple
    return s[:1].upper() + s[1:], v, o


def realize_sentence(triple: EventTriple) -> str:
    return " ".join(surface_tokens(triple)) + "."


def mark_span(triple: EventTriple, role: str) -> str:
    """Realize the sentence with the subject or object wrapped in ``<M> ... </M>``."""
    s, v, o = surface_tokens(triple)
    if role == "subject":
        return f"<M> {s} </M> {v} {o}."
    if role == "object":
        return f"{s} {v} <M> {o} </M>."
    raise ValueError(f"unsupported role {role!r}; only subject and object spans can be marked")


def bundle_to_records(bundle: Iterable[LabeledEvent]) -> list[dict]:
    return [e.to_record() for e in bundle]


def bundle_from_records(records: Iterable[dict]) -> DatasetBundle:
    events = []
    for i, rec in enumerate(records, 1):
        try:
            events.append(LabeledEvent.from_record(rec))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"record {i}: {exc}", rows=[i]) from exc
    return DatasetBundle(events)
