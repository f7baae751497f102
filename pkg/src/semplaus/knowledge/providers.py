"""Entity-typing and event-detection providers.

Each kind has a live implementation (an HTTP service wrapping the model), a
fixture implementation replaying recorded JSONL, and an empty stub. A
``Recording*`` wrapper around a live provider writes the fixture file that
the fixture provider later replays.

Fixture records:

    {"sentence": "<M> Trader </M> ensures strategy.", "types": [{"kb_id": ..., "label": ..., "description": ...}]}
    {"sentence": "Option robs accusation.", "events": [{"trigger": ..., "node_id": ..., "name": ..., "description": ...}]}
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Callable, Protocol

import requests

from ..errors import DataError, ProviderError
from .types import EntityTypePrediction, EventTypePrediction

log = logging.getLogger(__name__)

ENTITY_ENDPOINT_ENV = "SEMPLAUS_ENTITY_ENDPOINT"
EVENT_ENDPOINT_ENV = "SEMPLAUS_EVENT_ENDPOINT"


class EntityTyper(Protocol):
    def predict(self, marked_sentence: str) -> list[dict]: ...


class EventDetector(Protocol):
    def detect(self, sentence: str) -> list[dict]: ...


def _load_fixture(path: str | os.PathLike, key: str) -> dict[str, list[dict]]:
    path = Path(path)
    if not path.exists():
        raise ProviderError(f"provider fixture not found: {path}")
    table: dict[str, list[dict]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                table[rec["sentence"]] = list(rec[key])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad fixture record ({exc})", rows=[lineno]) from exc
    return table


class FixtureEntityTyper:
    """Replays recorded predictions keyed by marked sentence; unknown sentences give ``[]``."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.table = _load_fixture(path, "types")

    def predict(self, marked_sentence: str) -> list[dict]:
        return [dict(t) for t in self.table.get(marked_sentence, [])]


class FixtureEventDetector:
    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.table = _load_fixture(path, "events")

    def detect(self, sentence: str) -> list[dict]:
        return [dict(e) for e in self.table.get(sentence, [])]


class EmptyEntityTyper:
    def predict(self, marked_sentence: str) -> list[dict]:
        return []


class EmptyEventDetector:
    def detect(self, sentence: str) -> list[dict]:
        return []


class _HttpProvider:
    def __init__(self, endpoint: str, timeout: float = 60.0, session: requests.Session | None = None,
                 max_in_flight: int = 4):
        self.endpoint = endpoint
        self.timeout = timeout
        self.session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _post(self, sentence: str, key: str) -> list[dict]:
        with self._slots:
            try:
                resp = self.session.post(self.endpoint, json={"sentence": sentence}, timeout=self.timeout)
                resp.raise_for_status()
                return list(resp.json()[key])
            except (requests.RequestException, ValueError, KeyError) as exc:
                raise ProviderError(f"provider at {self.endpoint} failed: {exc}") from exc


class HttpEntityTyper(_HttpProvider):
    """Client for an entity-typing service answering ``{"types": [...]}``."""

    @classmethod
    def from_env(cls, **kwargs) -> "HttpEntityTyper":
        endpoint = os.environ.get(ENTITY_ENDPOINT_ENV)
        if not endpoint:
            raise ProviderError(f"live entity typing needs {ENTITY_ENDPOINT_ENV} to be set")
        return cls(endpoint, **kwargs)

    def predict(self, marked_sentence: str) -> list[dict]:
        return self._post(marked_sentence, "types")


class HttpEventDetector(_HttpProvider):
    """Client for an event-detection service answering ``{"events": [...]}``."""

    @classmethod
    def from_env(cls, **kwargs) -> "HttpEventDetector":
        endpoint = os.environ.get(EVENT_ENDPOINT_ENV)
        if not endpoint:
            raise ProviderError(f"live event detection needs {EVENT_ENDPOINT_ENV} to be set")
        return cls(endpoint, **kwargs)

    def detect(self, sentence: str) -> list[dict]:
        return self._post(sentence, "events")


class _Recorder:
    def __init__(self, path: str | os.PathLike, key: str):
        self.path = Path(path)
        self.key = key
        self._lock = threading.Lock()
        self._seen: set[str] = set()

    def record(self, sentence: str, items: list[dict]):
        with self._lock:
            if sentence in self._seen:
                return
            self._seen.add(sentence)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"sentence": sentence, self.key: items}, ensure_ascii=False) + "\n")


class RecordingEntityTyper:
    def __init__(self, inner: EntityTyper, path: str | os.PathLike):
        self.inner = inner
        self._rec = _Recorder(path, "types")

    def predict(self, marked_sentence: str) -> list[dict]:
        out = self.inner.predict(marked_sentence)
        self._rec.record(marked_sentence, out)
        return out


class RecordingEventDetector:
    def __init__(self, inner: EventDetector, path: str | os.PathLike):
        self.inner = inner
        self._rec = _Recorder(path, "events")

    def detect(self, sentence: str) -> list[dict]:
        out = self.inner.detect(sentence)
        self._rec.record(sentence, out)
        return out


class CallableEntityTyper:
    """Adapts an in-process model callable ``marked_sentence -> list of type dicts``."""

    def __init__(self, fn: Callable[[str], list[dict]]):
        self.fn = fn

    def predict(self, marked_sentence: str) -> list[dict]:
        return list(self.fn(marked_sentence))


class CallableEventDetector:
    def __init__(self, fn: Callable[[str], list[dict]]):
        self.fn = fn

    def detect(self, sentence: str) -> list[dict]:
        return list(self.fn(sentence))


def type_entity(marked_sentence: str, provider: EntityTyper) -> list[EntityTypePrediction]:
    """Fine-grained types for the single ``<M> ... </M>`` span, in provider order."""
    if marked_sentence.count("<M>") != 1 or marked_sentence.count("</M>") != 1 \
            or marked_sentence.index("<M>") > marked_sentence.index("</M>"):
        raise ValueError(f"expected exactly one <M> ... </M> span in {marked_sentence!r}")
    raw = provider.predict(marked_sentence)
    try:
        return [EntityTypePrediction.from_record(r, rank=i) for i, r in enumerate(raw)]
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed entity-typing output for {marked_sentence!r}: {exc}") from exc


def detect_events(sentence: str, provider: EventDetector) -> list[EventTypePrediction]:
    if not sentence.strip():
        raise ValueError("sentence is empty")
    raw = provider.detect(sentence)
    try:
        return [EventTypePrediction.from_record(r) for r in raw]
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed event-detection output for {sentence!r}: {exc}") from exc
