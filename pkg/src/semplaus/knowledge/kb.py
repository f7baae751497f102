"""Knowledge-base definition lookup with a write-through JSONL cache."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Protocol

import requests

from ..errors import DefinitionMiss, ProviderError

log = logging.getLogger(__name__)

WIKIDATA_ENTITY_URL = "https://www.wikidata.org/wiki/Special:EntityData/{id}.json"
DEFAULT_USER_AGENT = "semplaus/0.1 (definition lookup; https://www.wikidata.org/wiki/Wikidata:Data_access)"
KB_ENDPOINT_ENV = "SEMPLAUS_KB_ENDPOINT"

_KB_ID = re.compile(r"^[QP][1-9]\d*$")


def is_valid_kb_id(kb_id: str) -> bool:
    return bool(_KB_ID.match(kb_id or ""))


class KBClient(Protocol):
    def get_description(self, kb_id: str) -> str: ...


class DefinitionCache:
    """Append-only JSONL cache of ``{"kb_id", "definition", "fetched_at"}`` records.

    Reads go to an in-memory index. Writes are serialized by a lock and
    appended to the backing file (if any). When an id appears more than once
    the last record wins.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path else None
        self._index: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self):
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    kb_id, definition = rec["kb_id"], rec["definition"]
                    if not isinstance(kb_id, str) or not isinstance(definition, str):
                        raise TypeError
                except (json.JSONDecodeError, KeyError, TypeError):
                    log.warning("%s:%d: skipping corrupt cache line", self.path, lineno)
                    continue
                self._index[kb_id] = definition

    def get(self, kb_id: str) -> str | None:
        return self._index.get(kb_id)

    def put(self, kb_id: str, definition: str) -> None:
        with self._lock:
            if self._index.get(kb_id) == definition:
                return
            self._index[kb_id] = definition
            if self.path is None:
                return
            rec = {
                "kb_id": kb_id,
                "definition": definition,
                "fetched_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            }
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def __contains__(self, kb_id: str) -> bool:
        return kb_id in self._index

    def __len__(self):
        return len(self._index)


class WikidataClient:
    """Reads English descriptions from the public entity-data endpoint.

    Requests are spaced at least ``min_interval`` seconds apart. Connection
    errors, 429 and 5xx responses are retried up to ``max_retries`` times with
    exponential backoff; a 404 or an entity without an English description is
    a ``DefinitionMiss``.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        user_agent: str = DEFAULT_USER_AGENT,
        language: str = "en",
        min_interval: float = 0.2,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 10.0,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get(KB_ENDPOINT_ENV) or WIKIDATA_ENTITY_URL
        self.language = language
        self.min_interval = min_interval
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()
        self.session.headers.update({"User-Agent": user_agent, "Accept": "application/json"})
        self._sleep = sleep
        self._lock = threading.Lock()
        self._last_request = 0.0
        self.calls = 0

    def _throttle(self):
        with self._lock:
            wait = self._last_request + self.min_interval - time.monotonic()
            if wait > 0:
                self._sleep(wait)
            self._last_request = time.monotonic()

    def get_description(self, kb_id: str) -> str:
        url = self.endpoint.format(id=kb_id)
        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self._throttle()
            self.calls += 1
            try:
                resp = self.session.get(url, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 404:
                raise DefinitionMiss(f"{kb_id}: not found")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ProviderError(f"{kb_id}: HTTP {resp.status_code} from knowledge base")
            return self._extract(kb_id, resp.json())
        raise ProviderError(f"{kb_id}: knowledge base unavailable after {self.max_retries + 1} attempt(s): {last_error}")

    def _extract(self, kb_id: str, payload: dict) -> str:
        entities = payload.get("entities", {})
        # Redirected ids come back under the target id.
        entity = entities.get(kb_id) or next(iter(entities.values()), None)
        desc = (entity or {}).get("descriptions", {}).get(self.language, {}).get("value")
        if not desc:
            raise DefinitionMiss(f"{kb_id}: no {self.language} description")
        return desc


class StaticKB:
    """Offline client backed by an id -> definition mapping."""

    def __init__(self, definitions: Mapping[str, str] | None = None):
        self.definitions = dict(definitions or {})
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "StaticKB":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def get_description(self, kb_id: str) -> str:
        self.calls += 1
        try:
            return self.definitions[kb_id]
        except KeyError:
            raise DefinitionMiss(f"{kb_id}: not in offline knowledge base") from None


def fetch_definition(kb_id: str, kb_client: KBClient, cache: DefinitionCache) -> str:
    """Cache first, then the client; remote answers are written through."""
    if not is_valid_kb_id(kb_id):
        raise ValueError(f"invalid knowledge-base id {kb_id!r}")
    hit = cache.get(kb_id)
    if hit is not None:
        return hit
    definition = kb_client.get_description(kb_id)
    cache.put(kb_id, definition)
    return definition
