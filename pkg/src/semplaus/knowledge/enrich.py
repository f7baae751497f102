from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..corpus import LabeledEvent, mark_span, realize_sentence
from ..errors import DefinitionMiss, ProviderContractError
from .kb import DefinitionCache, KBClient, StaticKB, fetch_definition, is_valid_kb_id
from .providers import (
    EmptyEntityTyper,
    EmptyEventDetector,
    EntityTyper,
    EventDetector,
    detect_events,
    type_entity,
)
from .types import EnrichedEvent, EntityTypePrediction, EventTypePrediction

log = logging.getLogger(__name__)


@dataclass
class ProviderSet:
    entity_typer: EntityTyper = field(default_factory=EmptyEntityTyper)
    event_detector: EventDetector = field(default_factory=EmptyEventDetector)
    kb_client: KBClient = field(default_factory=StaticKB)
    cache: DefinitionCache = field(default_factory=DefinitionCache)


@dataclass(frozen=True)
class EnrichmentPolicy:
    # Use descriptions that arrive with provider output instead of asking the KB.
    trust_provider_descriptions: bool = True
    # "drop": types without a resolvable definition are removed; "error": raise.
    on_missing_definition: str = "drop"

    def __post_init__(self):
        if self.on_missing_definition not in ("drop", "error"):
            raise ValueError(f"unknown missing-definition policy {self.on_missing_definition!r}")


def select_verb_event(predictions: Sequence[EventTypePrediction], verb: str) -> EventTypePrediction | None:
    """The prediction whose trigger is the verb (exact token, case-insensitive)."""
    hits = [p for p in predictions if p.trigger.lower() == verb.lower()]
    if len(hits) > 1:
        raise ProviderContractError(f"{len(hits)} event types predicted for trigger {verb!r}; expected one")
    return hits[0] if hits else None


def _event_kb_id(node_id: str) -> str:
    # Event-ontology nodes wrap a WikiData id, e.g. DWD_Q53706.
    return node_id.split("_", 1)[1] if node_id.startswith("DWD_") else node_id


def _resolve(kb_id: str, current: str | None, providers: ProviderSet, policy: EnrichmentPolicy) -> str | None:
    if current and policy.trust_provider_descriptions:
        return current
    if not is_valid_kb_id(kb_id):
        if current:
            return current
        if policy.on_missing_definition == "error":
            raise DefinitionMiss(f"{kb_id}: not a resolvable knowledge-base id")
        return None
    try:
        return fetch_definition(kb_id, providers.kb_client, providers.cache)
    except DefinitionMiss:
        if current:
            return current
        if policy.on_missing_definition == "error":
            raise
        return None


def _resolve_entities(types: Iterable[EntityTypePrediction], providers, policy) -> list[EntityTypePrediction]:
    out = []
    for t in types:
        desc = _resolve(t.kb_id, t.description, providers, policy)
        if desc is None:
            log.debug("dropping type %s (%s): no definition", t.kb_id, t.label)
            continue
        out.append(t.with_description(desc))
    return out


def enrich_event(event: LabeledEvent, providers: ProviderSet, policy: EnrichmentPolicy | None = None) -> EnrichedEvent:
    policy = policy or EnrichmentPolicy()
    triple = event.triple
    sentence = realize_sentence(triple)

    subj = type_entity(mark_span(triple, "subject"), providers.entity_typer)
    obj = type_entity(mark_span(triple, "object"), providers.entity_typer)
    subj = _resolve_entities(subj, providers, policy)
    obj = _resolve_entities(obj, providers, policy)

    verb_type = select_verb_event(detect_events(sentence, providers.event_detector), triple.verb)
    if verb_type is not None:
        desc = _resolve(_event_kb_id(verb_type.node_id), verb_type.description, providers, policy)
        verb_type = EventTypePrediction(verb_type.trigger, verb_type.node_id, verb_type.name, desc) if desc else None

    return EnrichedEvent(event, sentence, tuple(subj), tuple(obj), verb_type)


def enrich_events(
    events: Iterable[LabeledEvent],
    providers: ProviderSet,
    policy: EnrichmentPolicy | None = None,
    max_workers: int = 1,
) -> list[EnrichedEvent]:
    """Enrich in input order; with ``max_workers > 1`` events are processed on a thread pool."""
    events = list(events)
    if max_workers <= 1:
        return [enrich_event(e, providers, policy) for e in events]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda e: enrich_event(e, providers, policy), events))
