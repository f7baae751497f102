"""Entity types, event types and their knowledge-base definitions."""

from .enrich import EnrichmentPolicy, ProviderSet, enrich_event, enrich_events, select_verb_event
from .kb import DefinitionCache, StaticKB, WikidataClient, fetch_definition
from .providers import (
    CallableEntityTyper,
    CallableEventDetector,
    EmptyEntityTyper,
    EmptyEventDetector,
    FixtureEntityTyper,
    FixtureEventDetector,
    HttpEntityTyper,
    HttpEventDetector,
    RecordingEntityTyper,
    RecordingEventDetector,
    detect_events,
    type_entity,
)
from .types import EnrichedEvent, EntityTypePrediction, EventTypePrediction

__all__ = [
    "CallableEntityTyper",
    "CallableEventDetector",
    "DefinitionCache",
    "EmptyEntityTyper",
    "EmptyEventDetector",
    "EnrichedEvent",
    "EnrichmentPolicy",
    "EntityTypePrediction",
    "EventTypePrediction",
    "FixtureEntityTyper",
    "FixtureEventDetector",
    "HttpEntityTyper",
    "HttpEventDetector",
    "ProviderSet",
    "RecordingEntityTyper",
    "RecordingEventDetector",
    "StaticKB",
    "WikidataClient",
    "detect_events",
    "enrich_event",
    "enrich_events",
    "fetch_definition",
    "select_verb_event",
    "type_entity",
]
