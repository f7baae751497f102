import json
import threading

import pytest
import requests

from semplaus.corpus import EventTriple, LabeledEvent, mark_span
from semplaus.errors import DefinitionMiss, ProviderContractError, ProviderError
from semplaus.knowledge import (
    CallableEntityTyper,
    CallableEventDetector,
    DefinitionCache,
    EmptyEntityTyper,
    EmptyEventDetector,
    EnrichmentPolicy,
    EventTypePrediction,
    FixtureEntityTyper,
    FixtureEventDetector,
    ProviderSet,
    RecordingEntityTyper,
    RecordingEventDetector,
    StaticKB,
    WikidataClient,
    detect_events,
    enrich_event,
    enrich_events,
    fetch_definition,
    select_verb_event,
    type_entity,
)

from conftest import REFERENCE

TRADER = EventTriple("trader", "ensures", "strategy")


def test_type_entity_subject_table():
    types = type_entity(mark_span(TRADER, "subject"), FixtureEntityTyper(REFERENCE / "entity_types.jsonl"))
    assert [(t.kb_id, t.label) for t in types] == [
        ("Q215627", "person"), ("Q43845", "businessperson"), ("Q1424605", "trader"),
        ("Q702269", "professional"), ("Q131524", "entrepreneur"),
    ]
    assert [t.rank for t in types] == [0, 1, 2, 3, 4]


def test_type_entity_object_table():
    types = type_entity(mark_span(TRADER, "object"), FixtureEntityTyper(REFERENCE / "entity_types.jsonl"))
    assert [t.label for t in types] == ["idea", "concept", "plan"]


def test_type_entity_stub_and_span_check():
    assert type_entity("<M> A </M> b c.", EmptyEntityTyper()) == []
    with pytest.raises(ValueError):
        type_entity("A b c.", EmptyEntityTyper())
    with pytest.raises(ValueError):
        type_entity("<M> A </M> b <M> c </M>.", EmptyEntityTyper())


ROBS_EVENTS = [
    EventTypePrediction("robs", "DWD_Q53706", "robbery"),
    EventTypePrediction("accusation", "DWD_Q19357312", "accusation"),
]


def test_detect_events_fixture_verbatim():
    preds = detect_events("Option robs accusation.", FixtureEventDetector(REFERENCE / "event_types.jsonl"))
    assert [(p.trigger, p.node_id, p.name) for p in preds] == [
        ("robs", "DWD_Q53706", "robbery"), ("accusation", "DWD_Q19357312", "accusation"),
    ]
    assert preds[1].description == "act of accusing or charging another with a crime"
    assert detect_events("Nothing happens here.", EmptyEventDetector()) == []


def test_select_verb_event():
    assert select_verb_event(ROBS_EVENTS, "robs").name == "robbery"
    assert select_verb_event(ROBS_EVENTS, "ROBS").name == "robbery"
    assert select_verb_event(ROBS_EVENTS, "ensures") is None
    assert select_verb_event([], "robs") is None
    with pytest.raises(ProviderContractError):
        select_verb_event(ROBS_EVENTS + [EventTypePrediction("robs", "DWD_Q1", "theft")], "robs")


def test_fetch_definition_caches():
    kb = StaticKB.from_file(REFERENCE / "kb_definitions.json")
    cache = DefinitionCache()
    first = fetch_definition("Q43845", kb, cache)
    assert first == "person involved in activities for the purpose of generating revenue"
    assert kb.calls == 1
    assert fetch_definition("Q43845", kb, cache) == first
    assert kb.calls == 1
    with pytest.raises(DefinitionMiss):
        fetch_definition("Q999999999", kb, cache)
    with pytest.raises(ValueError):
        fetch_definition("not-an-id", kb, cache)


def test_cache_file_round_trip_and_corrupt_lines(tmp_path, caplog):
    path = tmp_path / "cache.jsonl"
    cache = DefinitionCache(path)
    cache.put("Q1", "first thing")
    cache.put("Q2", "second thing")
    with path.open("a") as fh:
        fh.write("{not json\n")
        fh.write(json.dumps({"kb_id": "Q3"}) + "\n")
    reloaded = DefinitionCache(path)
    assert reloaded.get("Q1") == "first thing" and reloaded.get("Q2") == "second thing"
    assert len(reloaded) == 2
    assert caplog.text.count("corrupt cache line") == 2
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"kb_id", "definition", "fetched_at"}
    # A remote miss on a cached id never reaches the client.
    assert fetch_definition("Q1", StaticKB(), reloaded) == "first thing"


def test_cache_concurrent_writes(tmp_path):
    cache = DefinitionCache(tmp_path / "c.jsonl")
    threads = [threading.Thread(target=lambda i=i: [cache.put(f"Q{i}{j}", "d" * 50) for j in range(1, 50)])
               for i in range(1, 9)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(DefinitionCache(tmp_path / "c.jsonl")) == 8 * 49


class FakeResponse:
    def __init__(self, status, payload=None):
        self.status_code = status
        self._payload = payload

    def json(self):
        return self._payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.headers = {}
        self.urls = []

    def get(self, url, timeout):
        self.urls.append(url)
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def entity_payload(kb_id, desc):
    return {"entities": {kb_id: {"descriptions": {"en": {"language": "en", "value": desc}}}}}


def test_wikidata_client_parses_and_retries():
    sleeps = []
    session = FakeSession([
        requests.ConnectionError("boom"),
        FakeResponse(503),
        FakeResponse(200, entity_payload("Q43845", "person involved in activities")),
    ])
    client = WikidataClient(session=session, sleep=sleeps.append, min_interval=0)
    assert client.get_description("Q43845") == "person involved in activities"
    assert session.urls[0].endswith("/Q43845.json")
    assert sleeps == [0.5, 1.0]
    assert session.headers["User-Agent"].startswith("semplaus")


def test_wikidata_client_miss_and_exhaustion():
    client = WikidataClient(session=FakeSession([FakeResponse(404)]), sleep=lambda s: None, min_interval=0)
    with pytest.raises(DefinitionMiss):
        client.get_description("Q1")
    client = WikidataClient(session=FakeSession([FakeResponse(200, {"entities": {"Q1": {"descriptions": {}}}})]),
                            sleep=lambda s: None, min_interval=0)
    with pytest.raises(DefinitionMiss):
        client.get_description("Q1")
    client = WikidataClient(session=FakeSession([FakeResponse(500)] * 3), sleep=lambda s: None,
                            min_interval=0, max_retries=2)
    with pytest.raises(ProviderError) as exc:
        client.get_description("Q1")
    assert exc.value.retryable


def test_endpoint_override_from_env(monkeypatch):
    monkeypatch.setenv("SEMPLAUS_KB_ENDPOINT", "http://kb.local/{id}")
    session = FakeSession([FakeResponse(200, entity_payload("Q5", "human"))])
    client = WikidataClient(session=session, sleep=lambda s: None, min_interval=0)
    client.get_description("Q5")
    assert session.urls == ["http://kb.local/Q5"]


def test_enrich_trader(table_providers, trader_event):
    e = enrich_event(trader_event, table_providers)
    assert e.sentence == "Trader ensures strategy."
    assert len(e.subject_types) == 5 and len(e.object_types) == 3
    assert e.verb_type is None
    assert e.subject_types[1].description == "person involved in activities for the purpose of generating revenue"


def test_enrich_resolves_verb_definition(table_providers):
    event = LabeledEvent(EventTriple("option", "robs", "accusation"), 0)
    e = enrich_event(event, table_providers)
    assert e.verb_type.name == "robbery"
    assert e.verb_type.description.startswith("taking or attempting to take")


def test_enrich_all_empty(trader_event):
    e = enrich_event(trader_event, ProviderSet())
    assert e.subject_types == () and e.object_types == () and e.verb_type is None


def test_enrich_drops_types_without_definitions(trader_event):
    typer = CallableEntityTyper(lambda s: [{"kb_id": "Q1", "label": "a"}, {"kb_id": "Q2", "label": "b"}]
                                if s.startswith("<M>") else [])
    e = enrich_event(trader_event, ProviderSet(entity_typer=typer))
    assert e.subject_types == ()
    with pytest.raises(DefinitionMiss):
        enrich_event(trader_event, ProviderSet(entity_typer=typer), EnrichmentPolicy(on_missing_definition="error"))


def test_enrich_propagates_provider_errors(trader_event):
    def down(_):
        raise ProviderError("service down")

    with pytest.raises(ProviderError):
        enrich_event(trader_event, ProviderSet(entity_typer=CallableEntityTyper(down)))


def test_recorded_fixture_replays_identically(tmp_path, table_providers):
    """A live run recorded to fixtures and replayed gives the same enrichment."""
    live_types = FixtureEntityTyper(REFERENCE / "entity_types.jsonl")
    live_events = FixtureEventDetector(REFERENCE / "event_types.jsonl")
    recording = ProviderSet(
        RecordingEntityTyper(CallableEntityTyper(live_types.predict), tmp_path / "ent.jsonl"),
        RecordingEventDetector(CallableEventDetector(live_events.detect), tmp_path / "evt.jsonl"),
        table_providers.kb_client, DefinitionCache(),
    )
    events = [LabeledEvent(EventTriple(*t), 1) for t in
              [("trader", "ensures", "strategy"), ("hook", "wins", "role"), ("option", "robs", "accusation")]]
    live = enrich_events(events, recording, max_workers=3)
    replay = ProviderSet(FixtureEntityTyper(tmp_path / "ent.jsonl"), FixtureEventDetector(tmp_path / "evt.jsonl"),
                         table_providers.kb_client, DefinitionCache())
    assert enrich_events(events, replay) == live


def test_enriched_record_round_trip(table_providers, hook_event):
    from semplaus.knowledge import EnrichedEvent

    e = enrich_event(hook_event, table_providers)
    assert EnrichedEvent.from_record(json.loads(json.dumps(e.to_record()))) == e
