from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..corpus import LabeledEvent, realize_sentence


def _norm(text: str | None) -> str | None:
    if text is None:
        return None
    text = " ".join(text.split())
    return text or None


@dataclass(frozen=True)
class EntityTypePrediction:
    kb_id: str
    label: str
    description: str | None = None
    rank: int = 0

    def __post_init__(self):
        object.__setattr__(self, "label", _norm(self.label) or "")
        object.__setattr__(self, "description", _norm(self.description))
        if not self.kb_id or not self.label:
            raise ValueError("entity type prediction needs a kb_id and a label")

    def with_description(self, description: str | None) -> "EntityTypePrediction":
        return replace(self, description=description)

    def to_record(self) -> dict:
        return {"kb_id": self.kb_id, "label": self.label, "description": self.description, "rank": self.rank}

    @classmethod
    def from_record(cls, rec: dict, rank: int | None = None) -> "EntityTypePrediction":
        return cls(rec["kb_id"], rec["label"], rec.get("description"),
                   rec.get("rank", 0) if rank is None else rank)


@dataclass(frozen=True)
class EventTypePrediction:
    trigger: str
    node_id: str
    name: str
    description: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "name", _norm(self.name) or "")
        object.__setattr__(self, "description", _norm(self.description))
        if not self.trigger or not self.trigger.strip():
            raise ValueError("event type prediction needs a trigger")
        if not self.node_id or not self.name:
            raise ValueError("event type prediction needs a node id and a name")

    def to_record(self) -> dict:
        return {"trigger": self.trigger, "node_id": self.node_id, "name": self.name,
                "description": self.description}

    @classmethod
    def from_record(cls, rec: dict) -> "EventTypePrediction":
        return cls(rec["trigger"], rec["node_id"], rec["name"], rec.get("description"))


@dataclass(frozen=True)
class EnrichedEvent:
    event: LabeledEvent
    sentence: str
    subject_types: tuple[EntityTypePrediction, ...] = field(default=())
    object_types: tuple[EntityTypePrediction, ...] = field(default=())
    verb_type: EventTypePrediction | None = None

    def __post_init__(self):
        object.__setattr__(self, "subject_types", tuple(self.subject_types))
        object.__setattr__(self, "object_types", tuple(self.object_types))
        if self.sentence != realize_sentence(self.event.triple):
            raise ValueError(f"sentence {self.sentence!r} does not realize {self.event.triple}")
        if self.verb_type is not None and self.verb_type.trigger.lower() != self.event.triple.verb.lower():
            raise ValueError(
                f"verb type trigger {self.verb_type.trigger!r} does not match verb {self.event.triple.verb!r}"
            )

    @classmethod
    def bare(cls, event: LabeledEvent) -> "EnrichedEvent":
        return cls(event, realize_sentence(event.triple))

    def to_record(self) -> dict:
        rec = self.event.to_record()
        rec["sentence"] = self.sentence
        rec["subject_types"] = [t.to_record() for t in self.subject_types]
        rec["object_types"] = [t.to_record() for t in self.object_types]
        rec["verb_type"] = self.verb_type.to_record() if self.verb_type else None
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "EnrichedEvent":
        verb = rec.get("verb_type")
        return cls(
            LabeledEvent.from_record(rec),
            rec["sentence"],
            tuple(EntityTypePrediction.from_record(t) for t in rec.get("subject_types", [])),
            tuple(EntityTypePrediction.from_record(t) for t in rec.get("object_types", [])),
            EventTypePrediction.from_record(verb) if verb else None,
        )
