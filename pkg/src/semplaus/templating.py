"""Knowledge-injection prompt templates.

An ``evt_ent`` prompt has four newline-separated sections:

    [EVT] Trader ensures strategy. [/EVT]
    The subject "Trader" has type [STYPE]person[/STYPE], which means [DEF]...[/DEF]. It can also have type ...
    The verb "ensures" has an unknown type.
    The object "strategy" has type [OTYPE]idea[/OTYPE], which means [DEF]...[/DEF]. ...

``evt`` drops the subject and object sections, ``ent`` drops the verb
section, and ``baseline`` is the bare sentence with no markers.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

from .corpus import PROMPT_MARKERS, surface_tokens
from .errors import MalformedPromptError
from .knowledge.types import EnrichedEvent, EntityTypePrediction

TEMPLATE_SENT = "[EVT] {sent} [/EVT]"
TEMPLATE_SUBJ_BASIC = 'The subject "{subj}" has type [STYPE]{stype}[/STYPE], which means [DEF]{stype_desc}[/DEF].'
TEMPLATE_SUBJ_EXTEND = "It can also have type [STYPE]{stype}[/STYPE], which means [DEF]{stype_desc}[/DEF]."
TEMPLATE_SUBJ_UNK = 'The subject "{subj}" has an unknown type.'
TEMPLATE_VERB = 'The verb "{verb}" has type [ETYPE]{etype}[/ETYPE], which means [DEF]{etype_desc}[/DEF].'
TEMPLATE_VERB_UNK = 'The verb "{verb}" has an unknown type.'
TEMPLATE_OBJ_BASIC = 'The object "{obj}" has type [OTYPE]{otype}[/OTYPE], which means [DEF]{otype_desc}[/DEF].'
TEMPLATE_OBJ_EXTEND = "It can also have type [OTYPE]{otype}[/OTYPE], which means [DEF]{otype_desc}[/DEF]."
TEMPLATE_OBJ_UNK = 'The object "{obj}" has an unknown type.'

TRIVIAL_ENTITY_TYPE = "entity"


class Mode(str, Enum):
    EVT_ENT = "evt_ent"
    EVT = "evt"
    ENT = "ent"
    BASELINE = "baseline"

    @property
    def with_events(self) -> bool:
        return self in (Mode.EVT_ENT, Mode.EVT)

    @property
    def with_entities(self) -> bool:
        return self in (Mode.EVT_ENT, Mode.ENT)


@dataclass(frozen=True)
class PromptConfig:
    mode: Mode = Mode.EVT_ENT

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass(frozen=True)
class PromptFlags:
    verb_unknown: bool = False
    subject_unknown: bool = False
    object_unknown: bool = False
    has_trivial_entity_type: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PromptRecord:
    prompt: str
    label: int
    event_ref: dict = field(default_factory=dict)
    flags: PromptFlags = field(default_factory=PromptFlags)
    mode: Mode = Mode.EVT_ENT

    def to_record(self) -> dict:
        return {
            "prompt": self.prompt,
            "label": self.label,
            "dataset": self.event_ref.get("dataset"),
            "split": self.event_ref.get("split"),
            "mode": Mode(self.mode).value,
            "flags": self.flags.to_dict(),
            "event": {k: self.event_ref[k] for k in ("subject", "verb", "object", "origin") if k in self.event_ref},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PromptRecord":
        ref = {"dataset": rec.get("dataset"), "split": rec.get("split"), **rec.get("event", {})}
        return cls(rec["prompt"], int(rec["label"]), ref, PromptFlags(**rec.get("flags", {})),
                   Mode(rec.get("mode", "evt_ent")))


def canonicalize(text: str) -> str:
    """Normalization applied before golden comparisons: ASCII quotes, LF newlines, no trailing blanks."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = text.translate(str.maketrans({"“": '"', "”": '"', "‘": "'", "’": "'"}))
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


def _check_value(value: str) -> str:
    for m in PROMPT_MARKERS:
        if m in value:
            raise ValueError(f"value {value!r} contains reserved marker {m}")
    if "\n" in value:
        raise ValueError(f"value {value!r} contains a newline")
    return value


def _entity_section(types: Sequence[EntityTypePrediction], basic: str, extend: str, unk: str,
                    mention_key: str, mention: str, type_key: str) -> str:
    if not types:
        return unk.format(**{mention_key: mention})
    parts = []
    for i, t in enumerate(types):
        if t.description is None:
            raise ValueError(f"type {t.kb_id} ({t.label}) has no definition")
        tmpl = basic if i == 0 else extend
        parts.append(tmpl.format(**{
            mention_key: mention,
            type_key: _check_value(t.label),
            f"{type_key}_desc": _check_value(t.description),
        }))
    return " ".join(parts)


def render_sections(enriched: EnrichedEvent, mode: Mode) -> list[str]:
    mode = Mode(mode)
    sent = enriched.sentence
    if not sent:
        raise ValueError("enriched event has an empty sentence")
    if mode is Mode.BASELINE:
        return [sent]
    subj, verb, obj = surface_tokens(enriched.event.triple)
    sections = [TEMPLATE_SENT.format(sent=sent)]
    if mode.with_entities:
        sections.append(_entity_section(enriched.subject_types, TEMPLATE_SUBJ_BASIC, TEMPLATE_SUBJ_EXTEND,
                                        TEMPLATE_SUBJ_UNK, "subj", subj, "stype"))
    if mode.with_events:
        vt = enriched.verb_type
        if vt is None:
            sections.append(TEMPLATE_VERB_UNK.format(verb=verb))
        else:
            if vt.description is None:
                raise ValueError(f"event type {vt.node_id} has no definition")
            sections.append(TEMPLATE_VERB.format(verb=verb, etype=_check_value(vt.name),
                                                 etype_desc=_check_value(vt.description)))
    if mode.with_entities:
        sections.append(_entity_section(enriched.object_types, TEMPLATE_OBJ_BASIC, TEMPLATE_OBJ_EXTEND,
                                        TEMPLATE_OBJ_UNK, "obj", obj, "otype"))
    return sections


def render_prompt(enriched: EnrichedEvent, config: PromptConfig | Mode | str = Mode.EVT_ENT) -> PromptRecord:
    mode = config.mode if isinstance(config, PromptConfig) else Mode(config)
    prompt = "\n".join(render_sections(enriched, mode))

    if mode is Mode.BASELINE:
        flags = PromptFlags()
    else:
        ent = mode.with_entities
        flags = PromptFlags(
            verb_unknown=mode.with_events and enriched.verb_type is None,
            subject_unknown=ent and not enriched.subject_types,
            object_unknown=ent and not enriched.object_types,
            has_trivial_entity_type=ent and any(
                t.label == TRIVIAL_ENTITY_TYPE for t in enriched.subject_types + enriched.object_types
            ),
        )
    rec = enriched.event.to_record()
    ref = {k: rec[k] for k in ("subject", "verb", "object", "dataset", "split", "origin")}
    return PromptRecord(prompt, enriched.event.label, ref, flags, mode)


_MARKER_RE = re.compile(r"\[(/?)(EVT|STYPE|OTYPE|ETYPE|DEF)\]")
_UNK_RE = {
    role: re.compile(rf'(?m)^The {role} ".*" has an unknown type\.$')
    for role in ("subject", "verb", "object")
}


def _spans(prompt: str) -> list[tuple[str, int, int]]:
    """(tag, content start, content end) for every marker pair; raises on imbalance or nesting."""
    spans, open_tag = [], None
    for m in _MARKER_RE.finditer(prompt):
        closing, tag = m.group(1) == "/", m.group(2)
        if not closing:
            if open_tag is not None:
                raise MalformedPromptError(f"[{tag}] opened inside [{open_tag[0]}] at offset {m.start()}")
            open_tag = (tag, m.end())
        else:
            if open_tag is None or open_tag[0] != tag:
                raise MalformedPromptError(f"unexpected [/{tag}] at offset {m.start()}")
            spans.append((tag, open_tag[1], m.start()))
            open_tag = None
    if open_tag is not None:
        raise MalformedPromptError(f"unclosed [{open_tag[0]}]")
    return spans


def inspect_prompt(prompt: str) -> PromptFlags:
    """Recover a prompt's flags by scanning its markers and unknown-type clauses."""
    spans = _spans(prompt)
    # Blank out definitions so their text cannot fake a clause.
    masked = list(prompt)
    trivial = False
    for tag, start, end in spans:
        if tag == "DEF":
            masked[start:end] = " " * (end - start)
        elif tag in ("STYPE", "OTYPE") and prompt[start:end] == TRIVIAL_ENTITY_TYPE:
            trivial = True
    masked_text = "".join(masked)
    return PromptFlags(
        verb_unknown=bool(_UNK_RE["verb"].search(masked_text)),
        subject_unknown=bool(_UNK_RE["subject"].search(masked_text)),
        object_unknown=bool(_UNK_RE["object"].search(masked_text)),
        has_trivial_entity_type=trivial,
    )
