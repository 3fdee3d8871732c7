"""SGD-format corpus ingestion: schema and dialogue files to validated objects.

The on-disk layout is the one published with the SGD dataset: one
``schema.json`` per split plus ``dialogues_*.json`` files.  Loading validates
the cross-references (intents name real slots, frames name real services,
categorical state values come from the slot's inventory) so downstream code
never has to re-check them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

NONE_INTENT = "NONE"
DONTCARE = "dontcare"

USER = "USER"
SYSTEM = "SYSTEM"

# Pseudo-slots that SGD system/user actions may name without them being part
# of the service schema (OFFER_INTENT carries "intent", INFORM_COUNT "count").
ACTION_PSEUDO_SLOTS = frozenset({"", "intent", "count"})


class CorpusError(Exception):
    """Base class for schema/dialogue ingestion failures."""


class SchemaValidationError(CorpusError):
    pass


class DialogueValidationError(CorpusError):
    pass


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    name: str
    description: str
    is_categorical: bool
    possible_values: tuple[str, ...]


@dataclass(frozen=True)
class Intent:
    name: str
    required_slots: frozenset[str]
    optional_slots: frozenset[str]


@dataclass(frozen=True)
class Service:
    name: str
    intents: tuple[Intent, ...]  # NONE intent always at index 0
    slots: tuple[Slot, ...]

    def __post_init__(self):
        # Lookup tables are not dataclass fields, so equality and hashing
        # stay purely structural.
        object.__setattr__(self, "_slot_map", {s.name: s for s in self.slots})
        object.__setattr__(self, "_intent_map", {i.name: i for i in self.intents})

    def slot(self, name: str) -> Slot:
        try:
            return self._slot_map[name]
        except KeyError:
            raise KeyError(f"service {self.name!r} has no slot {name!r}") from None

    def has_slot(self, name: str) -> bool:
        return name in self._slot_map

    def intent(self, name: str) -> Intent:
        try:
            return self._intent_map[name]
        except KeyError:
            raise KeyError(f"service {self.name!r} has no intent {name!r}") from None

    def has_intent(self, name: str) -> bool:
        return name in self._intent_map

    @property
    def intent_names(self) -> list[str]:
        return [i.name for i in self.intents]


@dataclass(frozen=True)
class Schema:
    services: Mapping[str, Service]

    def service(self, name: str) -> Service:
        try:
            return self.services[name]
        except KeyError:
            raise KeyError(f"schema has no service {name!r}") from None

    def __iter__(self):
        return iter(self.services.values())

    def __len__(self) -> int:
        return len(self.services)


@dataclass(frozen=True)
class Action:
    act: str
    slot: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class SlotSpan:
    slot: str
    start: int
    end: int  # exclusive char offset


@dataclass(frozen=True)
class DialogueState:
    active_intent: str = NONE_INTENT
    requested_slots: frozenset[str] = frozenset()
    slot_values: Mapping[str, str] = field(default_factory=dict)


EMPTY_STATE = DialogueState()


@dataclass(frozen=True)
class Frame:
    service: str
    actions: tuple[Action, ...]
    state: Optional[DialogueState]  # present on USER frames only
    slot_spans: tuple[SlotSpan, ...]
    # Raw per-slot value alternatives from the corpus ("6 pm" vs "six in the
    # evening").  The canonical DialogueState keeps the first; the full tuple
    # is used when searching for label sources and when scoring predictions.
    value_variants: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class Turn:
    speaker: str
    utterance: str
    frames: tuple[Frame, ...]

    def frame_for(self, service: str) -> Optional[Frame]:
        for frame in self.frames:
            if frame.service == service:
                return frame
        return None


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    services: tuple[str, ...]
    turns: tuple[Turn, ...]

    def user_turns(self) -> list[tuple[int, Turn]]:
        return [(i, t) for i, t in enumerate(self.turns) if t.speaker == USER]


# ---------------------------------------------------------------------------
# Name preprocessing
# ---------------------------------------------------------------------------

_CAMEL_LOWER_UPPER = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_ACRONYM = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")
_MULTI_SPACE = re.compile(r"\s+")


def normalize_name(raw: str) -> str:
    """Turn a schema-style identifier into plain lowercase words.

    ``party_size`` -> ``party size``, ``FindRestaurants`` -> ``find
    restaurants``.  Idempotent, so already-normalized names pass through.
    """
    s = raw.replace("_", " ")
    s = _CAMEL_LOWER_UPPER.sub(" ", s)
    s = _CAMEL_ACRONYM.sub(" ", s)
    return _MULTI_SPACE.sub(" ", s).strip().lower()


def informable_slots(service: Service) -> list[str]:
    """Slots the user may give a value for: required or optional in at least
    one intent.  Order follows the schema slot list."""
    allowed: set[str] = set()
    for intent in service.intents:
        allowed.update(intent.required_slots)
        allowed.update(intent.optional_slots)
    return [s.name for s in service.slots if s.name in allowed]


# ---------------------------------------------------------------------------
# Schema loading
# ---------------------------------------------------------------------------

def _build_service(raw: dict, source: str) -> Service:
    name = raw.get("service_name") or raw.get("name")
    if not name:
        raise SchemaValidationError(f"{source}: service entry without a name")

    slots = []
    for raw_slot in raw.get("slots", []):
        values = tuple(str(v) for v in raw_slot.get("possible_values", []))
        is_cat = bool(raw_slot.get("is_categorical", False))
        slot = Slot(
            name=raw_slot["name"],
            description=raw_slot.get("description", ""),
            is_categorical=is_cat,
            possible_values=values,
        )
        if slot.is_categorical != bool(values):
            raise SchemaValidationError(
                f"{source}: slot {name}.{slot.name} violates is_categorical <=> "
                f"possible_values non-empty (is_categorical={is_cat}, "
                f"{len(values)} values)"
            )
        slots.append(slot)
    slot_names = {s.name for s in slots}
    if len(slot_names) != len(slots):
        raise SchemaValidationError(f"{source}: duplicate slot names in service {name}")

    intents = [Intent(NONE_INTENT, frozenset(), frozenset())]
    for raw_intent in raw.get("intents", []):
        iname = raw_intent["name"]
        if iname == NONE_INTENT:
            raise SchemaValidationError(
                f"{source}: service {name} declares reserved intent name {NONE_INTENT}"
            )
        required = frozenset(raw_intent.get("required_slots", []))
        optional = frozenset(raw_intent.get("optional_slots", {}))
        if required & optional:
            raise SchemaValidationError(
                f"{source}: intent {name}.{iname} lists slots as both required "
                f"and optional: {sorted(required & optional)}"
            )
        for slot_name in sorted(required | optional):
            if slot_name not in slot_names:
                raise SchemaValidationError(
                    f"{source}: intent {name}.{iname} references undeclared slot "
                    f"{slot_name!r}"
                )
        intents.append(Intent(iname, required, optional))
    intent_names = [i.name for i in intents]
    if len(set(intent_names)) != len(intent_names):
        raise SchemaValidationError(f"{source}: duplicate intent names in service {name}")

    return Service(name=name, intents=tuple(intents), slots=tuple(slots))


def load_schema(path: str | Path) -> Schema:
    """Load and validate an SGD ``schema.json`` file.

    The synthetic NONE intent is injected at index 0 of every service so the
    intent-value head always has a fixed slot for "no active intent".
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaValidationError(f"{path}: malformed JSON at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise SchemaValidationError(f"{path}: expected a JSON list of services")

    services: dict[str, Service] = {}
    for entry in raw:
        service = _build_service(entry, str(path))
        if service.name in services:
            raise SchemaValidationError(f"{path}: duplicate service name {service.name!r}")
        services[service.name] = service
    return Schema(services=services)


# ---------------------------------------------------------------------------
# Dialogue loading
# ---------------------------------------------------------------------------

def _build_state(raw_state: dict, service: Service, where: str) -> tuple[DialogueState, dict[str, tuple[str, ...]]]:
    intent = raw_state.get("active_intent", NONE_INTENT)
    if not service.has_intent(intent):
        raise DialogueValidationError(f"{where}: unknown intent {intent!r} for service {service.name}")

    requested = frozenset(raw_state.get("requested_slots", []))
    for slot_name in sorted(requested):
        if not service.has_slot(slot_name):
            raise DialogueValidationError(f"{where}: requested unknown slot {slot_name!r}")

    informable = set(informable_slots(service))
    slot_values: dict[str, str] = {}
    variants: dict[str, tuple[str, ...]] = {}
    for slot_name, raw_values in raw_state.get("slot_values", {}).items():
        if slot_name not in informable:
            raise DialogueValidationError(
                f"{where}: state assigns non-informable or unknown slot {slot_name!r}"
            )
        values = tuple(str(v) for v in (raw_values if isinstance(raw_values, list) else [raw_values]))
        if not values:
            raise DialogueValidationError(f"{where}: empty value list for slot {slot_name!r}")
        slot = service.slot(slot_name)
        if slot.is_categorical:
            for v in values:
                if v != DONTCARE and v not in slot.possible_values:
                    raise DialogueValidationError(
                        f"{where}: value {v!r} for categorical slot {slot_name!r} "
                        f"not in its possible values"
                    )
        slot_values[slot_name] = values[0]
        variants[slot_name] = values
    return DialogueState(intent, requested, slot_values), variants


def _build_frame(raw_frame: dict, schema: Schema, speaker: str, where: str) -> Frame:
    service_name = raw_frame.get("service")
    if service_name not in schema.services:
        raise DialogueValidationError(f"{where}: unknown service {service_name!r}")
    service = schema.service(service_name)

    actions = []
    for raw_action in raw_frame.get("actions", []):
        slot_name = raw_action.get("slot", "")
        if slot_name not in ACTION_PSEUDO_SLOTS and not service.has_slot(slot_name):
            raise DialogueValidationError(
                f"{where}: action references unknown slot {slot_name!r} of {service_name}"
            )
        actions.append(
            Action(
                act=raw_action.get("act", ""),
                slot=slot_name,
                values=tuple(str(v) for v in raw_action.get("values", [])),
            )
        )

    spans = []
    for raw_span in raw_frame.get("slots", []):
        slot_name = raw_span["slot"]
        if not service.has_slot(slot_name):
            raise DialogueValidationError(
                f"{where}: span annotation for unknown slot {slot_name!r}"
            )
        spans.append(SlotSpan(slot_name, int(raw_span["start"]), int(raw_span["exclusive_end"])))

    state = None
    variants: dict[str, tuple[str, ...]] = {}
    if speaker == USER:
        raw_state = raw_frame.get("state")
        if raw_state is None:
            raise DialogueValidationError(f"{where}: USER frame without a state")
        state, variants = _build_state(raw_state, service, where)

    return Frame(
        service=service_name,
        actions=tuple(actions),
        state=state,
        slot_spans=tuple(spans),
        value_variants=variants,
    )


def _build_dialogue(raw: dict, schema: Schema, where: str) -> Dialogue:
    dialogue_id = str(raw.get("dialogue_id", ""))
    services = tuple(raw.get("services", []))
    for name in services:
        if name not in schema.services:
            raise DialogueValidationError(f"{where}: dialogue {dialogue_id} uses unknown service {name!r}")

    turns = []
    prev_speaker = None
    for t_idx, raw_turn in enumerate(raw.get("turns", [])):
        speaker = raw_turn.get("speaker", "")
        if speaker not in (USER, SYSTEM):
            raise DialogueValidationError(f"{where}: {dialogue_id} turn {t_idx} has speaker {speaker!r}")
        if speaker == prev_speaker:
            raise DialogueValidationError(
                f"{where}: {dialogue_id} turn {t_idx} does not alternate speakers"
            )
        prev_speaker = speaker

        frames = []
        seen_services = set()
        for raw_frame in raw_turn.get("frames", []):
            frame = _build_frame(raw_frame, schema, speaker, f"{where}: {dialogue_id} turn {t_idx}")
            if frame.service in seen_services:
                raise DialogueValidationError(
                    f"{where}: {dialogue_id} turn {t_idx} repeats service {frame.service}"
                )
            if frame.service not in services:
                raise DialogueValidationError(
                    f"{where}: {dialogue_id} turn {t_idx} frame service {frame.service!r} "
                    f"missing from dialogue services"
                )
            seen_services.add(frame.service)
            frames.append(frame)
        turns.append(Turn(speaker=speaker, utterance=raw_turn.get("utterance", ""), frames=tuple(frames)))

    return Dialogue(dialogue_id=dialogue_id, services=services, turns=tuple(turns))


def load_dialogues(path: str | Path, schema: Schema) -> list[Dialogue]:
    """Load every ``dialogues_*.json`` under ``path``, validated against
    ``schema``.  Order is lexicographic by filename, then in-file position."""
    path = Path(path)
    dialogues: list[Dialogue] = []
    for file in sorted(path.glob("dialogues_*.json")):
        try:
            raw = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DialogueValidationError(f"{file}: malformed JSON at offset {exc.pos}: {exc.msg}") from exc
        if not isinstance(raw, list):
            raise DialogueValidationError(f"{file}: expected a JSON list of dialogues")
        for raw_dialogue in raw:
            dialogues.append(_build_dialogue(raw_dialogue, schema, str(file)))
    return dialogues


# ---------------------------------------------------------------------------
# Serialization back to SGD JSON (round-trip support)
# ---------------------------------------------------------------------------

def schema_to_json(schema: Schema) -> list[dict]:
    out = []
    for service in schema:
        out.append(
            {
                "service_name": service.name,
                "slots": [
                    {
                        "name": s.name,
                        "description": s.description,
                        "is_categorical": s.is_categorical,
                        "possible_values": list(s.possible_values),
                    }
                    for s in service.slots
                ],
                "intents": [
                    {
                        "name": i.name,
                        "required_slots": sorted(i.required_slots),
                        "optional_slots": {s: "" for s in sorted(i.optional_slots)},
                    }
                    for i in service.intents
                    if i.name != NONE_INTENT
                ],
            }
        )
    return out


def dialogues_to_json(dialogues: Iterable[Dialogue]) -> list[dict]:
    out = []
    for d in dialogues:
        turns = []
        for turn in d.turns:
            frames = []
            for frame in turn.frames:
                raw_frame: dict = {
                    "service": frame.service,
                    "actions": [
                        {"act": a.act, "slot": a.slot, "values": list(a.values)}
                        for a in frame.actions
                    ],
                    "slots": [
                        {"slot": s.slot, "start": s.start, "exclusive_end": s.end}
                        for s in frame.slot_spans
                    ],
                }
                if frame.state is not None:
                    raw_frame["state"] = {
                        "active_intent": frame.state.active_intent,
                        "requested_slots": sorted(frame.state.requested_slots),
                        "slot_values": {
                            slot: list(frame.value_variants.get(slot, (value,)))
                            for slot, value in frame.state.slot_values.items()
                        },
                    }
                frames.append(raw_frame)
            turns.append({"speaker": turn.speaker, "utterance": turn.utterance, "frames": frames})
        out.append({"dialogue_id": d.dialogue_id, "services": list(d.services), "turns": turns})
    return out
