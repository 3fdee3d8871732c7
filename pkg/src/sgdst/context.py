"""Per-dialogue running state: previous intents and values, system offers,
cross-service candidates and the six per-slot binary features.

One ``DialogueContext`` is created per dialogue and advanced strictly in turn
order.  During training it is advanced with gold states; during evaluation
with the model's own predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from sgdst.corpus import (
    NONE_INTENT,
    SYSTEM,
    USER,
    Action,
    DialogueState,
    EMPTY_STATE,
    Schema,
    Service,
    Slot,
    Turn,
)

USER_HISTORY = "USER_HISTORY"
SYSTEM_HISTORY = "SYSTEM_HISTORY"

BINARY_FEATURE_DIM = 6


@dataclass(frozen=True)
class PrevSlotEntry:
    """One cross-service carryover candidate: a slot of another service with a
    known previous value, preferring user-given over system-given values."""

    service: str
    slot: str
    value: str
    source: str  # USER_HISTORY or SYSTEM_HISTORY


@dataclass(frozen=True)
class BinaryFeatures:
    service_new: int
    service_switched: int
    value_in_sys_uttr: int
    value_in_prev_sys_uttrs: int
    required_in_some_intent: int
    optional_in_all_intents: int

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.service_new,
            self.service_switched,
            self.value_in_sys_uttr,
            self.value_in_prev_sys_uttrs,
            self.required_in_some_intent,
            self.optional_in_all_intents,
        )


@dataclass
class ServiceTrack:
    """What the context remembers about one service."""

    prev_intent: str = NONE_INTENT
    prev_user_values: dict[str, str] = field(default_factory=dict)
    prev_sys_values: dict[str, str] = field(default_factory=dict)
    seen_before: bool = False  # appeared in any earlier turn
    in_previous_state: bool = False  # had a state at the immediately previous user turn


@dataclass
class DialogueContext:
    dialogue_id: str
    schema: Schema
    turn_index: int = 0
    tracks: dict[str, ServiceTrack] = field(default_factory=dict)
    # From the immediately preceding system turn only; folded into
    # prev_sys_values when the next system turn is observed.
    sys_uttr_values: dict[str, dict[str, str]] = field(default_factory=dict)
    last_system_actions: dict[str, tuple[Action, ...]] = field(default_factory=dict)
    last_system_utterance: str = ""
    service_order: list[str] = field(default_factory=list)  # first-appearance order

    def track(self, service: str) -> ServiceTrack:
        if service not in self.schema.services:
            raise KeyError(f"service {service!r} not in schema")
        if service not in self.tracks:
            self.tracks[service] = ServiceTrack()
        return self.tracks[service]

    def _mark_seen(self, service: str) -> None:
        if service not in self.service_order:
            self.service_order.append(service)
        self.track(service).seen_before = True

    # Convenience lookups; absent entries stand for the conceptual [NONE].
    def prev_intent(self, service: str) -> str:
        return self.tracks[service].prev_intent if service in self.tracks else NONE_INTENT

    def prev_user_value(self, service: str, slot: str) -> Optional[str]:
        if service in self.tracks:
            return self.tracks[service].prev_user_values.get(slot)
        return None

    def prev_sys_value(self, service: str, slot: str) -> Optional[str]:
        if service in self.tracks:
            return self.tracks[service].prev_sys_values.get(slot)
        return None

    def sys_uttr_value(self, service: str, slot: str) -> Optional[str]:
        return self.sys_uttr_values.get(service, {}).get(slot)


def init_context(schema: Schema, dialogue_id: str) -> DialogueContext:
    return DialogueContext(dialogue_id=dialogue_id, schema=schema)


def observe_system_turn(ctx: DialogueContext, system_turn: Turn) -> DialogueContext:
    """Fold the old system-offer table into the per-service history and record
    this turn's actions.

    Only actions naming a schema slot with exactly one value are recorded as
    offered values.
    """
    if system_turn.speaker != SYSTEM:
        raise ValueError(f"expected a SYSTEM turn, got {system_turn.speaker}")

    for service, values in ctx.sys_uttr_values.items():
        ctx.track(service).prev_sys_values.update(values)

    ctx.sys_uttr_values = {}
    ctx.last_system_actions = {}
    ctx.last_system_utterance = system_turn.utterance
    for frame in system_turn.frames:
        service = ctx.schema.service(frame.service)
        ctx.last_system_actions[frame.service] = frame.actions
        offered: dict[str, str] = {}
        for action in frame.actions:
            if len(action.values) == 1 and service.has_slot(action.slot):
                offered[action.slot] = action.values[0]
        if offered:
            ctx.sys_uttr_values[frame.service] = offered
        ctx._mark_seen(frame.service)
    return ctx


def observe_user_turn(ctx: DialogueContext, states: Mapping[str, DialogueState]) -> DialogueContext:
    """Advance past a user turn given the (gold or predicted) states of the
    services involved in it."""
    for service, state in states.items():
        track = ctx.track(service)
        track.prev_intent = state.active_intent
        track.prev_user_values = dict(state.slot_values)
        ctx._mark_seen(service)
    for service, track in ctx.tracks.items():
        track.in_previous_state = service in states
    ctx.turn_index += 1
    return ctx


def compute_s_prev(ctx: DialogueContext, active_service: str) -> list[PrevSlotEntry]:
    """Cross-service carryover candidates: slots of other services with a known
    previous value.  User-given values win over system-given ones.

    Order is deterministic: services by first appearance, slots in schema
    order.
    """
    entries: list[PrevSlotEntry] = []
    for service_name in ctx.service_order:
        if service_name == active_service:
            continue
        track = ctx.tracks.get(service_name)
        if track is None:
            continue
        service = ctx.schema.service(service_name)
        for slot in service.slots:
            user_value = track.prev_user_values.get(slot.name)
            if user_value is not None:
                entries.append(PrevSlotEntry(service_name, slot.name, user_value, USER_HISTORY))
                continue
            sys_value = track.prev_sys_values.get(slot.name)
            if sys_value is not None:
                entries.append(PrevSlotEntry(service_name, slot.name, sys_value, SYSTEM_HISTORY))
    return entries


def binary_features(ctx: DialogueContext, service: Service, slot: Slot) -> BinaryFeatures:
    if not service.has_slot(slot.name):
        raise KeyError(f"slot {slot.name!r} not in service {service.name}")
    track = ctx.tracks.get(service.name)
    declared = [i for i in service.intents if i.name != NONE_INTENT]
    return BinaryFeatures(
        service_new=int(track is None or not track.seen_before),
        service_switched=int(track is None or not track.in_previous_state),
        value_in_sys_uttr=int(ctx.sys_uttr_value(service.name, slot.name) is not None),
        value_in_prev_sys_uttrs=int(ctx.prev_sys_value(service.name, slot.name) is not None),
        required_in_some_intent=int(any(slot.name in i.required_slots for i in declared)),
        optional_in_all_intents=int(all(slot.name in i.optional_slots for i in declared)),
    )


def binary_feature_matrix(ctx: DialogueContext, service: Service) -> dict[str, tuple[int, ...]]:
    """Feature vectors for every slot of the service, keyed by slot name."""
    return {
        slot.name: binary_features(ctx, service, slot).as_tuple() for slot in service.slots
    }


def involved_services(
    turn: Turn, previous_states: Mapping[str, DialogueState]
) -> list[str]:
    """Services whose gold state changed at this user turn; the model runs
    only for these.  Order follows the frame order in the turn."""
    if turn.speaker != USER:
        raise ValueError("involved_services expects a USER turn")
    involved = []
    for frame in turn.frames:
        if frame.state is None:
            continue
        previous = previous_states.get(frame.service, EMPTY_STATE)
        state = frame.state
        if (
            state.active_intent != previous.active_intent
            or state.requested_slots != previous.requested_slots
            or dict(state.slot_values) != dict(previous.slot_values)
        ):
            involved.append(frame.service)
    return involved


@dataclass(frozen=True)
class ContextSnapshot:
    """The per-service view of the context frozen at example-building time;
    everything decode needs to resolve carryovers and keeps."""

    service: str
    prev_intent: str
    prev_user_values: Mapping[str, str]
    prev_sys_values: Mapping[str, str]
    sys_uttr_values: Mapping[str, str]

    @staticmethod
    def capture(ctx: DialogueContext, service: str) -> "ContextSnapshot":
        track = ctx.tracks.get(service)
        return ContextSnapshot(
            service=service,
            prev_intent=track.prev_intent if track else NONE_INTENT,
            prev_user_values=dict(track.prev_user_values) if track else {},
            prev_sys_values=dict(track.prev_sys_values) if track else {},
            sys_uttr_values=dict(ctx.sys_uttr_values.get(service, {})),
        )
