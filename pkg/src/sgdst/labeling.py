"""Turn-level training targets derived from gold dialogue states.

For every user turn and involved service we label, per slot, how the new
value (if any) should be obtained:

  * the user stated it directly (categorical choice or a span in the user
    utterance),
  * the user said "dontcare",
  * it has to be carried over from the preceding system utterance, from the
    same service earlier in the dialogue, or from another service,
  * or none of the above, in which case the slot is unresolvable and is
    excluded from the loss.

Labels are derived against the same context the model will see, so the
walker below advances the context with gold states (teacher forcing).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Optional, Sequence

from sgdst.context import (
    ContextSnapshot,
    PrevSlotEntry,
    binary_feature_matrix,
    compute_s_prev,
    init_context,
    involved_services,
    observe_system_turn,
    observe_user_turn,
)
from sgdst.corpus import (
    DONTCARE,
    SYSTEM,
    Action,
    Dialogue,
    DialogueState,
    Frame,
    Schema,
    Service,
    informable_slots,
)
from sgdst.tokenization import Tokenizer


class UserStatus(IntEnum):
    NONE = 0
    ACTIVE = 1
    DONTCARE = 2


class CarryoverStatus(IntEnum):
    NONE = 0
    IN_SYS_UTTR = 1
    IN_SERVICE_HIST = 2
    IN_CROSS_SERVICE_HIST = 3


N_USER_STATUS = len(UserStatus)
N_CARRYOVER_STATUS = len(CarryoverStatus)


@dataclass
class SlotLabels:
    slot: str
    user_status: UserStatus = UserStatus.NONE
    carryover_status: CarryoverStatus = CarryoverStatus.NONE
    cat_value: Optional[str] = None  # gold categorical value when ACTIVE
    span_chars: Optional[tuple[int, int]] = None  # [start, end) in the user utterance
    span_tokens: Optional[tuple[int, int]] = None  # inclusive utterance-token indices
    cross_index: Optional[int] = None  # s_prev entry for IN_CROSS_SERVICE_HIST
    resolvable: bool = True

    @property
    def is_update(self) -> bool:
        return (
            self.user_status != UserStatus.NONE
            or self.carryover_status != CarryoverStatus.NONE
            or not self.resolvable
        )


@dataclass
class TurnLabels:
    intent_changed: int
    active_intent: str
    requested: frozenset[str]
    slots: dict[str, SlotLabels]

    @property
    def unresolvable(self) -> tuple[str, ...]:
        return tuple(s for s, lab in self.slots.items() if not lab.resolvable)


def _matches(candidate: Optional[str], variants: Sequence[str]) -> bool:
    if candidate is None:
        return False
    c = candidate.strip().casefold()
    return any(c == v.strip().casefold() for v in variants)


def token_span_from_chars(
    offsets: Sequence[tuple[int, int]], start: int, end: int
) -> Optional[tuple[int, int]]:
    """Snap a character span outward to the tokens it overlaps; inclusive
    token indices."""
    covering = [i for i, (s, e) in enumerate(offsets) if s < end and e > start]
    if not covering:
        return None
    return covering[0], covering[-1]


def derive_intent_labels(snapshot: ContextSnapshot, state: DialogueState) -> tuple[int, str]:
    return int(state.active_intent != snapshot.prev_intent), state.active_intent


def derive_requested_labels(state: DialogueState) -> frozenset[str]:
    return frozenset(state.requested_slots)


def derive_slot_labels(
    snapshot: ContextSnapshot,
    service: Service,
    frame: Frame,
    utterance_offsets: Optional[Sequence[tuple[int, int]]],
    s_prev: Sequence[PrevSlotEntry],
) -> dict[str, SlotLabels]:
    """Resolve the source of every slot update in the frame's gold state.

    Precedence: dontcare, then directly stated by the user, then the last
    system utterance, then this service's earlier offers, then other
    services' history.  Slots whose gold value is unchanged from the context
    get the all-NONE label (decoded as keep).
    """
    assert frame.state is not None, "slot labels need a gold state"
    state = frame.state
    spans = {sp.slot: sp for sp in frame.slot_spans}
    user_action_values: dict[str, list[str]] = {}
    for action in frame.actions:
        if action.slot and action.values:
            user_action_values.setdefault(action.slot, []).extend(action.values)

    labels: dict[str, SlotLabels] = {}
    for slot_name in informable_slots(service):
        slot = service.slot(slot_name)
        lab = SlotLabels(slot=slot_name)
        labels[slot_name] = lab

        gold = state.slot_values.get(slot_name)
        if gold is None:
            continue
        variants = frame.value_variants.get(slot_name, (gold,))
        if _matches(snapshot.prev_user_values.get(slot_name), variants):
            continue  # already in the state; keep

        if gold == DONTCARE:
            lab.user_status = UserStatus.DONTCARE
            continue

        if slot.is_categorical:
            stated = user_action_values.get(slot_name, ())
            if any(_matches(v, variants) for v in stated):
                lab.user_status = UserStatus.ACTIVE
                lab.cat_value = gold
                continue
        else:
            span = spans.get(slot_name)
            if span is not None:
                lab.span_chars = (span.start, span.end)
                if utterance_offsets is not None:
                    lab.span_tokens = token_span_from_chars(
                        utterance_offsets, span.start, span.end
                    )
                lab.user_status = UserStatus.ACTIVE
                continue

        if _matches(snapshot.sys_uttr_values.get(slot_name), variants):
            lab.carryover_status = CarryoverStatus.IN_SYS_UTTR
            continue
        if _matches(snapshot.prev_sys_values.get(slot_name), variants):
            lab.carryover_status = CarryoverStatus.IN_SERVICE_HIST
            continue
        cross = next(
            (i for i, entry in enumerate(s_prev) if _matches(entry.value, variants)), None
        )
        if cross is not None:
            lab.carryover_status = CarryoverStatus.IN_CROSS_SERVICE_HIST
            lab.cross_index = cross
            continue

        lab.resolvable = False
    return labels


def derive_turn_labels(
    snapshot: ContextSnapshot,
    service: Service,
    frame: Frame,
    utterance_offsets: Optional[Sequence[tuple[int, int]]],
    s_prev: Sequence[PrevSlotEntry],
) -> TurnLabels:
    changed, intent = derive_intent_labels(snapshot, frame.state)
    return TurnLabels(
        intent_changed=changed,
        active_intent=intent,
        requested=derive_requested_labels(frame.state),
        slots=derive_slot_labels(snapshot, service, frame, utterance_offsets, s_prev),
    )


# ---------------------------------------------------------------------------
# Turn instances: one model call's worth of inputs, context and targets
# ---------------------------------------------------------------------------

@dataclass
class TurnInstance:
    dialogue_id: str
    turn_index: int  # absolute index into dialogue.turns
    service: str
    utterance: str
    system_utterance: str
    system_actions: tuple[Action, ...]
    snapshot: ContextSnapshot
    s_prev: tuple[PrevSlotEntry, ...]
    features: dict[str, tuple[int, ...]]  # slot name -> 6 binary features
    labels: Optional[TurnLabels] = None
    gold_state: Optional[DialogueState] = None

    @property
    def uid(self) -> str:
        return f"{self.dialogue_id}:{self.turn_index}:{self.service}"


def iter_turn_instances(
    dialogue: Dialogue,
    schema: Schema,
    tokenizer: Optional[Tokenizer] = None,
    include_labels: bool = True,
) -> Iterator[TurnInstance]:
    """Walk a dialogue with gold states, yielding one instance per
    (user turn, involved service).  The tokenizer is only needed to express
    gold spans in token indices; pass None to skip that."""
    ctx = init_context(schema, dialogue.dialogue_id)
    latest_states: dict[str, DialogueState] = {}
    for turn_index, turn in enumerate(dialogue.turns):
        if turn.speaker == SYSTEM:
            observe_system_turn(ctx, turn)
            continue

        involved = involved_services(turn, latest_states)
        system_actions = tuple(
            action for actions in ctx.last_system_actions.values() for action in actions
        )
        offsets = None
        if tokenizer is not None:
            offsets = tokenizer.utterance_tokens(turn.utterance)[1]

        for service_name in involved:
            frame = turn.frame_for(service_name)
            service = schema.service(service_name)
            s_prev = tuple(compute_s_prev(ctx, service_name))
            snapshot = ContextSnapshot.capture(ctx, service_name)
            labels = None
            if include_labels:
                labels = derive_turn_labels(snapshot, service, frame, offsets, s_prev)
            yield TurnInstance(
                dialogue_id=dialogue.dialogue_id,
                turn_index=turn_index,
                service=service_name,
                utterance=turn.utterance,
                system_utterance=ctx.last_system_utterance,
                system_actions=system_actions,
                snapshot=snapshot,
                s_prev=s_prev,
                features=binary_feature_matrix(ctx, service),
                labels=labels,
                gold_state=frame.state,
            )

        states = {f.service: f.state for f in turn.frames if f.state is not None}
        observe_user_turn(ctx, states)
        latest_states.update(states)


def iter_corpus_instances(
    dialogues: Sequence[Dialogue],
    schema: Schema,
    tokenizer: Optional[Tokenizer] = None,
    include_labels: bool = True,
) -> Iterator[TurnInstance]:
    for dialogue in dialogues:
        yield from iter_turn_instances(dialogue, schema, tokenizer, include_labels)


def count_label_sources(instances: Sequence[TurnInstance]) -> Counter:
    """Tally where slot updates come from; keys are the status names plus
    'unresolvable' and 'keep'."""
    counts: Counter = Counter()
    for instance in instances:
        if instance.labels is None:
            continue
        for lab in instance.labels.slots.values():
            if not lab.resolvable:
                counts["unresolvable"] += 1
            elif lab.user_status != UserStatus.NONE:
                counts[lab.user_status.name.lower()] += 1
            elif lab.carryover_status != CarryoverStatus.NONE:
                counts[lab.carryover_status.name.lower()] += 1
            else:
                counts["keep"] += 1
    return counts


def unresolvable_rate(counts: Counter) -> float:
    """Fraction of slot updates (keeps excluded) without a derivable source."""
    updates = sum(n for key, n in counts.items() if key != "keep")
    return counts["unresolvable"] / updates if updates else 0.0


def instance_to_json(instance: TurnInstance) -> dict:
    """JSON-friendly dump of one instance, for the example-dump command."""
    record = {
        "dialogue_id": instance.dialogue_id,
        "turn_index": instance.turn_index,
        "service": instance.service,
        "utterance": instance.utterance,
        "system_utterance": instance.system_utterance,
        "prev_intent": instance.snapshot.prev_intent,
        "s_prev": [
            {"service": e.service, "slot": e.slot, "value": e.value, "source": e.source}
            for e in instance.s_prev
        ],
        "features": {slot: list(vec) for slot, vec in instance.features.items()},
    }
    if instance.labels is not None:
        labels = instance.labels
        record["labels"] = {
            "intent_changed": labels.intent_changed,
            "active_intent": labels.active_intent,
            "requested": sorted(labels.requested),
            "slots": {
                name: {
                    "user_status": lab.user_status.name,
                    "carryover_status": lab.carryover_status.name,
                    "cat_value": lab.cat_value,
                    "span_chars": list(lab.span_chars) if lab.span_chars else None,
                    "span_tokens": list(lab.span_tokens) if lab.span_tokens else None,
                    "cross_index": lab.cross_index,
                    "resolvable": lab.resolvable,
                }
                for name, lab in labels.slots.items()
            },
        }
    return record


def dump_instances_jsonl(instances: Sequence[TurnInstance], path) -> int:
    with open(path, "w", encoding="utf-8") as handle:
        for instance in instances:
            handle.write(json.dumps(instance_to_json(instance), ensure_ascii=False) + "\n")
    return len(instances)
