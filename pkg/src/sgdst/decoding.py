"""Turning per-head probabilities into dialogue state updates.

Decoding is deliberately torch-free: it consumes plain numpy arrays and
python dicts so it can be unit-tested against hand-built probability tables
and driven by the label-derived oracle as well as by the model.

Per-slot precedence mirrors the labeling module: an ACTIVE user status wins
(categorical argmax or best start/end span), then DONTCARE, then the
carryover classes, then keep.  All argmax ties resolve to the lowest
serialized index.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from sgdst.context import ContextSnapshot, PrevSlotEntry
from sgdst.corpus import DONTCARE, DialogueState
from sgdst.encoding import EncodedInput
from sgdst.labeling import CarryoverStatus, TurnInstance, TurnLabels, UserStatus


@dataclass(frozen=True)
class DecodeOptions:
    binary_threshold: float = 0.5
    # Carryover classes remapped to NONE after the argmax; used for the
    # disable-carryover ablation.
    disabled_carryover: frozenset[CarryoverStatus] = frozenset()

    def __post_init__(self):
        if not 0.0 < self.binary_threshold < 1.0:
            raise ValueError(f"binary_threshold must be in (0, 1), got {self.binary_threshold}")

    @staticmethod
    def with_disabled(names: Iterable[str]) -> "DecodeOptions":
        classes = set()
        for name in names:
            try:
                status = CarryoverStatus[name.strip().upper()]
            except KeyError:
                known = ", ".join(s.name.lower() for s in CarryoverStatus)
                raise ValueError(f"unknown carryover class {name!r}; expected one of {known}")
            if status == CarryoverStatus.NONE:
                raise ValueError("cannot disable the NONE carryover class")
            classes.add(status)
        return DecodeOptions(disabled_carryover=frozenset(classes))


@dataclass
class TurnPredictions:
    """Per-head probabilities for one (turn, service) model call, keyed the
    same way the input was serialized."""

    service: str
    utterance: str
    user_offsets: list[tuple[int, int]]
    intent_status: np.ndarray  # (2,): keep / changed
    intent_scores: dict[str, float]  # intent name -> activation prob
    requested_scores: dict[str, float]  # slot -> prob, all slots
    user_status: dict[str, np.ndarray]  # informable slot -> (3,)
    carryover: dict[str, np.ndarray]  # informable slot -> (4,)
    categorical: dict[str, dict[str, float]]  # slot -> value -> prob
    span_start: dict[str, np.ndarray]  # slot -> (n kept user tokens,)
    span_end: dict[str, np.ndarray]
    cross: dict[str, dict[int, float]]  # slot -> s_prev index -> prob


@dataclass
class DecodedTurn:
    state: DialogueState
    counters: Counter = field(default_factory=Counter)
    slot_sources: dict[str, str] = field(default_factory=dict)


def _argmax_dict(scores: Mapping):
    """Key with the highest score; ties go to the earliest inserted key."""
    best_key, best_score = None, -np.inf
    for key, score in scores.items():
        if score > best_score:
            best_key, best_score = key, float(score)
    return best_key


def decode_intent(preds: TurnPredictions, snapshot: ContextSnapshot) -> str:
    if int(np.argmax(preds.intent_status)) == 0:
        return snapshot.prev_intent
    chosen = _argmax_dict(preds.intent_scores)
    return chosen if chosen is not None else snapshot.prev_intent


def decode_requested(preds: TurnPredictions, options: DecodeOptions) -> frozenset[str]:
    # Strictly above the threshold; a score exactly at it is excluded.
    return frozenset(
        slot for slot, score in preds.requested_scores.items()
        if score > options.binary_threshold
    )


def best_span(start_probs: np.ndarray, end_probs: np.ndarray) -> Optional[tuple[int, int]]:
    """Highest p_start[i] * p_end[j] over i <= j; first such pair on ties."""
    n = len(start_probs)
    if n == 0 or len(end_probs) != n:
        return None
    joint = np.outer(start_probs, end_probs)
    joint[np.tril_indices(n, k=-1)] = -np.inf
    flat = int(np.argmax(joint))
    return flat // n, flat % n


def decode_slot_update(
    preds: TurnPredictions,
    slot: str,
    snapshot: ContextSnapshot,
    s_prev: tuple[PrevSlotEntry, ...],
    options: DecodeOptions,
    counters: Counter,
) -> tuple[Optional[str], str]:
    """New value for the slot, or None to keep, plus a source tag for
    diagnostics."""
    status = UserStatus(int(np.argmax(preds.user_status[slot])))

    if status == UserStatus.ACTIVE:
        values = preds.categorical.get(slot)
        if values:  # categorical slot
            return _argmax_dict(values), "categorical"
        span = best_span(preds.span_start.get(slot, np.empty(0)),
                         preds.span_end.get(slot, np.empty(0)))
        if span is None:
            counters["active_without_span_support"] += 1
            return None, "keep"
        start_char = preds.user_offsets[span[0]][0]
        end_char = preds.user_offsets[span[1]][1]
        return preds.utterance[start_char:end_char], "span"

    if status == UserStatus.DONTCARE:
        return DONTCARE, "dontcare"

    carry = CarryoverStatus(int(np.argmax(preds.carryover[slot])))
    if carry in options.disabled_carryover:
        counters[f"disabled_{carry.name.lower()}"] += 1
        carry = CarryoverStatus.NONE

    if carry == CarryoverStatus.IN_SYS_UTTR:
        value = snapshot.sys_uttr_values.get(slot)
        if value is None:
            counters["missing_sys_uttr_value"] += 1
            return None, "keep"
        return value, "in_sys_uttr"

    if carry == CarryoverStatus.IN_SERVICE_HIST:
        value = snapshot.prev_sys_values.get(slot)
        if value is None:
            counters["missing_service_hist_value"] += 1
            return None, "keep"
        return value, "in_service_hist"

    if carry == CarryoverStatus.IN_CROSS_SERVICE_HIST:
        entries = preds.cross.get(slot) or {}
        index = _argmax_dict(entries)
        if index is None or index >= len(s_prev):
            counters["missing_cross_service_entry"] += 1
            return None, "keep"
        return s_prev[index].value, "in_cross_service_hist"

    return None, "keep"


def decode_turn(
    preds: TurnPredictions,
    snapshot: ContextSnapshot,
    s_prev: tuple[PrevSlotEntry, ...],
    options: DecodeOptions = DecodeOptions(),
) -> DecodedTurn:
    """Full state update for one (turn, service): overlay decoded slot values
    on the previous state, replace requested slots and the active intent."""
    counters: Counter = Counter()
    slot_values = dict(snapshot.prev_user_values)
    sources: dict[str, str] = {}
    for slot in preds.user_status:
        value, source = decode_slot_update(preds, slot, snapshot, s_prev, options, counters)
        sources[slot] = source
        if value is not None:
            slot_values[slot] = value
    state = DialogueState(
        active_intent=decode_intent(preds, snapshot),
        requested_slots=decode_requested(preds, options),
        slot_values=slot_values,
    )
    return DecodedTurn(state=state, counters=counters, slot_sources=sources)


# ---------------------------------------------------------------------------
# Oracle: one-hot predictions straight from derived labels
# ---------------------------------------------------------------------------

def _one_hot(index: int, size: int) -> np.ndarray:
    probs = np.zeros(size, dtype=np.float64)
    probs[index] = 1.0
    return probs


def predictions_from_labels(
    instance: TurnInstance, encoded: EncodedInput, labels: Optional[TurnLabels] = None
) -> TurnPredictions:
    """Turn derived labels into the one-hot probability tables the decoder
    consumes.  Round-tripping labels through this and decode_turn must
    reproduce the gold state update wherever labels are resolvable; that is
    the oracle-check invariant."""
    if labels is None:
        labels = instance.labels
    assert labels is not None, "oracle predictions need labels"

    intent_scores = {
        name: 1.0 if name == labels.active_intent else 0.0
        for name in encoded.index_map.intents
    }
    requested_scores = {
        slot: 1.0 if slot in labels.requested else 0.0
        for slot in encoded.index_map.slots_part4
    }

    kept_tokens = encoded.user_token_index
    position_of = {orig: j for j, orig in enumerate(kept_tokens)}
    n_user = len(kept_tokens)

    user_status: dict[str, np.ndarray] = {}
    carryover: dict[str, np.ndarray] = {}
    categorical: dict[str, dict[str, float]] = {}
    span_start: dict[str, np.ndarray] = {}
    span_end: dict[str, np.ndarray] = {}
    cross: dict[str, dict[int, float]] = {}

    value_keys = list(encoded.index_map.values)
    part5_keys = list(encoded.index_map.slots_part5)

    for slot, lab in labels.slots.items():
        status, carry = lab.user_status, lab.carryover_status
        cat = {v: 0.0 for s, v in value_keys if s == slot}
        starts = np.zeros(n_user, dtype=np.float64)
        ends = np.zeros(n_user, dtype=np.float64)
        entries = {idx: 0.0 for idx in part5_keys}

        if not lab.resolvable:
            status, carry = UserStatus.NONE, CarryoverStatus.NONE
        elif status == UserStatus.ACTIVE and lab.cat_value is not None:
            if lab.cat_value in cat:
                cat[lab.cat_value] = 1.0
            else:
                status = UserStatus.NONE
        elif status == UserStatus.ACTIVE:
            span = lab.span_tokens
            if span is not None and span[0] in position_of and span[1] in position_of:
                starts[position_of[span[0]]] = 1.0
                ends[position_of[span[1]]] = 1.0
            else:  # span truncated away; nothing the heads could point at
                status = UserStatus.NONE
        elif carry == CarryoverStatus.IN_CROSS_SERVICE_HIST:
            if lab.cross_index in entries:
                entries[lab.cross_index] = 1.0
            else:
                carry = CarryoverStatus.NONE

        user_status[slot] = _one_hot(int(status), len(UserStatus))
        carryover[slot] = _one_hot(int(carry), len(CarryoverStatus))
        if cat:
            categorical[slot] = cat
        span_start[slot] = starts
        span_end[slot] = ends
        cross[slot] = entries

    return TurnPredictions(
        service=instance.service,
        utterance=instance.utterance,
        user_offsets=list(encoded.user_offsets),
        intent_status=_one_hot(labels.intent_changed, 2),
        intent_scores=intent_scores,
        requested_scores=requested_scores,
        user_status=user_status,
        carryover=carryover,
        categorical=categorical,
        span_start=span_start,
        span_end=span_end,
        cross=cross,
    )
