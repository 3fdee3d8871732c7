"""Five-part input serialization and the index map feeding the heads.

Layout:

    [CLS] <system actions> [SEP] <user utterance> [SEP]
    <service> <prev intent> [INTENT] i1 [INTENT] i2 ... [SEP]
    [SLOT] s1 <prev value> [VALUE] v11 [VALUE] v12 ... [SLOT] s2 ... [SEP]
    <service'> [SLOT] (system) s' <value> ... [SEP]

Part 1 holds the preceding system turn (as actions, or as raw text under the
"without system actions" ablation), Part 2 the current user utterance, Part 3
the active service and its intents, Part 4 its slots with previous values and
categorical value inventories, Part 5 the cross-service carryover candidates.
Training-time augmentation (synonyms/swaps on schema surface words, element
shuffling, word dropout on the user utterance) happens between assembling the
parts and serializing them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from sgdst.context import ContextSnapshot, PrevSlotEntry, SYSTEM_HISTORY
from sgdst.corpus import NONE_INTENT, Action, Service, informable_slots, normalize_name
from sgdst.tokenization import (
    CLS_TOKEN,
    INTENT_TOKEN,
    SEP_TOKEN,
    SLOT_TOKEN,
    Tokenizer,
    VALUE_TOKEN,
)

ACTION_SEPARATOR = ";"

# part tags on every serialized token
TAG_SPECIAL = 0
TAG_PART1 = 1
TAG_PART2 = 2
TAG_PART3 = 3
TAG_PART4 = 4
TAG_PART5 = 5


class EncodingError(Exception):
    pass


@dataclass
class EncoderOptions:
    max_len: int = 512
    use_system_actions: bool = True
    use_slot_descriptions: bool = False
    include_previous_state: bool = True
    word_dropout_p: float = 0.1
    schema_augment_p: float = 0.1
    shuffle_schema: bool = True
    rng_seed: Optional[int] = None

    def __post_init__(self):
        for name in ("word_dropout_p", "schema_augment_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.max_len < 8:
            raise ValueError("max_len too small for any input layout")


@dataclass
class IndexMap:
    cls: int
    intents: dict[str, int]  # intent name -> [INTENT] position, serialized order
    slots_part4: dict[str, int]  # slot name -> [SLOT] position, serialized order
    values: dict[tuple[str, str], int]  # (slot, value) -> [VALUE] position
    slots_part5: dict[int, int]  # s_prev entry index -> Part-5 [SLOT] position
    user_tokens: tuple[int, int]  # [start, end) positions of Part 2


@dataclass
class EncodedInput:
    tokens: list[str]
    token_ids: np.ndarray
    segment_ids: np.ndarray
    part_tags: np.ndarray
    entry_tags: np.ndarray  # s_prev entry index on Part-5 tokens, else -1
    index_map: IndexMap
    user_offsets: list[tuple[int, int]]  # char offsets per kept user token
    user_token_index: list[int]  # original utterance-token index per kept user token
    overflow: bool = False

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def attention_mask(self) -> np.ndarray:
        return np.ones(len(self.tokens), dtype=np.int64)


# ---------------------------------------------------------------------------
# Parts assembly
# ---------------------------------------------------------------------------

@dataclass
class SlotBlock:
    name: str
    name_words: list[str]
    description_words: list[str]
    prev_value_words: list[str]
    informable: bool
    values: list[tuple[str, list[str]]]  # (raw value, surface words)


@dataclass
class Part5Entry:
    s_prev_index: int
    service_words: list[str]
    system_source: bool
    slot_words: list[str]
    value_words: list[str]


@dataclass
class InputParts:
    part1_words: list[str]
    user_tokens: list[str]
    user_offsets: list[tuple[int, int]]
    service_words: list[str]
    prev_intent_words: list[str]
    intents: list[tuple[str, list[str]]]
    slots: list[SlotBlock]
    part5: list[Part5Entry]


def serialize_system_actions(actions: Sequence[Action]) -> str:
    """Render system actions as plain words: act name, slot name, values,
    actions joined by ';'.  OFFER(restaurant_name, World Gourmet) becomes
    "offer restaurant name World Gourmet"."""
    rendered = []
    for action in actions:
        words = [normalize_name(action.act)] if action.act else []
        if action.slot:
            words.append(normalize_name(action.slot))
        words.extend(action.values)
        rendered.append(" ".join(w for w in words if w))
    return f" {ACTION_SEPARATOR} ".join(rendered)


def build_parts(
    snapshot: ContextSnapshot,
    service: Service,
    utterance: str,
    s_prev: Sequence[PrevSlotEntry],
    options: EncoderOptions,
    tokenizer: Tokenizer,
    system_actions: Sequence[Action] = (),
    system_utterance: str = "",
) -> InputParts:
    if options.use_system_actions:
        part1_text = serialize_system_actions(system_actions)
    else:
        part1_text = system_utterance
    part1_words = tokenizer.word_tokens(part1_text)

    user_tokens, user_offsets = tokenizer.utterance_tokens(utterance)

    def name_words(name: str) -> list[str]:
        return tokenizer.word_tokens(normalize_name(name))

    prev_intent_words: list[str] = []
    if options.include_previous_state:
        if snapshot.prev_intent == NONE_INTENT:
            prev_intent_words = ["none"]
        else:
            prev_intent_words = name_words(snapshot.prev_intent)

    intents = []
    for intent in service.intents:
        words = ["none"] if intent.name == NONE_INTENT else name_words(intent.name)
        intents.append((intent.name, words))

    informable = set(informable_slots(service))
    slots = []
    for slot in service.slots:
        is_inf = slot.name in informable
        prev_value_words: list[str] = []
        if is_inf and options.include_previous_state:
            prev_value = snapshot.prev_user_values.get(slot.name)
            prev_value_words = tokenizer.word_tokens(prev_value) if prev_value else ["none"]
        values: list[tuple[str, list[str]]] = []
        if is_inf and slot.is_categorical:
            values = [(v, tokenizer.word_tokens(v)) for v in slot.possible_values]
        slots.append(
            SlotBlock(
                name=slot.name,
                name_words=name_words(slot.name),
                description_words=(
                    tokenizer.word_tokens(slot.description) if options.use_slot_descriptions else []
                ),
                prev_value_words=prev_value_words,
                informable=is_inf,
                values=values,
            )
        )

    part5 = []
    for idx, entry in enumerate(s_prev):
        part5.append(
            Part5Entry(
                s_prev_index=idx,
                service_words=name_words(entry.service),
                system_source=entry.source == SYSTEM_HISTORY,
                slot_words=name_words(entry.slot),
                value_words=tokenizer.word_tokens(entry.value),
            )
        )

    return InputParts(
        part1_words=part1_words,
        user_tokens=user_tokens,
        user_offsets=user_offsets,
        service_words=name_words(service.name),
        prev_intent_words=prev_intent_words,
        intents=intents,
        slots=slots,
        part5=part5,
    )


# ---------------------------------------------------------------------------
# Training-time augmentation on the assembled parts
# ---------------------------------------------------------------------------

# Small built-in thesaurus covering common schema vocabulary.  Schema
# augmentation falls back to a no-op for words without an entry.
SYNONYMS: dict[str, tuple[str, ...]] = {
    "address": ("location",),
    "allowed": ("permitted",),
    "area": ("region", "district"),
    "book": ("reserve",),
    "check": ("verify",),
    "cheap": ("inexpensive",),
    "city": ("town",),
    "date": ("day",),
    "destination": ("dropoff",),
    "eatery": ("diner", "restaurant"),
    "expensive": ("pricey",),
    "false": ("no",),
    "fare": ("fee",),
    "find": ("search", "locate"),
    "get": ("fetch",),
    "home": ("house",),
    "house": ("home",),
    "moderate": ("medium",),
    "name": ("title",),
    "number": ("count",),
    "party": ("group",),
    "pets": ("animals",),
    "price": ("cost",),
    "property": ("listing",),
    "range": ("bracket",),
    "rent": ("rental",),
    "reserve": ("book",),
    "ride": ("trip",),
    "riders": ("passengers",),
    "schedule": ("arrange",),
    "search": ("find",),
    "seats": ("places",),
    "shared": ("pooled",),
    "size": ("count",),
    "street": ("road",),
    "table": ("booking",),
    "time": ("hour",),
    "true": ("yes",),
    "visit": ("tour", "viewing"),
    "weather": ("forecast",),
}


def _synonym_replacement(words: list[str], rng: np.random.Generator) -> list[str]:
    candidates = [i for i, w in enumerate(words) if w in SYNONYMS]
    if not candidates:
        return list(words)
    i = candidates[int(rng.integers(len(candidates)))]
    synonyms = SYNONYMS[words[i]]
    replacement = synonyms[int(rng.integers(len(synonyms)))]
    out = list(words)
    out[i : i + 1] = replacement.split()
    return out


def _random_swap(words: list[str], rng: np.random.Generator) -> list[str]:
    if len(words) < 2:
        return list(words)
    i, j = rng.choice(len(words), size=2, replace=False)
    out = list(words)
    out[i], out[j] = out[j], out[i]
    return out


def apply_schema_augmentation(
    parts: InputParts, p: float, rng: np.random.Generator
) -> InputParts:
    """With probability p per schema element (intent names, slot names and
    categorical values in Parts 3-4), apply synonym replacement or a random
    word swap to its surface words.  Marker tokens and the raw element keys
    are never touched."""
    if p <= 0:
        return parts

    def maybe(words: list[str]) -> list[str]:
        if words and rng.random() < p:
            if rng.random() < 0.5:
                return _synonym_replacement(words, rng)
            return _random_swap(words, rng)
        return words

    parts.intents = [(name, maybe(words)) for name, words in parts.intents]
    for block in parts.slots:
        block.name_words = maybe(block.name_words)
        block.values = [(value, maybe(words)) for value, words in block.values]
    return parts


def shuffle_schema_elements(parts: InputParts, rng: np.random.Generator) -> InputParts:
    """Independently permute intent order (Part 3), slot order and per-slot
    value order (Part 4) and entry order (Part 5).  Tokens within an element
    keep their order."""
    parts.intents = [parts.intents[i] for i in rng.permutation(len(parts.intents))]
    parts.slots = [parts.slots[i] for i in rng.permutation(len(parts.slots))]
    for block in parts.slots:
        block.values = [block.values[i] for i in rng.permutation(len(block.values))]
    parts.part5 = [parts.part5[i] for i in rng.permutation(len(parts.part5))]
    return parts


# ---------------------------------------------------------------------------
# Serialization to tokens + index map
# ---------------------------------------------------------------------------

def serialize_parts(parts: InputParts, tokenizer: Tokenizer) -> EncodedInput:
    tokens: list[str] = []
    segments: list[int] = []
    tags: list[int] = []
    entries: list[int] = []

    def add(token: str, segment: int, tag: int, entry: int = -1) -> int:
        tokens.append(token)
        segments.append(segment)
        tags.append(tag)
        entries.append(entry)
        return len(tokens) - 1

    cls_pos = add(CLS_TOKEN, 0, TAG_SPECIAL)
    for w in parts.part1_words:
        add(w, 0, TAG_PART1)
    add(SEP_TOKEN, 0, TAG_SPECIAL)

    user_start = len(tokens)
    for w in parts.user_tokens:
        add(w, 0, TAG_PART2)
    user_end = len(tokens)
    add(SEP_TOKEN, 0, TAG_SPECIAL)

    for w in parts.service_words:
        add(w, 1, TAG_PART3)
    for w in parts.prev_intent_words:
        add(w, 1, TAG_PART3)
    intent_positions: dict[str, int] = {}
    for name, words in parts.intents:
        intent_positions[name] = add(INTENT_TOKEN, 1, TAG_PART3)
        for w in words:
            add(w, 1, TAG_PART3)
    add(SEP_TOKEN, 1, TAG_SPECIAL)

    slot_positions: dict[str, int] = {}
    value_positions: dict[tuple[str, str], int] = {}
    for block in parts.slots:
        slot_positions[block.name] = add(SLOT_TOKEN, 1, TAG_PART4)
        for w in block.name_words:
            add(w, 1, TAG_PART4)
        for w in block.description_words:
            add(w, 1, TAG_PART4)
        for w in block.prev_value_words:
            add(w, 1, TAG_PART4)
        for value, words in block.values:
            value_positions[(block.name, value)] = add(VALUE_TOKEN, 1, TAG_PART4)
            for w in words:
                add(w, 1, TAG_PART4)
    add(SEP_TOKEN, 1, TAG_SPECIAL)

    part5_positions: dict[int, int] = {}
    for entry in parts.part5:
        for w in entry.service_words:
            add(w, 1, TAG_PART5, entry.s_prev_index)
        part5_positions[entry.s_prev_index] = add(SLOT_TOKEN, 1, TAG_PART5, entry.s_prev_index)
        if entry.system_source:
            add("system", 1, TAG_PART5, entry.s_prev_index)
        for w in entry.slot_words:
            add(w, 1, TAG_PART5, entry.s_prev_index)
        for w in entry.value_words:
            add(w, 1, TAG_PART5, entry.s_prev_index)
    add(SEP_TOKEN, 1, TAG_SPECIAL)

    return EncodedInput(
        tokens=tokens,
        token_ids=tokenizer.convert(tokens),
        segment_ids=np.array(segments, dtype=np.int64),
        part_tags=np.array(tags, dtype=np.int64),
        entry_tags=np.array(entries, dtype=np.int64),
        index_map=IndexMap(
            cls=cls_pos,
            intents=intent_positions,
            slots_part4=slot_positions,
            values=value_positions,
            slots_part5=part5_positions,
            user_tokens=(user_start, user_end),
        ),
        user_offsets=list(parts.user_offsets),
        user_token_index=list(range(len(parts.user_tokens))),
    )


def apply_word_dropout(
    encoded: EncodedInput, p: float, rng: np.random.Generator, unk_id: int
) -> EncodedInput:
    """Independently replace each user-utterance token id with [UNK] with
    probability p.  Positions, offsets and the index map are untouched."""
    if p <= 0:
        return encoded
    ids = encoded.token_ids.copy()
    user_mask = encoded.part_tags == TAG_PART2
    drop = user_mask & (rng.random(len(ids)) < p)
    ids[drop] = unk_id
    return replace(encoded, token_ids=ids)


def truncate(encoded: EncodedInput, max_len: int) -> EncodedInput:
    """Trim to max_len tokens: Part-5 entries tail-first, then Part-1 tail
    tokens, then Part-2 head tokens.  Parts 3-4 are never trimmed; if they
    alone exceed max_len the input is returned unchanged with the overflow
    flag set."""
    n = len(encoded)
    if n <= max_len:
        return encoded

    tags = encoded.part_tags
    mandatory = int(np.sum((tags == TAG_SPECIAL) | (tags == TAG_PART3) | (tags == TAG_PART4)))
    if mandatory > max_len:
        return replace(encoded, overflow=True)

    keep = np.ones(n, dtype=bool)
    excess = n - max_len

    if excess > 0:
        entry_ids = [
            idx for idx in dict.fromkeys(encoded.entry_tags[encoded.entry_tags >= 0].tolist())
        ]
        for entry_idx in reversed(entry_ids):
            if excess <= 0:
                break
            entry_mask = encoded.entry_tags == entry_idx
            keep[entry_mask] = False
            excess -= int(entry_mask.sum())

    if excess > 0:
        part1_positions = np.nonzero(tags == TAG_PART1)[0]
        drop = part1_positions[len(part1_positions) - min(excess, len(part1_positions)):]
        keep[drop] = False
        excess -= len(drop)

    if excess > 0:
        part2_positions = np.nonzero(tags == TAG_PART2)[0]
        drop = part2_positions[: min(excess, len(part2_positions))]
        keep[drop] = False
        excess -= len(drop)

    new_pos = np.cumsum(keep) - 1  # old position -> new position (where kept)
    old_user_start, old_user_end = encoded.index_map.user_tokens
    kept_user = [
        i for i, pos in enumerate(range(old_user_start, old_user_end)) if keep[pos]
    ]

    kept_user_positions = np.nonzero(keep & (tags == TAG_PART2))[0]
    if len(kept_user_positions):
        user_range = (
            int(new_pos[kept_user_positions[0]]),
            int(new_pos[kept_user_positions[-1]]) + 1,
        )
    else:
        sep_after_part1 = int(new_pos[np.nonzero(tags == TAG_SPECIAL)[0][1]])
        user_range = (sep_after_part1 + 1, sep_after_part1 + 1)

    def remap(positions: dict) -> dict:
        return {k: int(new_pos[v]) for k, v in positions.items() if keep[v]}

    index_map = IndexMap(
        cls=int(new_pos[encoded.index_map.cls]),
        intents=remap(encoded.index_map.intents),
        slots_part4=remap(encoded.index_map.slots_part4),
        values=remap(encoded.index_map.values),
        slots_part5=remap(encoded.index_map.slots_part5),
        user_tokens=user_range,
    )

    return EncodedInput(
        tokens=[t for t, k in zip(encoded.tokens, keep) if k],
        token_ids=encoded.token_ids[keep],
        segment_ids=encoded.segment_ids[keep],
        part_tags=encoded.part_tags[keep],
        entry_tags=encoded.entry_tags[keep],
        index_map=index_map,
        user_offsets=[encoded.user_offsets[i] for i in kept_user],
        user_token_index=[encoded.user_token_index[i] for i in kept_user],
        overflow=False,
    )


def build_input(
    snapshot: ContextSnapshot,
    service: Service,
    utterance: str,
    s_prev: Sequence[PrevSlotEntry],
    options: EncoderOptions,
    tokenizer: Tokenizer,
    system_actions: Sequence[Action] = (),
    system_utterance: str = "",
    rng: Optional[np.random.Generator] = None,
    train: bool = False,
) -> EncodedInput:
    """Assemble, optionally augment, serialize and truncate one model input.

    Augmentation order: schema augmentation, then element shuffling, then
    word dropout; all three require train=True and an explicit rng.
    """
    parts = build_parts(
        snapshot, service, utterance, s_prev, options, tokenizer, system_actions, system_utterance
    )
    if train:
        augmenting = (
            options.schema_augment_p > 0 or options.shuffle_schema or options.word_dropout_p > 0
        )
        if augmenting and rng is None:
            raise EncodingError("training-time augmentation needs an explicit rng")
        if options.schema_augment_p > 0:
            parts = apply_schema_augmentation(parts, options.schema_augment_p, rng)
        if options.shuffle_schema:
            parts = shuffle_schema_elements(parts, rng)
    encoded = serialize_parts(parts, tokenizer)
    if train and options.word_dropout_p > 0:
        encoded = apply_word_dropout(encoded, options.word_dropout_p, rng, tokenizer.unk_id)
    return truncate(encoded, options.max_len)


def render_parts(encoded: EncodedInput) -> str:
    """Human-readable rendering of the five parts, for debug dumps."""
    lines = []
    for tag, label in [
        (TAG_PART1, "part1 system"),
        (TAG_PART2, "part2 user"),
        (TAG_PART3, "part3 intents"),
        (TAG_PART4, "part4 slots"),
        (TAG_PART5, "part5 history"),
    ]:
        words = [t for t, g in zip(encoded.tokens, encoded.part_tags) if g == tag]
        lines.append(f"{label}: {' '.join(words)}")
    if encoded.overflow:
        lines.append("overflow: true")
    return "\n".join(lines)
