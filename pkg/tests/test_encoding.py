"""Five-part input serialization: structure, index maps, augmentation and
truncation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgdst.corpus import Action
from sgdst.encoding import (
    TAG_PART1,
    TAG_PART2,
    TAG_PART3,
    TAG_PART4,
    TAG_PART5,
    TAG_SPECIAL,
    EncoderOptions,
    EncodingError,
    apply_word_dropout,
    build_input,
    serialize_system_actions,
    truncate,
)


def _encode(instance, schema, tokenizer, options, train=False, rng=None):
    service = schema.service(instance.service)
    return build_input(
        instance.snapshot,
        service,
        instance.utterance,
        instance.s_prev,
        options,
        tokenizer,
        system_actions=instance.system_actions,
        system_utterance=instance.system_utterance,
        train=train,
        rng=rng,
    )


@pytest.fixture(scope="module")
def rich_instance(train_instances):
    """An instance with a non-empty previous-service list, so every part is
    populated."""
    return next(i for i in train_instances if i.s_prev)


def test_system_action_rendering():
    actions = [
        Action("OFFER", "eatery_name", ("Luigi Place",)),
        Action("REQUEST", "time", ()),
        Action("INFORM_COUNT", "count", ("3",)),
    ]
    text = serialize_system_actions(actions)
    assert text == "offer eatery name Luigi Place ; request time ; inform count count 3"


def test_overall_structure(rich_instance, train_schema, tokenizer, eval_options):
    enc = _encode(rich_instance, train_schema, tokenizer, eval_options)
    assert enc.tokens[0] == "[CLS]"
    assert enc.index_map.cls == 0
    assert enc.tokens.count("[SEP]") == 5
    assert enc.tokens[-1] == "[SEP]"
    # utterance parts in segment 0, schema and history parts in segment 1
    for tag, segment in [
        (TAG_PART1, 0), (TAG_PART2, 0), (TAG_PART3, 1), (TAG_PART4, 1), (TAG_PART5, 1),
    ]:
        mask = enc.part_tags == tag
        assert mask.any()
        assert set(enc.segment_ids[mask].tolist()) == {segment}
    # parts appear in order 1..5
    order = [t for t in enc.part_tags.tolist() if t != TAG_SPECIAL]
    assert order == sorted(order)


def test_index_map_points_at_marker_tokens(rich_instance, train_schema, tokenizer, eval_options):
    enc = _encode(rich_instance, train_schema, tokenizer, eval_options)
    im = enc.index_map
    for pos in im.intents.values():
        assert enc.tokens[pos] == "[INTENT]"
    for pos in im.slots_part4.values():
        assert enc.tokens[pos] == "[SLOT]"
    for pos in im.values.values():
        assert enc.tokens[pos] == "[VALUE]"
    for pos in im.slots_part5.values():
        assert enc.tokens[pos] == "[SLOT]"
    service = train_schema.service(rich_instance.service)
    assert set(im.intents) == {i.name for i in service.intents}
    assert set(im.slots_part4) == {s.name for s in service.slots}


def test_user_tokens_match_utterance(rich_instance, train_schema, tokenizer, eval_options):
    enc = _encode(rich_instance, train_schema, tokenizer, eval_options)
    start, end = enc.index_map.user_tokens
    expected_tokens, expected_offsets = tokenizer.utterance_tokens(rich_instance.utterance)
    assert enc.tokens[start:end] == expected_tokens
    assert list(enc.user_offsets) == expected_offsets
    assert list(enc.user_token_index) == list(range(len(expected_tokens)))
    for (s, e), token in zip(enc.user_offsets, enc.tokens[start:end]):
        assert rich_instance.utterance[s:e].lower() == token


def test_previous_state_toggle(rich_instance, train_schema, tokenizer):
    with_prev = EncoderOptions(
        word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False,
        include_previous_state=True,
    )
    without = EncoderOptions(
        word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False,
        include_previous_state=False,
    )
    a = _encode(rich_instance, train_schema, tokenizer, with_prev)
    b = _encode(rich_instance, train_schema, tokenizer, without)
    assert len(b) < len(a)
    # "none" placeholders for intent and untouched slots disappear
    p3_a = [t for t, tag in zip(a.tokens, a.part_tags) if tag == TAG_PART3]
    p3_b = [t for t, tag in zip(b.tokens, b.part_tags) if tag == TAG_PART3]
    assert "none" in p3_a[: p3_a.index("[INTENT]")]
    assert "none" not in p3_b[: p3_b.index("[INTENT]")]


def test_slot_description_toggle(train_instances, train_schema, tokenizer):
    instance = train_instances[0]
    base = EncoderOptions(word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False)
    described = EncoderOptions(
        word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False,
        use_slot_descriptions=True,
    )
    a = _encode(instance, train_schema, tokenizer, base)
    b = _encode(instance, train_schema, tokenizer, described)
    assert len(b) > len(a)


def test_system_actions_toggle(rich_instance, train_schema, tokenizer):
    raw = EncoderOptions(
        word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False,
        use_system_actions=False,
    )
    enc = _encode(rich_instance, train_schema, tokenizer, raw)
    p1 = [t for t, tag in zip(enc.tokens, enc.part_tags) if tag == TAG_PART1]
    expected = tokenizer.word_tokens(rich_instance.system_utterance)
    assert p1 == expected


def test_word_dropout_touches_only_user_token_ids(
    rich_instance, train_schema, tokenizer, eval_options
):
    enc = _encode(rich_instance, train_schema, tokenizer, eval_options)
    rng = np.random.default_rng(0)
    dropped = apply_word_dropout(enc, 1.0, rng, tokenizer.unk_id)
    user = dropped.part_tags == TAG_PART2
    assert (dropped.token_ids[user] == tokenizer.unk_id).all()
    assert (dropped.token_ids[~user] == enc.token_ids[~user]).all()
    # surface tokens and offsets are preserved for span extraction
    assert dropped.tokens == enc.tokens
    assert list(dropped.user_offsets) == list(enc.user_offsets)

    untouched = apply_word_dropout(enc, 0.0, np.random.default_rng(0), tokenizer.unk_id)
    assert (untouched.token_ids == enc.token_ids).all()


def test_train_mode_requires_rng(rich_instance, train_schema, tokenizer):
    options = EncoderOptions()
    with pytest.raises(EncodingError):
        _encode(rich_instance, train_schema, tokenizer, options, train=True, rng=None)


def test_augmented_encoding_is_deterministic_per_seed(
    rich_instance, train_schema, tokenizer
):
    options = EncoderOptions()  # defaults: dropout 0.1, augment 0.1, shuffle on
    a = _encode(rich_instance, train_schema, tokenizer, options, train=True,
                rng=np.random.default_rng(7))
    b = _encode(rich_instance, train_schema, tokenizer, options, train=True,
                rng=np.random.default_rng(7))
    c = _encode(rich_instance, train_schema, tokenizer, options, train=True,
                rng=np.random.default_rng(8))
    assert (a.token_ids == b.token_ids).all()
    assert a.tokens == b.tokens
    assert len(a) != len(c) or (a.token_ids != c.token_ids).any()


def test_shuffle_preserves_index_map_alignment(rich_instance, train_schema, tokenizer):
    options = EncoderOptions(word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=True)
    enc = _encode(rich_instance, train_schema, tokenizer, options, train=True,
                  rng=np.random.default_rng(3))
    service = train_schema.service(rich_instance.service)
    assert set(enc.index_map.intents) == {i.name for i in service.intents}
    assert set(enc.index_map.slots_part4) == {s.name for s in service.slots}
    assert set(enc.index_map.slots_part5) == set(range(len(rich_instance.s_prev)))
    for pos in enc.index_map.intents.values():
        assert enc.tokens[pos] == "[INTENT]"


def test_truncation_drops_p5_then_p1_then_p2(rich_instance, train_schema, tokenizer, eval_options):
    full = _encode(rich_instance, train_schema, tokenizer, eval_options)
    n_mandatory = int(
        ((full.part_tags == TAG_SPECIAL)
         | (full.part_tags == TAG_PART3)
         | (full.part_tags == TAG_PART4)).sum()
    )

    # room for everything mandatory plus a little: P5 goes first
    cut = truncate(full, n_mandatory + 4)
    assert len(cut) <= n_mandatory + 4
    assert not cut.overflow
    assert (cut.part_tags == TAG_PART3).sum() == (full.part_tags == TAG_PART3).sum()
    assert (cut.part_tags == TAG_PART4).sum() == (full.part_tags == TAG_PART4).sum()
    assert (cut.part_tags == TAG_PART5).sum() < (full.part_tags == TAG_PART5).sum()

    # P5 entries are dropped from the tail of the list
    kept_entries = sorted(cut.index_map.slots_part5)
    assert kept_entries == list(range(len(kept_entries)))

    # index map still points at the right markers after remapping
    for pos in cut.index_map.slots_part4.values():
        assert cut.tokens[pos] == "[SLOT]"
    for pos in cut.index_map.intents.values():
        assert cut.tokens[pos] == "[INTENT]"

    # impossibly small budget: mandatory content alone exceeds it
    tiny = truncate(full, n_mandatory - 1)
    assert tiny.overflow


def test_truncation_drops_user_head_last(rich_instance, train_schema, tokenizer, eval_options):
    full = _encode(rich_instance, train_schema, tokenizer, eval_options)
    mandatory = (
        (full.part_tags == TAG_SPECIAL)
        | (full.part_tags == TAG_PART3)
        | (full.part_tags == TAG_PART4)
    ).sum()
    budget = int(mandatory) + 2  # P5 and P1 fully gone, user utterance clipped
    cut = truncate(full, budget)
    assert (cut.part_tags == TAG_PART5).sum() == 0
    assert (cut.part_tags == TAG_PART1).sum() == 0
    kept_user = (cut.part_tags == TAG_PART2).sum()
    assert 0 < kept_user <= 2
    # the kept user tokens are the TAIL of the utterance
    full_user_tokens = [t for t, tag in zip(full.tokens, full.part_tags) if tag == TAG_PART2]
    cut_user_tokens = [t for t, tag in zip(cut.tokens, cut.part_tags) if tag == TAG_PART2]
    assert cut_user_tokens == full_user_tokens[-kept_user:]
    # user_token_index records the surviving original positions
    assert list(cut.user_token_index) == list(
        range(len(full_user_tokens) - kept_user, len(full_user_tokens))
    )


@settings(max_examples=40, deadline=None)
@given(budget=st.integers(min_value=8, max_value=200), index=st.integers(min_value=0, max_value=76))
def test_truncation_invariants_hold_for_any_budget(
    budget, index, train_instances, train_schema, tokenizer, eval_options
):
    instance = train_instances[index % len(train_instances)]
    full = _encode(instance, train_schema, tokenizer, eval_options)
    cut = truncate(full, budget)
    if not cut.overflow:
        assert len(cut) <= budget
    assert len(cut.token_ids) == len(cut.tokens) == len(cut.segment_ids) == len(cut.part_tags)
    im = cut.index_map
    positions = (
        [im.cls]
        + list(im.intents.values())
        + list(im.slots_part4.values())
        + list(im.values.values())
        + list(im.slots_part5.values())
    )
    assert all(0 <= p < len(cut) for p in positions)
    start, end = im.user_tokens
    assert 0 <= start <= end <= len(cut)
    assert end - start == len(cut.user_token_index) == len(cut.user_offsets)


def test_max_len_is_enforced_end_to_end(train_instances, train_schema, tokenizer):
    options = EncoderOptions(
        max_len=64, word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False
    )
    for instance in train_instances:
        enc = _encode(instance, train_schema, tokenizer, options)
        if not enc.overflow:
            assert len(enc) <= 64
