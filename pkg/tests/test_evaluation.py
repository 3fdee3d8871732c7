"""Metrics: fuzzy value matching, frame scoring, alignment and report
structure, plus the JGA <= Avg GA ordering property."""

import difflib
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from sgdst.corpus import DONTCARE, DialogueState, Schema, Service, Slot, Intent, NONE_INTENT
from sgdst.evaluation import (
    AlignmentError,
    FrameRef,
    GoldFrame,
    PredFrame,
    align_frames,
    average_goal_accuracy,
    evaluate_frames,
    fuzzy_match,
    gold_frames_from_dialogues,
    intent_accuracy,
    joint_goal_accuracy,
    load_prediction_dump,
    requested_slot_f1,
    score_frame,
    value_match,
    write_prediction_dump,
)


def test_fuzzy_match_is_token_sorted_and_casefolded():
    assert fuzzy_match("San Jose", "san jose") == 1.0
    assert fuzzy_match("Jose San", "San Jose") == 1.0  # word order ignored
    assert fuzzy_match("San Jose!", "san jose") == 1.0  # punctuation dropped
    # frozen reference values computed with difflib on the sorted token strings
    assert fuzzy_match("6 pm", "6pm") == pytest.approx(
        difflib.SequenceMatcher(None, "6 pm", "6pm").ratio()
    )
    assert fuzzy_match("the Ivy", "Ivy") == pytest.approx(
        difflib.SequenceMatcher(None, "ivy the", "ivy").ratio()
    )
    assert fuzzy_match("cheap", "expensive") < 0.5


def test_value_match_rules():
    # dontcare only matches dontcare, regardless of fuzziness
    assert value_match(DONTCARE, DONTCARE, (), False)
    assert not value_match(DONTCARE, "6 pm", ("6 pm",), False)
    assert not value_match("6 pm", DONTCARE, (DONTCARE,), False)
    # categorical needs an exact (casefolded) variant hit
    assert value_match("Italian", "italian", ("italian",), True)
    assert not value_match("italia", "italian", ("italian",), True)
    # non-categorical accepts near-identical strings and any variant
    assert value_match(
        "intercontinental san francisco hotel",
        "intercontinental san francisco hotels",
        (),
        False,
    )
    assert value_match("noon", "12 pm", ("12 pm", "noon"), False)
    assert not value_match("oakland", "san jose", ("san jose",), False)
    assert not value_match(None, "x", ("x",), False)


def _mini_service():
    return Service(
        name="S_1",
        intents=(
            Intent(NONE_INTENT, frozenset(), frozenset()),
            Intent("Find", frozenset({"a"}), frozenset({"b"})),
        ),
        slots=(
            Slot("a", "", False, ()),
            Slot("b", "", True, ("x", "y")),
            Slot("c", "", False, ()),
        ),
    )


def _ref(i):
    return FrameRef("d1", 2 * i, "S_1")


def _gold(i, state, variants=None):
    return GoldFrame(ref=_ref(i), state=state, variants=variants or {})


def _pred(i, state):
    return PredFrame(ref=_ref(i), state=state)


def test_score_frame_joint_needs_exact_slot_set():
    service = _mini_service()
    gold = _gold(0, DialogueState("Find", frozenset(), {"a": "foo"}))

    hit = score_frame(DialogueState("Find", frozenset(), {"a": "foo"}), gold, service)
    assert hit.joint_correct and hit.avg_goal_accuracy == 1.0

    # all gold slots right but one extra predicted slot: joint fails,
    # per-slot accuracy still counts the gold slot as correct
    extra = score_frame(
        DialogueState("Find", frozenset(), {"a": "foo", "b": "x"}), gold, service
    )
    assert not extra.joint_correct
    assert extra.slot_correct == {"a": True}
    assert extra.avg_goal_accuracy == 1.0


def test_requested_f1_and_empty_convention():
    service = _mini_service()
    gold = _gold(0, DialogueState("Find", frozenset({"a", "b"}), {"a": "v"}))
    score = score_frame(DialogueState("Find", frozenset({"a", "c"}), {"a": "v"}), gold, service)
    assert score.requested_tp == 1 and score.requested_fp == 1 and score.requested_fn == 1
    assert score.requested_f1 == pytest.approx(0.5)

    empty_gold = _gold(1, DialogueState("Find", frozenset(), {"a": "v"}))
    empty = score_frame(DialogueState("Find", frozenset(), {"a": "v"}), empty_gold, service)
    assert empty.requested_f1 == 1.0


def test_avg_goal_accuracy_is_nan_without_gold_slots():
    service = _mini_service()
    gold = _gold(0, DialogueState("Find", frozenset(), {}))
    score = score_frame(DialogueState("Find", frozenset(), {}), gold, service)
    assert math.isnan(score.avg_goal_accuracy)
    assert score.joint_correct  # empty matches empty


def test_alignment_errors_name_the_frames():
    golds = [_gold(0, DialogueState()), _gold(1, DialogueState())]
    with pytest.raises(AlignmentError, match="duplicate"):
        align_frames([_pred(0, DialogueState()), _pred(0, DialogueState())], golds)
    with pytest.raises(AlignmentError, match="without predictions"):
        align_frames([_pred(0, DialogueState())], golds)
    with pytest.raises(AlignmentError, match="without gold"):
        align_frames([_pred(0, DialogueState()), _pred(5, DialogueState())], [golds[0]])


def test_hand_computed_fixture_metrics_exactly():
    """Three frames scored by hand; the frozen values double as the metric
    fixture for the acceptance gate."""
    service = _mini_service()
    schema = Schema(services={"S_1": service})
    golds = [
        _gold(0, DialogueState("Find", frozenset({"a"}), {"a": "san jose", "b": "x"})),
        _gold(1, DialogueState("Find", frozenset(), {"a": "noon"}),
              variants={"a": ("noon", "12 pm")}),
        _gold(2, DialogueState(NONE_INTENT, frozenset({"a", "b"}), {"c": "peanut"})),
    ]
    preds = [
        # frame 0: a fuzzy-matches, b wrong -> joint 0, per-frame GA 1/2,
        # requested {a} vs {a} -> F1 1, intent right
        _pred(0, DialogueState("Find", frozenset({"a"}), {"a": "San Jose", "b": "y"})),
        # frame 1: variant hit -> joint 1, GA 1, F1 1 (both empty), intent right
        _pred(1, DialogueState("Find", frozenset(), {"a": "12 pm"})),
        # frame 2: missing slot c, requested {a} vs {a,b} -> F1 2/3, intent wrong
        _pred(2, DialogueState("Find", frozenset({"a"}), {})),
    ]
    assert joint_goal_accuracy(preds, golds, schema) == pytest.approx(1 / 3)
    assert average_goal_accuracy(preds, golds, schema) == pytest.approx((0.5 + 1.0 + 0.0) / 3)
    assert intent_accuracy(preds, golds, schema) == pytest.approx(2 / 3)
    assert requested_slot_f1(preds, golds, schema) == pytest.approx((1.0 + 1.0 + 2 / 3) / 3)


def test_self_comparison_scores_one(test_dialogues, test_schema):
    golds = gold_frames_from_dialogues(test_dialogues)
    preds = [PredFrame(ref=g.ref, state=g.state) for g in golds]
    report = evaluate_frames(preds, golds, test_schema)
    overall = report["overall"]
    assert overall["joint_goal_accuracy"] == 1.0
    assert overall["average_goal_accuracy"] == 1.0
    assert overall["intent_accuracy"] == 1.0
    assert overall["requested_slot_f1"] == 1.0


def test_report_has_per_service_and_seen_unseen_split(test_dialogues, test_schema):
    golds = gold_frames_from_dialogues(test_dialogues)
    preds = [PredFrame(ref=g.ref, state=g.state) for g in golds]
    report = evaluate_frames(
        preds, golds, test_schema, seen_services=["Eatery_1", "Homes_7", "RideShare_2"]
    )
    assert set(report["per_service"]) == {s.name for s in test_schema if any(
        g.ref.service == s.name for g in golds
    )}
    assert "Weather_5" not in {"Eatery_1", "Homes_7", "RideShare_2"}
    assert report["unseen_services"]["frames"] > 0
    assert report["seen_services"]["frames"] + report["unseen_services"]["frames"] == len(golds)


def test_gold_frames_cover_every_user_frame(test_dialogues):
    golds = gold_frames_from_dialogues(test_dialogues)
    expected = sum(
        len(turn.frames)
        for dialogue in test_dialogues
        for turn in dialogue.turns
        if turn.speaker == "USER"
    )
    assert len(golds) == expected
    assert len({g.ref for g in golds}) == len(golds)


def test_prediction_dump_roundtrip(tmp_path):
    frames = [
        _pred(0, DialogueState("Find", frozenset({"b", "a"}), {"a": "v1", "c": "v2"})),
        _pred(1, DialogueState()),
    ]
    path = tmp_path / "dump.jsonl"
    count = write_prediction_dump(frames, path)
    assert count == 2
    loaded = load_prediction_dump(path)
    assert [f.ref for f in loaded] == [f.ref for f in frames]
    assert [f.state for f in loaded] == [f.state for f in frames]


def test_prediction_dump_errors_cite_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"dialogue_id": "d"}\nnot json\n', encoding="utf-8")
    with pytest.raises(Exception) as err:
        load_prediction_dump(path)
    assert "bad.jsonl" in str(err.value)


# --- JGA <= Avg GA ordering -------------------------------------------------

_value = st.sampled_from(["a", "b", "c", "d"])
_slots = st.dictionaries(st.sampled_from(["a", "b", "c"]), _value, min_size=1, max_size=3)


@st.composite
def _fixture(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    golds, preds = [], []
    for i in range(n):
        gold_values = draw(_slots)  # at least one gold-assigned slot per frame
        pred_values = draw(st.dictionaries(st.sampled_from(["a", "b", "c"]), _value, max_size=3))
        golds.append(_gold(i, DialogueState("Find", frozenset(), gold_values)))
        preds.append(_pred(i, DialogueState("Find", frozenset(), pred_values)))
    return preds, golds


@settings(max_examples=300, deadline=None)
@given(_fixture())
def test_jga_never_exceeds_avg_ga(fixture):
    preds, golds = fixture
    service = Service(
        name="S_1",
        intents=(Intent(NONE_INTENT, frozenset(), frozenset()),
                 Intent("Find", frozenset({"a"}), frozenset())),
        slots=(Slot("a", "", False, ()), Slot("b", "", False, ()), Slot("c", "", False, ())),
    )
    schema = Schema(services={"S_1": service})
    jga = joint_goal_accuracy(preds, golds, schema)
    avg = average_goal_accuracy(preds, golds, schema)
    assert jga <= avg + 1e-12
