"""The four SGD metrics over aligned (prediction, gold) frame pairs.

Conventions follow the official SGD evaluator: non-categorical values are
compared by token-sort similarity with a 0.95 threshold against any gold
variant, categorical and dontcare values exactly (case-insensitive), and
Avg GA / Intent Acc / Req F1 are per-frame scores macro-averaged over frames
(frames without gold-assigned slots contribute nothing to Avg GA).  A micro
variant of Avg GA over (frame, slot) pairs is reported alongside.
"""

from __future__ import annotations

import csv
import difflib
import json
import math
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from sgdst.corpus import (
    DONTCARE,
    USER,
    Dialogue,
    DialogueState,
    Schema,
    Service,
)

FUZZY_THRESHOLD = 0.95

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class FrameRef:
    dialogue_id: str
    turn_index: int
    service: str


@dataclass(frozen=True)
class GoldFrame:
    ref: FrameRef
    state: DialogueState
    # Acceptable surface variants per slot; the canonical value is included.
    variants: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class PredFrame:
    ref: FrameRef
    state: DialogueState


class AlignmentError(Exception):
    pass


def _token_sort(text: str) -> str:
    return " ".join(sorted(_TOKEN_RE.findall(text.casefold())))


def fuzzy_match(predicted: str, gold: str) -> float:
    """Similarity of the two strings after lowercasing, dropping punctuation
    and sorting tokens; 1.0 means identical bags of words."""
    a, b = _token_sort(predicted), _token_sort(gold)
    if a == b:
        return 1.0
    return difflib.SequenceMatcher(None, a, b).ratio()


def value_match(
    predicted: Optional[str], gold: str, variants: Sequence[str], is_categorical: bool
) -> bool:
    if predicted is None:
        return False
    pred = predicted.strip().casefold()
    golds = list(variants) if variants else [gold]
    if gold == DONTCARE or pred == DONTCARE:
        return pred == DONTCARE and gold == DONTCARE
    if is_categorical:
        return any(pred == g.strip().casefold() for g in golds)
    return any(fuzzy_match(predicted, g) >= FUZZY_THRESHOLD for g in golds)


@dataclass
class TurnScore:
    ref: FrameRef
    joint_correct: bool
    slot_correct: dict[str, bool]  # gold-assigned slots only
    intent_correct: bool
    requested_tp: int
    requested_fp: int
    requested_fn: int

    @property
    def requested_f1(self) -> float:
        if self.requested_tp + self.requested_fp + self.requested_fn == 0:
            return 1.0  # both sets empty
        denom = 2 * self.requested_tp + self.requested_fp + self.requested_fn
        return 2 * self.requested_tp / denom if denom else 0.0

    @property
    def avg_goal_accuracy(self) -> float:
        """Per-frame slot accuracy; NaN when the gold state assigns nothing."""
        if not self.slot_correct:
            return math.nan
        return sum(self.slot_correct.values()) / len(self.slot_correct)


def score_frame(pred: DialogueState, gold: GoldFrame, service: Service) -> TurnScore:
    slot_correct = {}
    for slot_name, gold_value in gold.state.slot_values.items():
        slot = service.slot(slot_name)
        slot_correct[slot_name] = value_match(
            pred.slot_values.get(slot_name),
            gold_value,
            gold.variants.get(slot_name, (gold_value,)),
            slot.is_categorical,
        )
    joint = all(slot_correct.values()) and set(pred.slot_values) == set(
        gold.state.slot_values
    )
    tp = len(pred.requested_slots & gold.state.requested_slots)
    return TurnScore(
        ref=gold.ref,
        joint_correct=joint,
        slot_correct=slot_correct,
        intent_correct=pred.active_intent == gold.state.active_intent,
        requested_tp=tp,
        requested_fp=len(pred.requested_slots) - tp,
        requested_fn=len(gold.state.requested_slots) - tp,
    )


def align_frames(
    pred_frames: Iterable[PredFrame], gold_frames: Iterable[GoldFrame]
) -> list[tuple[PredFrame, GoldFrame]]:
    """Pair predictions with gold by (dialogue, turn, service); any missing,
    duplicate or unmatched frame is an error."""
    by_ref: dict[FrameRef, PredFrame] = {}
    for frame in pred_frames:
        if frame.ref in by_ref:
            raise AlignmentError(f"duplicate prediction for {frame.ref}")
        by_ref[frame.ref] = frame

    pairs = []
    missing = []
    for gold in gold_frames:
        pred = by_ref.pop(gold.ref, None)
        if pred is None:
            missing.append(gold.ref)
        else:
            pairs.append((pred, gold))
    problems = []
    if missing:
        problems.append(f"{len(missing)} gold frames without predictions, e.g. {missing[:3]}")
    if by_ref:
        extras = list(by_ref)[:3]
        problems.append(f"{len(by_ref)} predictions without gold frames, e.g. {extras}")
    if problems:
        raise AlignmentError("; ".join(problems))
    return pairs


def score_all(
    pred_frames: Iterable[PredFrame], gold_frames: Iterable[GoldFrame], schema: Schema
) -> list[TurnScore]:
    return [
        score_frame(pred.state, gold, schema.service(gold.ref.service))
        for pred, gold in align_frames(pred_frames, gold_frames)
    ]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else math.nan


def _metrics_from_scores(scores: Sequence[TurnScore]) -> dict[str, float]:
    slot_totals = [s for score in scores for s in score.slot_correct.values()]
    frame_avgs = [a for a in (s.avg_goal_accuracy for s in scores) if not math.isnan(a)]
    if scores and not slot_totals:
        warnings.warn("no gold-assigned slots in any frame; Avg GA is undefined (NaN)")
    return {
        "joint_goal_accuracy": _mean([float(s.joint_correct) for s in scores]),
        "average_goal_accuracy": _mean(frame_avgs),
        "average_goal_accuracy_micro": _mean([float(v) for v in slot_totals]),
        "intent_accuracy": _mean([float(s.intent_correct) for s in scores]),
        "requested_slot_f1": _mean([s.requested_f1 for s in scores]),
        "frames": len(scores),
    }


def joint_goal_accuracy(pred_frames, gold_frames, schema: Schema) -> float:
    scores = score_all(pred_frames, gold_frames, schema)
    return _mean([float(s.joint_correct) for s in scores])


def average_goal_accuracy(pred_frames, gold_frames, schema: Schema) -> float:
    scores = score_all(pred_frames, gold_frames, schema)
    return _metrics_from_scores(scores)["average_goal_accuracy"]


def intent_accuracy(pred_frames, gold_frames, schema: Schema) -> float:
    scores = score_all(pred_frames, gold_frames, schema)
    return _mean([float(s.intent_correct) for s in scores])


def requested_slot_f1(pred_frames, gold_frames, schema: Schema) -> float:
    scores = score_all(pred_frames, gold_frames, schema)
    return _mean([s.requested_f1 for s in scores])


def evaluate_frames(
    pred_frames: Iterable[PredFrame],
    gold_frames: Iterable[GoldFrame],
    schema: Schema,
    seen_services: Optional[Iterable[str]] = None,
) -> dict:
    """Full metrics report: overall, per service, and (when the training-time
    service inventory is given) seen/unseen service splits."""
    gold_frames = list(gold_frames)
    scores = score_all(pred_frames, gold_frames, schema)

    report = {"overall": _metrics_from_scores(scores)}

    by_service: dict[str, list[TurnScore]] = defaultdict(list)
    for score in scores:
        by_service[score.ref.service].append(score)
    report["per_service"] = {
        service: _metrics_from_scores(group) for service, group in sorted(by_service.items())
    }

    if seen_services is not None:
        seen = set(seen_services)
        seen_scores = [s for s in scores if s.ref.service in seen]
        unseen_scores = [s for s in scores if s.ref.service not in seen]
        report["seen_services"] = _metrics_from_scores(seen_scores)
        report["unseen_services"] = _metrics_from_scores(unseen_scores)
    return report


# ---------------------------------------------------------------------------
# Frame extraction and dump I/O
# ---------------------------------------------------------------------------

def gold_frames_from_dialogues(dialogues: Sequence[Dialogue]) -> list[GoldFrame]:
    """One gold frame per (user turn, service frame with a state): every
    user-turn frame is evaluated, involved or not."""
    frames = []
    for dialogue in dialogues:
        for turn_index, turn in enumerate(dialogue.turns):
            if turn.speaker != USER:
                continue
            for frame in turn.frames:
                if frame.state is None:
                    continue
                frames.append(
                    GoldFrame(
                        ref=FrameRef(dialogue.dialogue_id, turn_index, frame.service),
                        state=frame.state,
                        variants=dict(frame.value_variants),
                    )
                )
    return frames


def pred_frame_to_json(frame: PredFrame) -> dict:
    return {
        "dialogue_id": frame.ref.dialogue_id,
        "turn_index": frame.ref.turn_index,
        "service": frame.ref.service,
        "state": {
            "active_intent": frame.state.active_intent,
            "requested_slots": sorted(frame.state.requested_slots),
            "slot_values": dict(frame.state.slot_values),
        },
    }


def pred_frame_from_json(record: Mapping) -> PredFrame:
    state = record["state"]
    return PredFrame(
        ref=FrameRef(record["dialogue_id"], int(record["turn_index"]), record["service"]),
        state=DialogueState(
            active_intent=state["active_intent"],
            requested_slots=frozenset(state["requested_slots"]),
            slot_values=dict(state["slot_values"]),
        ),
    )


def write_prediction_dump(frames: Iterable[PredFrame], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for frame in frames:
            handle.write(json.dumps(pred_frame_to_json(frame), ensure_ascii=False) + "\n")
            count += 1
    return count


def load_prediction_dump(path) -> list[PredFrame]:
    frames = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frames.append(pred_frame_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad prediction record: {exc}") from exc
    return frames


def write_report_csv(report: Mapping, path) -> None:
    """Flatten the report to one row per scope (overall, each service, seen,
    unseen)."""
    metrics = [
        "joint_goal_accuracy",
        "average_goal_accuracy",
        "average_goal_accuracy_micro",
        "intent_accuracy",
        "requested_slot_f1",
        "frames",
    ]
    rows = [("overall", report["overall"])]
    rows += [(f"service:{name}", vals) for name, vals in report.get("per_service", {}).items()]
    for key in ("seen_services", "unseen_services"):
        if key in report:
            rows.append((key, report[key]))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scope"] + metrics)
        for scope, vals in rows:
            writer.writerow([scope] + [vals[m] for m in metrics])
