"""Acceptance gate: eight end-to-end checks, one printed PASS/FAIL line each.

Run `pytest tests/test_acceptance.py -s` to watch the lines as they complete;
without -s pytest still shows them for any failing check. The checks cover:

 1. oracle label/decode consistency on every bundled split
 2. the multi-task loss against an independent numpy reimplementation
 3. analytic gradients of every head against central finite differences
 4. memorizing a 32-example slice (train JGA 1.0, loss < 0.05)
 5. metric fixtures computed by hand plus the JGA <= Avg GA ordering
 6. decode-time carryover disabling touches only slots of that class
 7. the full-scale configuration ships and its results are documented
 8. bit-identical encodings and loss trajectories across repeated runs
"""

import dataclasses
import json
import random
import shutil
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
import torch

from sgdst.corpus import (
    NONE_INTENT,
    DialogueState,
    Intent,
    Schema,
    Service,
    Slot,
    load_dialogues,
    load_schema,
)
from sgdst.decoding import DecodeOptions, decode_turn, predictions_from_labels
from sgdst.encoding import EncoderOptions, build_input
from sgdst.evaluation import (
    FrameRef,
    GoldFrame,
    PredFrame,
    average_goal_accuracy,
    intent_accuracy,
    joint_goal_accuracy,
    requested_slot_f1,
)
from sgdst.labeling import CarryoverStatus, iter_corpus_instances
from sgdst.model import (
    ModelConfig,
    LossWeights,
    collate,
    compute_loss,
    init_model,
    split_head_outputs,
    to_turn_predictions,
)
from sgdst.pipeline import (
    RunConfig,
    evaluate,
    load_config,
    oracle_check,
    predict,
    train,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
QUIET = lambda message: None  # noqa: E731


def _report(number: int, name: str, passed: bool, details: str = "") -> None:
    line = f"ACCEPTANCE {number} ({name}): {'PASS' if passed else 'FAIL'}"
    if details:
        line += f" ({details})"
    print(line, flush=True)
    assert passed, line


# ---------------------------------------------------------------------------
# 1. Oracle consistency
# ---------------------------------------------------------------------------

def test_acceptance_1_oracle_consistency(corpus_root):
    import os

    results = []
    config = RunConfig(data_root=str(corpus_root))
    for split in ("train", "dev", "test"):
        summary = oracle_check(config, split, log=QUIET)
        results.append(
            (split, summary["metrics"]["joint_goal_accuracy"], summary["unresolvable_rate"])
        )

    external = os.environ.get("SGDST_DATA_ROOT", "")
    if external and Path(external).exists():
        summary = oracle_check(RunConfig(data_root=external), "train", log=QUIET)
        results.append(
            ("external:train",
             summary["metrics"]["joint_goal_accuracy"],
             summary["unresolvable_rate"]),
        )

    ok = all(jga >= 0.99 and rate < 0.02 for _, jga, rate in results)
    details = "; ".join(
        f"{split} JGA {jga:.4f}, unresolvable {rate:.4f}" for split, jga, rate in results
    )
    _report(1, "oracle consistency", ok, details)


# ---------------------------------------------------------------------------
# 2. Loss oracle
# ---------------------------------------------------------------------------

def _np_bce(logits, targets):
    return np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))


def _np_masked_bce(logits, targets, mask):
    if logits.size == 0 or not mask.any():
        return 0.0
    return float(_np_bce(logits, targets)[mask].mean())


def _np_masked_ce(logits, targets, mask):
    if logits.size == 0 or not mask.any():
        return 0.0
    rows = logits[mask]
    picked = rows[np.arange(rows.shape[0]), targets[mask]]
    return float((np.logaddexp.reduce(rows, axis=-1) - picked).mean())


def _np_total_loss(outputs, batch, w):
    """The nine-component loss recomputed from scratch in float64 numpy."""
    t = batch.targets
    npy = lambda x: x.detach().cpu().numpy()  # noqa: E731

    intent_status = _np_masked_ce(
        npy(outputs.intent_status), npy(t.intent_status), np.ones(len(batch), dtype=bool)
    )
    intent_value = _np_masked_bce(
        npy(outputs.intent_values), npy(t.intent_values), npy(t.intent_mask)
    )
    requested = _np_masked_bce(
        npy(outputs.requested), npy(t.requested), np.ones(npy(t.requested).shape, dtype=bool)
    )
    user_status = _np_masked_ce(npy(outputs.user_status), npy(t.user_status), npy(t.status_mask))
    carryover = _np_masked_ce(npy(outputs.carryover), npy(t.carryover), npy(t.status_mask))
    categorical = _np_masked_bce(
        npy(outputs.categorical), npy(t.categorical), npy(t.categorical_mask)
    )

    tok_mask = npy(batch.span_tok_mask)
    start_logits = np.where(tok_mask, npy(outputs.span_start), -1.0e9)
    end_logits = np.where(tok_mask, npy(outputs.span_end), -1.0e9)
    start_t, end_t = npy(t.span_start), npy(t.span_end)
    span_start = _np_masked_ce(start_logits, np.maximum(start_t, 0), start_t >= 0)
    span_end = _np_masked_ce(end_logits, np.maximum(end_t, 0), end_t >= 0)

    pair_mask = npy(batch.cross_pair_mask) & npy(t.cross_row_mask)[:, None]
    cross = _np_masked_bce(npy(outputs.cross), npy(t.cross), pair_mask)

    return (
        w.lambda1 * (w.w1 * intent_status + w.w2 * intent_value)
        + w.lambda2 * requested
        + w.lambda3
        * (
            w.w3 * user_status
            + w.w4 * carryover
            + w.w5 * categorical
            + w.w6 * span_start
            + w.w7 * span_end
            + w.w8 * cross
        )
    )


def _double_batch(batch):
    t = batch.targets
    targets = dataclasses.replace(
        t,
        intent_values=t.intent_values.double(),
        requested=t.requested.double(),
        categorical=t.categorical.double(),
        cross=t.cross.double(),
    )
    return dataclasses.replace(batch, slot_feats=batch.slot_feats.double(), targets=targets)


def test_acceptance_2_loss_oracle(train_examples, tokenizer):
    model = init_model(ModelConfig(), tokenizer.vocab_size, seed=2).double().eval()
    rng = random.Random(20240311)
    worst = 0.0
    for _ in range(50):
        picked = rng.sample(train_examples, rng.randint(2, 8))
        batch = _double_batch(collate(picked, tokenizer.pad_id))
        with torch.no_grad():
            outputs = model(batch)
        weights = LossWeights(*[rng.uniform(0.1, 2.0) for _ in range(11)])
        total, _ = compute_loss(outputs, batch, weights)
        reference = _np_total_loss(outputs, batch, weights)
        rel = abs(total.item() - reference) / max(abs(reference), 1e-9)
        worst = max(worst, rel)
    _report(2, "loss oracle", worst < 1e-6, f"50 batches, worst relative error {worst:.2e}")


# ---------------------------------------------------------------------------
# 3. Gradient check
# ---------------------------------------------------------------------------

def _head_coverage_batch(train_examples, pad_id):
    """A batch where every loss component is live, so every head gets real
    gradients."""

    def pick(predicate, k):
        return [e for e in train_examples if predicate(e.targets)][:k]

    chosen = (
        pick(lambda t: t.cross_mask.any(), 3)
        + pick(lambda t: t.categorical_mask.any(), 3)
        + pick(lambda t: (t.span_start >= 0).any(), 3)
        + pick(lambda t: t.intent_mask, 2)
    )
    unique = list({id(e): e for e in chosen}.values())
    return _double_batch(collate(unique, pad_id))


def test_acceptance_3_gradient_check(train_examples, tokenizer):
    model = init_model(ModelConfig(), tokenizer.vocab_size, seed=11).double().eval()
    batch = _head_coverage_batch(train_examples, tokenizer.pad_id)

    outputs = model(batch)
    total, components = compute_loss(outputs, batch)
    assert all(v.item() > 0 for v in components.values()), "a head has no live targets"
    model.zero_grad()
    total.backward()

    def loss_value():
        with torch.no_grad():
            out = model(batch)
            value, _ = compute_loss(out, batch)
        return value.item()

    heads = {
        "intent_status": model.intent_status_head,
        "intent_value": model.intent_value_head,
        "requested": model.requested_head,
        "user_status": model.user_status_head,
        "carryover": model.carryover_head,
        "categorical": model.categorical_head,
        "span_start": model.start_head,
        "span_end": model.end_head,
        "cross": model.cross_head,
    }
    eps = 1e-6
    rng = np.random.default_rng(0)
    worst_by_head = {}
    for name, module in heads.items():
        params = [p for p in module.parameters()]
        sizes = [p.numel() for p in params]
        flat_ids = rng.choice(sum(sizes), size=min(20, sum(sizes)), replace=False)
        worst = 0.0
        for flat in sorted(int(i) for i in flat_ids):
            for p, size in zip(params, sizes):
                if flat < size:
                    break
                flat -= size
            view = p.data.view(-1)
            original = view[flat].item()
            view[flat] = original + eps
            plus = loss_value()
            view[flat] = original - eps
            minus = loss_value()
            view[flat] = original
            numeric = (plus - minus) / (2 * eps)
            analytic = p.grad.view(-1)[flat].item()
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6))
        worst_by_head[name] = worst

    ok = all(v < 1e-4 for v in worst_by_head.values())
    details = "20 params/head, worst rel err " + ", ".join(
        f"{k} {v:.1e}" for k, v in worst_by_head.items()
    )
    _report(3, "gradient check", ok, details)


# ---------------------------------------------------------------------------
# 4. Tiny overfit
# ---------------------------------------------------------------------------

def test_acceptance_4_tiny_overfit(corpus_root, tmp_path_factory):
    started = time.time()
    schema = load_schema(corpus_root / "train" / "schema.json")
    dialogues = load_dialogues(corpus_root / "train", schema)
    from sgdst.tokenization import build_word_tokenizer

    tokenizer = build_word_tokenizer([schema], [dialogues])
    instances = list(iter_corpus_instances(dialogues, schema, tokenizer=tokenizer))
    per_dialogue = Counter(inst.dialogue_id for inst in instances)

    target = 32
    chosen, total = [], 0
    for dialogue in dialogues:
        count = per_dialogue[dialogue.dialogue_id]
        if total + count <= target:
            chosen.append(dialogue.dialogue_id)
            total += count
        if total == target:
            break

    root = tmp_path_factory.mktemp("overfit_corpus")
    raw = json.loads((corpus_root / "train" / "dialogues_001.json").read_text(encoding="utf-8"))
    subset = [d for d in raw if d["dialogue_id"] in set(chosen)]
    for split in ("train", "dev"):
        split_dir = root / split
        split_dir.mkdir(parents=True)
        shutil.copyfile(corpus_root / "train" / "schema.json", split_dir / "schema.json")
        (split_dir / "dialogues_001.json").write_text(json.dumps(subset), encoding="utf-8")

    config = load_config(REPO_ROOT / "configs" / "tiny_overfit.yaml")
    config = dataclasses.replace(
        config,
        data_root=str(root),
        output_dir=str(tmp_path_factory.mktemp("overfit_run")),
    )
    best = train(config, log=QUIET)

    log_lines = (Path(config.output_dir) / "loss_log.jsonl").read_text().splitlines()
    final_loss = json.loads(log_lines[-1])["loss"]
    dump = predict(config, best, "train", output=Path(config.output_dir) / "train.jsonl", log=QUIET)
    report = evaluate(dump, root, "train")
    jga = report["overall"]["joint_goal_accuracy"]
    elapsed = time.time() - started

    ok = (
        total == target
        and config.total_steps <= 2000
        and jga == 1.0
        and final_loss < 0.05
        and elapsed < 600
    )
    _report(
        4,
        "tiny overfit",
        ok,
        f"{total} examples, {config.total_steps} steps, final loss {final_loss:.4f}, "
        f"train JGA {jga:.2f}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 5. Metric fixtures
# ---------------------------------------------------------------------------

def _metric_service():
    return Service(
        name="S_1",
        intents=(
            Intent(NONE_INTENT, frozenset(), frozenset()),
            Intent("Find", frozenset({"a"}), frozenset({"b", "c"})),
        ),
        slots=(Slot("a", "", False, ()), Slot("b", "", False, ()), Slot("c", "", False, ())),
    )


def test_acceptance_5_metric_fixtures():
    service = _metric_service()
    schema = Schema(services={"S_1": service})

    def ref(i):
        return FrameRef("d1", 2 * i, "S_1")

    golds = [
        GoldFrame(ref(0), DialogueState("Find", frozenset({"a"}), {"a": "san jose", "b": "x"})),
        GoldFrame(ref(1), DialogueState("Find", frozenset(), {"a": "noon"}),
                  variants={"a": ("noon", "12 pm")}),
        GoldFrame(ref(2), DialogueState(NONE_INTENT, frozenset({"a", "b"}), {"c": "peanut"})),
    ]
    preds = [
        PredFrame(ref(0), DialogueState("Find", frozenset({"a"}), {"a": "San Jose", "b": "y"})),
        PredFrame(ref(1), DialogueState("Find", frozenset(), {"a": "12 pm"})),
        PredFrame(ref(2), DialogueState("Find", frozenset({"a"}), {})),
    ]
    # by hand: joint hits = [0, 1, 0]; per-frame GA = [1/2, 1, 0];
    # intent hits = [1, 1, 0]; requested F1 = [1, 1 (both empty), 2/3]
    fixture_ok = (
        abs(joint_goal_accuracy(preds, golds, schema) - 1 / 3) < 1e-12
        and abs(average_goal_accuracy(preds, golds, schema) - 0.5) < 1e-12
        and abs(intent_accuracy(preds, golds, schema) - 2 / 3) < 1e-12
        and abs(requested_slot_f1(preds, golds, schema) - (2 + 2 / 3) / 3) < 1e-12
    )

    rng = random.Random(555)
    slots = ["a", "b", "c"]
    values = ["u", "v", "w", "x"]
    ordering_ok = True
    for case in range(1000):
        golds, preds = [], []
        for i in range(rng.randint(1, 6)):
            gold_slots = rng.sample(slots, rng.randint(1, 3))
            pred_slots = rng.sample(slots, rng.randint(0, 3))
            golds.append(GoldFrame(
                ref(i),
                DialogueState("Find", frozenset(rng.sample(slots, rng.randint(0, 2))),
                              {s: rng.choice(values) for s in gold_slots}),
            ))
            preds.append(PredFrame(
                ref(i),
                DialogueState(rng.choice(["Find", NONE_INTENT]),
                              frozenset(rng.sample(slots, rng.randint(0, 2))),
                              {s: rng.choice(values) for s in pred_slots}),
            ))
        jga = joint_goal_accuracy(preds, golds, schema)
        avg = average_goal_accuracy(preds, golds, schema)
        f1 = requested_slot_f1(preds, golds, schema)
        if not (jga <= avg + 1e-12 and 0.0 <= jga <= 1.0 and 0.0 <= avg <= 1.0 and 0.0 <= f1 <= 1.0):
            ordering_ok = False
            break

    ok = fixture_ok and ordering_ok
    _report(
        5,
        "metric fixtures",
        ok,
        "hand-computed values exact; JGA <= Avg GA on 1000 randomized fixtures",
    )


# ---------------------------------------------------------------------------
# 6. Carryover-disable locality
# ---------------------------------------------------------------------------

_CARRYOVER_CLASSES = ("in_sys_uttr", "in_service_hist", "in_cross_service_hist")


def _locality_violations(example, preds, changed_counts):
    base = decode_turn(preds, example.instance.snapshot, example.instance.s_prev, DecodeOptions())
    argmax = {
        slot: CarryoverStatus(int(np.argmax(probs))) for slot, probs in preds.carryover.items()
    }
    violations = 0
    for class_name in _CARRYOVER_CLASSES:
        disabled_class = CarryoverStatus[class_name.upper()]
        options = DecodeOptions.with_disabled([class_name])
        disabled = decode_turn(preds, example.instance.snapshot, example.instance.s_prev, options)
        touched = {
            slot
            for slot in set(base.state.slot_values) | set(disabled.state.slot_values)
            if base.state.slot_values.get(slot) != disabled.state.slot_values.get(slot)
        }
        allowed = {slot for slot, cls in argmax.items() if cls == disabled_class}
        if not touched <= allowed:
            violations += 1
        if disabled.state.active_intent != base.state.active_intent:
            violations += 1
        if disabled.state.requested_slots != base.state.requested_slots:
            violations += 1
        changed_counts[class_name] += len(touched)
    return violations


def test_acceptance_6_carryover_disable_locality(train_examples, tokenizer):
    changed_counts = Counter()
    violations = 0

    # arbitrary model outputs: argmax classes scattered over all four values
    model = init_model(ModelConfig(), tokenizer.vocab_size, seed=3).eval()
    batch = collate(train_examples, tokenizer.pad_id)
    with torch.no_grad():
        outputs = model(batch)
    for example, per_example in zip(train_examples, split_head_outputs(batch, outputs)):
        preds = to_turn_predictions(example, per_example)
        violations += _locality_violations(example, preds, changed_counts)

    # oracle outputs: argmax equals the gold class, so every class is hit
    for example in train_examples:
        preds = predictions_from_labels(example.instance, example.encoded)
        violations += _locality_violations(example, preds, changed_counts)

    exercised = all(changed_counts[c] > 0 for c in _CARRYOVER_CLASSES)
    ok = violations == 0 and exercised
    _report(
        6,
        "carryover-disable locality",
        ok,
        f"{violations} violations over {2 * len(train_examples)} decodes x 3 classes; "
        f"slots changed per class: {dict(changed_counts)}",
    )


# ---------------------------------------------------------------------------
# 7. Full-scale run is shipped and documented
# ---------------------------------------------------------------------------

def test_acceptance_7_full_scale_documented():
    config_path = REPO_ROOT / "configs" / "full_bert_base.yaml"
    readme = (REPO_ROOT / "README.md").read_text(encoding="utf-8")

    config = load_config(config_path)
    config_ok = (
        config.encoder == "pretrained"
        and config.tokenizer == "pretrained"
        and config.pretrained_name == "bert-base-uncased"
        and config.total_steps == 55_000
        and config.batch_size == 16
        and abs(config.learning_rate - 2e-5) < 1e-12
        and config.eval_every == 4_000
        and config.max_len == 512
    )
    documented_ok = all(marker in readme for marker in ("82.5", "94.7", "99.4", "25.4"))
    ok = config_ok and documented_ok
    _report(
        7,
        "full-scale reproduction documented",
        ok,
        "configs/full_bert_base.yaml ships the 55k-step BERT-base run; "
        "expected test JGA 82.5 +/- 1.0, intent acc 94.7 +/- 0.5, requested F1 99.4 +/- 0.1, "
        "tiny-encoder proxy > 25.4 JGA; documented in README, not executed in CI",
    )


# ---------------------------------------------------------------------------
# 8. Determinism
# ---------------------------------------------------------------------------

def test_acceptance_8_determinism(corpus_root, train_schema, tokenizer, train_instances,
                                  tmp_path_factory):
    options = EncoderOptions(max_len=192, word_dropout_p=0.2, schema_augment_p=0.5)

    def encode_all(seed):
        rng = np.random.default_rng(seed)
        encoded = []
        for instance in train_instances[:25]:
            service = train_schema.service(instance.service)
            encoded.append(build_input(
                instance.snapshot, service, instance.utterance, instance.s_prev,
                options, tokenizer,
                system_actions=instance.system_actions,
                system_utterance=instance.system_utterance,
                train=True, rng=rng,
            ))
        return encoded

    first, second = encode_all(123), encode_all(123)
    inputs_ok = all(
        np.array_equal(a.token_ids, b.token_ids) and np.array_equal(a.segment_ids, b.segment_ids)
        for a, b in zip(first, second)
    )

    def run(out_dir):
        config = RunConfig(
            data_root=str(corpus_root),
            output_dir=str(out_dir),
            tiny_layers=1, tiny_hidden=32, tiny_heads=2, tiny_ffn=64,
            max_len=192, batch_size=4, total_steps=100, eval_every=100,
            dev_eval_dialogues=2, seed=7,
        )
        train(config, log=QUIET)
        lines = (out_dir / "loss_log.jsonl").read_text().splitlines()
        return [json.loads(line) for line in lines]

    log_a = run(tmp_path_factory.mktemp("det_a"))
    log_b = run(tmp_path_factory.mktemp("det_b"))
    loss_a = log_a[-1]["loss"]
    loss_b = log_b[-1]["loss"]
    runs_ok = log_a == log_b and log_a[-1]["step"] == 100

    ok = inputs_ok and runs_ok
    _report(
        8,
        "determinism",
        ok,
        f"25 augmented encodings bit-identical; two 100-step runs: "
        f"loss@100 {loss_a:.6f} vs {loss_b:.6f}, full trajectories "
        f"{'equal' if log_a == log_b else 'DIFFER'}",
    )
