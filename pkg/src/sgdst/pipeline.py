"""Run configuration, training loop, predicted-context inference and the
evaluation/oracle entry points.

The flow mirrors how the tracker is meant to be used end to end: `train`
fits the multi-task model on gold-context labels and keeps the checkpoint
with the best dev joint goal accuracy, `predict` walks dialogues turn by
turn advancing the context with the model's own decoded states, `evaluate`
scores a prediction dump against gold, and `oracle_check` replaces the model
with one-hot label lookups to verify that labeling, serialization and
decoding round-trip.

Gold dialogue states are read in exactly two places at inference time: the
involved-service filter (which services a turn touches) and the oracle
scorer.  The model scorer never sees them; a test guards this by poisoning
gold values and checking the dump is unchanged.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import torch
import yaml

from sgdst.context import (
    ContextSnapshot,
    binary_feature_matrix,
    compute_s_prev,
    init_context,
    involved_services,
    observe_system_turn,
    observe_user_turn,
)
from sgdst.corpus import (
    EMPTY_STATE,
    SYSTEM,
    Dialogue,
    DialogueState,
    Schema,
    Service,
    load_dialogues,
    load_schema,
)
from sgdst.decoding import DecodeOptions, TurnPredictions, decode_turn, predictions_from_labels
from sgdst.encoding import EncoderOptions, build_input
from sgdst.evaluation import (
    FrameRef,
    PredFrame,
    evaluate_frames,
    gold_frames_from_dialogues,
    load_prediction_dump,
    write_prediction_dump,
    write_report_csv,
)
from sgdst.labeling import (
    TurnInstance,
    count_label_sources,
    derive_turn_labels,
    instance_to_json,
    iter_corpus_instances,
    unresolvable_rate,
)
from sgdst.model import (
    DstModel,
    LossWeights,
    ModelConfig,
    TurnExample,
    build_example,
    collate,
    compute_loss,
    init_model,
    load_checkpoint,
    save_checkpoint,
    split_head_outputs,
    to_turn_predictions,
)
from sgdst.tokenization import Tokenizer, WordTokenizer, build_word_tokenizer

DATA_ROOT_ENV = "SGDST_DATA_ROOT"

SELECTION_METRICS = (
    "joint_goal_accuracy",
    "average_goal_accuracy",
    "intent_accuracy",
    "requested_slot_f1",
)


class PipelineError(Exception):
    pass


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Flat key-value run configuration; every field maps 1:1 to a YAML key."""

    # data
    data_root: str = ""
    train_split: str = "train"
    dev_split: str = "dev"
    test_split: str = "test"
    output_dir: str = "runs/default"

    # tokenizer / encoder backend
    tokenizer: str = "word"  # "word" or "pretrained"
    encoder: str = "tiny"  # "tiny" or "pretrained"
    pretrained_name: str = "bert-base-uncased"
    tiny_layers: int = 2
    tiny_hidden: int = 64
    tiny_heads: int = 2
    tiny_ffn: int = 128
    tiny_dropout: float = 0.1
    head_hidden: Optional[int] = None
    head_dropout: float = 0.3

    # input serialization
    max_len: int = 512
    use_system_actions: bool = True
    use_slot_descriptions: bool = False
    include_previous_state: bool = True
    use_binary_features: bool = True
    word_dropout_p: float = 0.1
    schema_augment_p: float = 0.1
    shuffle_schema: bool = True

    # loss weights
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    w5: float = 1.0
    w6: float = 1.0
    w7: float = 1.0
    w8: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0

    # optimization
    learning_rate: float = 2e-5
    warmup_fraction: float = 0.10
    weight_decay: float = 0.01
    batch_size: int = 16
    total_steps: int = 55_000
    eval_every: int = 4_000
    dev_eval_dialogues: int = 0  # 0 = all dev dialogues at each evaluation
    selection_metric: str = "joint_goal_accuracy"
    binary_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise PipelineError("warmup_fraction must be in [0, 1)")
        if self.total_steps < 1:
            raise PipelineError("total_steps must be positive")
        if not 1 <= self.eval_every <= self.total_steps:
            raise PipelineError("eval_every must be in [1, total_steps]")
        if self.batch_size < 1:
            raise PipelineError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise PipelineError("learning_rate must be positive")
        if self.selection_metric not in SELECTION_METRICS:
            raise PipelineError(
                f"unknown selection_metric {self.selection_metric!r}; "
                f"expected one of {', '.join(SELECTION_METRICS)}"
            )
        if self.tokenizer not in ("word", "pretrained"):
            raise PipelineError(f"unknown tokenizer {self.tokenizer!r}")
        if self.dev_eval_dialogues < 0:
            raise PipelineError("dev_eval_dialogues must be >= 0")
        # model/encoder field combinations are validated by their own types
        self.model_config()
        self.encoder_options()
        self.loss_weights()

    # seeds for the three stochasticity sources, derived from one user seed
    @property
    def data_seed(self) -> int:
        return self.seed * 3 + 0

    @property
    def augment_seed(self) -> int:
        return self.seed * 3 + 1

    @property
    def init_seed(self) -> int:
        return self.seed * 3 + 2

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            encoder=self.encoder,
            pretrained_name=self.pretrained_name,
            tiny_layers=self.tiny_layers,
            tiny_hidden=self.tiny_hidden,
            tiny_heads=self.tiny_heads,
            tiny_ffn=self.tiny_ffn,
            tiny_dropout=self.tiny_dropout,
            max_positions=self.max_len,
            head_hidden=self.head_hidden,
            head_dropout=self.head_dropout,
        )

    def encoder_options(self, seed: Optional[int] = None) -> EncoderOptions:
        return EncoderOptions(
            max_len=self.max_len,
            use_system_actions=self.use_system_actions,
            use_slot_descriptions=self.use_slot_descriptions,
            include_previous_state=self.include_previous_state,
            word_dropout_p=self.word_dropout_p,
            schema_augment_p=self.schema_augment_p,
            shuffle_schema=self.shuffle_schema,
            rng_seed=seed,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            w1=self.w1, w2=self.w2, w3=self.w3, w4=self.w4,
            w5=self.w5, w6=self.w6, w7=self.w7, w8=self.w8,
            lambda1=self.lambda1, lambda2=self.lambda2, lambda3=self.lambda3,
        )


def load_config(path: str | Path) -> RunConfig:
    """Parse a YAML config; unknown keys are an error so typos fail loudly."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise PipelineError(f"{path}: config must be a mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise PipelineError(f"{path}: unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise PipelineError(f"{path}: {exc}") from exc


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(dataclasses.asdict(config), sort_keys=True), encoding="utf-8"
    )


def config_hash(config: RunConfig) -> str:
    """Hash of everything that affects the training trajectory; output_dir is
    deliberately excluded so a run can be relocated and resumed."""
    payload = dataclasses.asdict(config)
    payload.pop("output_dir")
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# Table-2 style input ablations; each one is a single named flag that rewrites
# the relevant config fields before training.
ABLATIONS: dict[str, dict] = {
    "no_system_actions": {"use_system_actions": False},
    "with_slot_descriptions": {"use_slot_descriptions": True},
    "no_previous_state": {"include_previous_state": False},
    "no_schema_augmentation": {"schema_augment_p": 0.0},
    "no_schema_augmentation_no_word_dropout": {"schema_augment_p": 0.0, "word_dropout_p": 0.0},
    "no_binary_features": {"use_binary_features": False},
}


def apply_ablation(config: RunConfig, name: str) -> RunConfig:
    if name not in ABLATIONS:
        raise PipelineError(
            f"unknown ablation {name!r}; expected one of {', '.join(sorted(ABLATIONS))}"
        )
    return dataclasses.replace(config, **ABLATIONS[name])


# ---------------------------------------------------------------------------
# Data plumbing
# ---------------------------------------------------------------------------

def resolve_data_root(config: RunConfig) -> Path:
    root = config.data_root or os.environ.get(DATA_ROOT_ENV, "")
    if not root:
        raise PipelineError(
            f"no data root: set data_root in the config or the {DATA_ROOT_ENV} env var"
        )
    root = Path(root)
    if not root.exists():
        raise PipelineError(f"data root does not exist: {root}")
    return root


def load_split(root: Path, split: str) -> tuple[Schema, list[Dialogue]]:
    schema_path = root / split / "schema.json"
    if not schema_path.exists():
        raise PipelineError(f"missing schema file: {schema_path}")
    schema = load_schema(schema_path)
    dialogues = load_dialogues(root / split, schema)
    return schema, dialogues


def build_tokenizer(config: RunConfig, root: Path) -> Tokenizer:
    """Word tokenizer: vocabulary from every split's schema plus the train
    dialogues (schemas are model input, not labels, so reading the eval
    schemas is not leakage).  Pretrained tokenizer: wordpieces, no fitting."""
    if config.tokenizer == "pretrained":
        from sgdst.tokenization import WordpieceTokenizer

        return WordpieceTokenizer(config.pretrained_name)
    schemas = []
    for split in (config.train_split, config.dev_split, config.test_split):
        path = root / split / "schema.json"
        if path.exists():
            schemas.append(load_schema(path))
    train_schema, train_dialogues = load_split(root, config.train_split)
    return build_word_tokenizer(schemas or [train_schema], [train_dialogues])


def service_fingerprints(schema: Schema) -> dict[str, str]:
    """Stable per-service hash of the full definition; used to detect a
    checkpoint being evaluated against a silently edited schema."""
    out = {}
    for service in schema:
        payload = {
            "name": service.name,
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
                    "required": sorted(i.required_slots),
                    "optional": sorted(i.optional_slots),
                }
                for i in service.intents
            ],
        }
        blob = json.dumps(payload, sort_keys=True)
        out[service.name] = hashlib.sha256(blob.encode("utf-8")).hexdigest()
    return out


def _zero_features(instance: TurnInstance) -> TurnInstance:
    zeroed = {slot: (0.0,) * 6 for slot in instance.features}
    return dataclasses.replace(instance, features=zeroed)


def make_example(
    instance: TurnInstance,
    service: Service,
    config: RunConfig,
    tokenizer: Tokenizer,
    options: EncoderOptions,
    train: bool,
    rng: Optional[np.random.Generator] = None,
) -> TurnExample:
    if not config.use_binary_features:
        instance = _zero_features(instance)
    encoded = build_input(
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
    return build_example(instance, service, encoded)


# ---------------------------------------------------------------------------
# Predicted-context inference
# ---------------------------------------------------------------------------

# A scorer maps the turn's batch of (instance, service, encoded input, gold
# frame) to per-head probability tables.  The model scorer must ignore the
# frame; only the oracle reads it.
TurnScorer = Callable[[list], list[TurnPredictions]]


def model_scorer(model: DstModel, pad_id: int, use_binary_features: bool = True) -> TurnScorer:
    def score(items: list) -> list[TurnPredictions]:
        examples = []
        for inst, service, encoded, _ in items:
            if not use_binary_features:
                inst = _zero_features(inst)
            examples.append(build_example(inst, service, encoded))
        batch = collate(examples, pad_id)
        model.eval()
        with torch.no_grad():
            outputs = model(batch)
        return [
            to_turn_predictions(example, per_example)
            for example, per_example in zip(examples, split_head_outputs(batch, outputs))
        ]

    return score


def oracle_scorer(tokenizer: Tokenizer) -> TurnScorer:
    """Gold head labels derived against the LIVE (predicted) context, turned
    into one-hot probability tables."""

    def score(items: list) -> list[TurnPredictions]:
        predictions = []
        for instance, service, encoded, frame in items:
            offsets = tokenizer.utterance_tokens(instance.utterance)[1]
            labels = derive_turn_labels(
                instance.snapshot, service, frame, offsets, instance.s_prev
            )
            predictions.append(predictions_from_labels(instance, encoded, labels))
        return predictions

    return score


@dataclass
class WalkResult:
    frames: list[PredFrame] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    instances: int = 0


def run_dialogue(
    dialogue: Dialogue,
    schema: Schema,
    tokenizer: Tokenizer,
    options: EncoderOptions,
    scorer: TurnScorer,
    decode_options: DecodeOptions,
    result: WalkResult,
) -> None:
    """Walk one dialogue turn by turn, advancing the context with decoded
    states; gold states feed only the involved-service filter (and whatever
    the scorer itself chooses to read)."""
    ctx = init_context(schema, dialogue.dialogue_id)
    latest_gold: dict[str, DialogueState] = {}
    predicted: dict[str, DialogueState] = {}

    for turn_index, turn in enumerate(dialogue.turns):
        if turn.speaker == SYSTEM:
            observe_system_turn(ctx, turn)
            continue

        involved = involved_services(turn, latest_gold)
        system_actions = tuple(
            action for actions in ctx.last_system_actions.values() for action in actions
        )

        items = []
        for service_name in involved:
            service = schema.service(service_name)
            s_prev = tuple(compute_s_prev(ctx, service_name))
            snapshot = ContextSnapshot.capture(ctx, service_name)
            instance = TurnInstance(
                dialogue_id=dialogue.dialogue_id,
                turn_index=turn_index,
                service=service_name,
                utterance=turn.utterance,
                system_utterance=ctx.last_system_utterance,
                system_actions=system_actions,
                snapshot=snapshot,
                s_prev=s_prev,
                features=binary_feature_matrix(ctx, service),
            )
            encoded = build_input(
                instance.snapshot,
                service,
                instance.utterance,
                instance.s_prev,
                options,
                tokenizer,
                system_actions=instance.system_actions,
                system_utterance=instance.system_utterance,
                train=False,
            )
            items.append((instance, service, encoded, turn.frame_for(service_name)))

        decoded_states: dict[str, DialogueState] = {}
        if items:
            predictions = scorer(items)
            for (instance, service, _, _), preds in zip(items, predictions):
                decoded = decode_turn(preds, instance.snapshot, instance.s_prev, decode_options)
                decoded_states[instance.service] = decoded.state
                for key, count in decoded.counters.items():
                    result.counters[key] = result.counters.get(key, 0) + count
            result.instances += len(items)

        observe_user_turn(ctx, decoded_states)
        predicted.update(decoded_states)

        for frame in turn.frames:
            if frame.state is None:
                continue
            latest_gold[frame.service] = frame.state
            result.frames.append(
                PredFrame(
                    ref=FrameRef(dialogue.dialogue_id, turn_index, frame.service),
                    state=predicted.get(frame.service, EMPTY_STATE),
                )
            )


def run_split(
    dialogues: Sequence[Dialogue],
    schema: Schema,
    tokenizer: Tokenizer,
    options: EncoderOptions,
    scorer: TurnScorer,
    decode_options: DecodeOptions,
) -> WalkResult:
    result = WalkResult()
    for dialogue in dialogues:
        run_dialogue(dialogue, schema, tokenizer, options, scorer, decode_options, result)
    return result


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _linear_schedule(total_steps: int, warmup_fraction: float):
    warmup = int(round(total_steps * warmup_fraction))

    def factor(step: int) -> float:
        if warmup > 0 and step < warmup:
            return (step + 1) / warmup
        if total_steps == warmup:
            return 1.0
        remaining = total_steps - step
        return max(0.0, remaining / (total_steps - warmup))

    return factor


class _BatchSampler:
    """Deterministic shuffled-epoch sampler whose full state fits in a
    checkpoint."""

    def __init__(self, n: int, batch_size: int, seed: int):
        if n == 0:
            raise PipelineError("no training instances")
        self.n = n
        self.batch_size = batch_size
        self.rng = random.Random(seed)
        self.order: list[int] = []
        self.cursor = 0

    def next_batch(self) -> list[int]:
        batch = []
        while len(batch) < self.batch_size:
            if self.cursor >= len(self.order):
                self.order = list(range(self.n))
                self.rng.shuffle(self.order)
                self.cursor = 0
            batch.append(self.order[self.cursor])
            self.cursor += 1
        return batch

    def state(self) -> dict:
        return {"rng": self.rng.getstate(), "order": list(self.order), "cursor": self.cursor}

    def load_state(self, state: dict) -> None:
        self.rng.setstate(state["rng"])
        self.order = list(state["order"])
        self.cursor = int(state["cursor"])


def tokenizer_payload(tokenizer: Tokenizer) -> dict:
    if isinstance(tokenizer, WordTokenizer):
        return {"kind": "word", "vocab": list(tokenizer.tokens)}
    return {"kind": "pretrained", "name": tokenizer.pretrained_name}


def tokenizer_from_payload(payload: dict) -> Tokenizer:
    if payload["kind"] == "word":
        return WordTokenizer(payload["vocab"])
    from sgdst.tokenization import WordpieceTokenizer

    return WordpieceTokenizer(payload["name"])


def train(
    config: RunConfig,
    resume: bool = False,
    force: bool = False,
    log: Callable[[str], None] = print,
) -> Path:
    """Train to total_steps, evaluating on dev with predicted-context decoding
    every eval_every steps; returns the path of the best-JGA checkpoint."""
    config.validate()
    root = resolve_data_root(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.yaml")
    run_hash = config_hash(config)

    train_schema, train_dialogues = load_split(root, config.train_split)
    dev_schema, dev_dialogues = load_split(root, config.dev_split)
    if config.dev_eval_dialogues > 0:
        dev_dialogues = dev_dialogues[: config.dev_eval_dialogues]
    tokenizer = build_tokenizer(config, root)

    instances = list(iter_corpus_instances(train_dialogues, train_schema, tokenizer=tokenizer))
    if not instances:
        raise PipelineError("train split produced no (turn, service) instances")
    sources = count_label_sources(instances)
    log(
        f"train instances: {len(instances)}; label sources: {dict(sources)}; "
        f"unresolvable rate: {unresolvable_rate(sources):.4f}"
    )
    services = {inst.service: train_schema.service(inst.service) for inst in instances}

    model = init_model(config.model_config(), tokenizer.vocab_size, seed=config.init_seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, _linear_schedule(config.total_steps, config.warmup_fraction)
    )
    weights = config.loss_weights()
    sampler = _BatchSampler(len(instances), config.batch_size, config.data_seed)
    augment_rng = np.random.default_rng(config.augment_seed)
    train_options = config.encoder_options()
    eval_options = config.encoder_options()
    gold_dev = gold_frames_from_dialogues(dev_dialogues)
    decode_opts = DecodeOptions(binary_threshold=config.binary_threshold)

    start_step = 0
    best_metric = float("-inf")
    best_step = -1
    last_path = out_dir / "last.pt"
    best_path = out_dir / "best.pt"

    if resume:
        if not last_path.exists():
            raise PipelineError(f"cannot resume: {last_path} does not exist")
        payload = load_checkpoint(last_path)
        if payload["config_hash"] != run_hash and not force:
            raise PipelineError(
                "resume refused: the checkpoint was trained with a different "
                "config (pass force=True / --force to override)"
            )
        model.load_state_dict(payload["model_state"])
        optimizer.load_state_dict(payload["optimizer_state"])
        scheduler.load_state_dict(payload["scheduler_state"])
        start_step = payload["step"]
        best_metric = payload["best_metric"]
        best_step = payload["best_step"]
        sampler.load_state(payload["rng"]["sampler"])
        augment_rng.bit_generator.state = payload["rng"]["augment"]
        torch.set_rng_state(payload["rng"]["torch"])
        log(f"resumed at step {start_step} (best {best_metric:.4f} @ {best_step})")

    def checkpoint_payload(step: int) -> dict:
        return {
            "model_state": model.state_dict(),
            "optimizer_state": optimizer.state_dict(),
            "scheduler_state": scheduler.state_dict(),
            "step": step,
            "best_metric": best_metric,
            "best_step": best_step,
            "config": dataclasses.asdict(config),
            "config_hash": run_hash,
            "tokenizer": tokenizer_payload(tokenizer),
            "schema_fingerprints": service_fingerprints(train_schema),
            "rng": {
                "sampler": sampler.state(),
                "augment": augment_rng.bit_generator.state,
                "torch": torch.get_rng_state(),
            },
        }

    def dev_eval() -> dict:
        result = run_split(
            dev_dialogues, dev_schema, tokenizer, eval_options,
            model_scorer(model, tokenizer.pad_id, config.use_binary_features), decode_opts,
        )
        report = evaluate_frames(result.frames, gold_dev, dev_schema)
        model.train()
        return report["overall"]

    loss_log = open(out_dir / "loss_log.jsonl", "a", encoding="utf-8")
    model.train()
    started = time.time()
    try:
        for step in range(start_step, config.total_steps):
            batch_instances = [instances[i] for i in sampler.next_batch()]
            examples = [
                make_example(
                    inst, services[inst.service], config, tokenizer, train_options,
                    train=True, rng=augment_rng,
                )
                for inst in batch_instances
            ]
            batch = collate(examples, tokenizer.pad_id)
            outputs = model(batch)
            loss, components = compute_loss(outputs, batch, weights)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()

            record = {
                "step": step + 1,
                "loss": float(loss.detach()),
                "lr": scheduler.get_last_lr()[0],
                "components": {k: float(v.detach()) for k, v in components.items()},
            }
            loss_log.write(json.dumps(record) + "\n")

            done = step + 1
            if done % config.eval_every == 0 or done == config.total_steps:
                loss_log.flush()
                metrics = dev_eval()
                metric = metrics[config.selection_metric]
                if metric > best_metric:
                    best_metric = metric
                    best_step = done
                    save_checkpoint(best_path, checkpoint_payload(done))
                save_checkpoint(last_path, checkpoint_payload(done))
                log(
                    f"step {done}/{config.total_steps} "
                    f"loss {record['loss']:.4f} "
                    f"dev {config.selection_metric} {metric:.4f} "
                    f"(best {best_metric:.4f} @ {best_step}) "
                    f"[{time.time() - started:.0f}s]"
                )
    finally:
        loss_log.close()

    if not best_path.exists():  # every run evaluates at least once
        raise PipelineError("training finished without a dev evaluation")
    return best_path


# ---------------------------------------------------------------------------
# Prediction / evaluation / oracle entry points
# ---------------------------------------------------------------------------

def _check_schema_compatibility(fingerprints: dict, schema: Schema) -> None:
    current = service_fingerprints(schema)
    changed = [name for name in current if name in fingerprints and fingerprints[name] != current[name]]
    if changed:
        raise PipelineError(
            "schema mismatch between checkpoint and data for services: "
            + ", ".join(sorted(changed))
        )


def predict(
    config: RunConfig,
    checkpoint: Optional[str | Path],
    split: str,
    output: Optional[str | Path] = None,
    disable_carryover: Iterable[str] = (),
    oracle: bool = False,
    log: Callable[[str], None] = print,
) -> Path:
    """Run predicted-context inference over a split and write a JSON-lines
    dump with one record per gold frame.

    In oracle mode the model is replaced by labels derived on the fly against
    the live context; no checkpoint is needed.  Otherwise the checkpoint's
    embedded config drives the model and serialization so the input format
    always matches training.
    """
    root = resolve_data_root(config)
    schema, dialogues = load_split(root, split)

    decode_opts = DecodeOptions(binary_threshold=config.binary_threshold)
    if disable_carryover:
        decode_opts = dataclasses.replace(
            DecodeOptions.with_disabled(disable_carryover),
            binary_threshold=config.binary_threshold,
        )

    if oracle:
        tokenizer = build_tokenizer(config, root)
        options = config.encoder_options()
        scorer = oracle_scorer(tokenizer)
    else:
        if checkpoint is None:
            raise PipelineError("predict needs a checkpoint (or oracle mode)")
        payload = load_checkpoint(checkpoint)
        train_config = RunConfig(**payload["config"])
        _check_schema_compatibility(payload["schema_fingerprints"], schema)
        tokenizer = tokenizer_from_payload(payload["tokenizer"])
        model = init_model(train_config.model_config(), tokenizer.vocab_size)
        model.load_state_dict(payload["model_state"])
        options = train_config.encoder_options()
        scorer = model_scorer(model, tokenizer.pad_id, train_config.use_binary_features)

    result = run_split(dialogues, schema, tokenizer, options, scorer, decode_opts)
    if output is None:
        output = Path(config.output_dir) / f"predictions_{split}.jsonl"
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    count = write_prediction_dump(result.frames, output)
    log(
        f"wrote {count} frames for {len(dialogues)} dialogues to {output}"
        + (f"; decode counters: {result.counters}" if result.counters else "")
    )
    return output


def evaluate(
    predictions_path: str | Path,
    gold_root: str | Path,
    split: str,
    report_path: Optional[str | Path] = None,
    csv_path: Optional[str | Path] = None,
    seen_services: Optional[Iterable[str]] = None,
) -> dict:
    """Score a prediction dump against the gold split and write the metrics
    report; alignment problems raise with the offending frames listed."""
    root = Path(gold_root)
    schema, dialogues = load_split(root, split)
    gold = gold_frames_from_dialogues(dialogues)
    preds = load_prediction_dump(predictions_path)

    if seen_services is None:
        train_schema_path = root / "train" / "schema.json"
        if train_schema_path.exists() and split != "train":
            seen_services = [s.name for s in load_schema(train_schema_path)]

    report = evaluate_frames(preds, gold, schema, seen_services=seen_services)
    if report_path is not None:
        report_path = Path(report_path)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if csv_path is not None:
        write_report_csv(report, csv_path)
    return report


def oracle_check(config: RunConfig, split: str, log: Callable[[str], None] = print) -> dict:
    """End-to-end consistency audit: derive labels, turn them into one-hot
    predictions, decode, advance the context with the decoded states, then
    score against gold.  Near-perfect JGA here means labeling, serialization
    and decoding agree; the gap is bounded by the unresolvable-label rate."""
    root = resolve_data_root(config)
    schema, dialogues = load_split(root, split)
    tokenizer = build_tokenizer(config, root)
    options = config.encoder_options()

    result = run_split(
        dialogues, schema, tokenizer, options,
        oracle_scorer(tokenizer),
        DecodeOptions(binary_threshold=config.binary_threshold),
    )
    gold = gold_frames_from_dialogues(dialogues)
    report = evaluate_frames(result.frames, gold, schema)

    instances = list(iter_corpus_instances(dialogues, schema, tokenizer=tokenizer))
    sources = count_label_sources(instances)
    summary = {
        "split": split,
        "metrics": report["overall"],
        "label_sources": dict(sources),
        "unresolvable_rate": unresolvable_rate(sources),
        "decode_counters": dict(result.counters),
        "instances": result.instances,
    }
    log(
        f"oracle check on {split}: JGA {report['overall']['joint_goal_accuracy']:.4f}, "
        f"unresolvable rate {summary['unresolvable_rate']:.4f}"
    )
    return summary


def dump_examples(
    config: RunConfig,
    split: str,
    output: Optional[str | Path] = None,
    limit: Optional[int] = None,
) -> Path:
    """Debug rendering: serialized inputs plus derived labels, one JSON line
    per (turn, service) instance."""
    root = resolve_data_root(config)
    schema, dialogues = load_split(root, split)
    tokenizer = build_tokenizer(config, root)
    options = config.encoder_options()

    if output is None:
        output = Path(config.output_dir) / f"examples_{split}.jsonl"
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)

    from sgdst.encoding import render_parts

    count = 0
    with open(output, "w", encoding="utf-8") as handle:
        for instance in iter_corpus_instances(dialogues, schema, tokenizer=tokenizer):
            if limit is not None and count >= limit:
                break
            service = schema.service(instance.service)
            encoded = build_input(
                instance.snapshot, service, instance.utterance, instance.s_prev,
                options, tokenizer,
                system_actions=instance.system_actions,
                system_utterance=instance.system_utterance,
                train=False,
            )
            record = instance_to_json(instance)
            record["rendered"] = render_parts(encoded)
            record["length"] = len(encoded)
            record["overflow"] = encoded.overflow
            handle.write(json.dumps(record) + "\n")
            count += 1
    return output
