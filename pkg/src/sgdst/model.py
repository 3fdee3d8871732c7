"""Transformer encoder with nine classification heads and the weighted
multi-task loss.

One forward pass scores everything for a (turn, service) input: intent
switch (CLS), per-intent activation ([INTENT] positions), requested and
user/carryover status (Part-4 [SLOT] positions, with the 6 binary slot
features concatenated after the first head layer), categorical values
([VALUE] positions), start/end span distributions over user tokens
([token; slot] concatenation) and cross-service carryover ([Part-5 slot;
Part-4 slot] concatenation).

Batches use flat gather indices: variable-count positions from every example
are concatenated into one index list per head, so a batch is a handful of
dense tensors regardless of how ragged the schema sizes are.

Two encoder backends: a small trainable transformer built here (TINY, used
by the tests and the overfit gate) and a pretrained BERT loaded through
transformers (PRETRAINED, the full-scale configuration).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from sgdst.corpus import Service, informable_slots
from sgdst.encoding import EncodedInput
from sgdst.labeling import CarryoverStatus, TurnInstance, UserStatus

NEG_INF = -1.0e9


class ModelError(Exception):
    pass


@dataclass
class LossWeights:
    """L = l1*(w1*intent_status + w2*intent_value) + l2*requested
    + l3*(w3*user + w4*carryover + w5*categorical + w6*start + w7*end
    + w8*cross)."""

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

    def __post_init__(self):
        values = [getattr(self, name) for name in self.__dataclass_fields__]
        if any(v < 0 for v in values):
            raise ValueError("loss weights must be non-negative")
        if all(v == 0 for v in values):
            raise ValueError("at least one loss weight must be positive")


@dataclass
class ModelConfig:
    encoder: str = "tiny"  # "tiny" or "pretrained"
    pretrained_name: str = "bert-base-uncased"
    tiny_layers: int = 2
    tiny_hidden: int = 64
    tiny_heads: int = 2
    tiny_ffn: int = 128
    tiny_dropout: float = 0.1
    max_positions: int = 512
    head_hidden: Optional[int] = None  # defaults to the encoder hidden size
    head_dropout: float = 0.3
    binary_feature_dim: int = 6

    def __post_init__(self):
        if self.encoder not in ("tiny", "pretrained"):
            raise ValueError(f"unknown encoder kind {self.encoder!r}")
        if not 0.0 <= self.head_dropout < 1.0:
            raise ValueError("head_dropout must be in [0, 1)")
        if self.encoder == "tiny" and self.tiny_hidden % self.tiny_heads != 0:
            raise ValueError("tiny_hidden must be divisible by tiny_heads")


# ---------------------------------------------------------------------------
# Examples: encoded input + alignment + targets
# ---------------------------------------------------------------------------

@dataclass
class TurnExample:
    """One model call: the serialized input plus every alignment list the
    heads need, all in serialized order."""

    instance: TurnInstance
    encoded: EncodedInput
    intent_names: list[str]
    slot_names: list[str]  # all Part-4 slots
    informable: list[str]  # informable subset, serialized order
    noncategorical: list[str]  # informable non-categorical subset
    cat_values: dict[str, list[str]]  # slot -> values, serialized order
    p5_indices: list[int]  # kept s_prev entry indices, serialized order
    features: np.ndarray  # (n slots, 6) aligned with slot_names
    targets: Optional["TurnTargets"] = None

    @property
    def n_user_tokens(self) -> int:
        start, end = self.encoded.index_map.user_tokens
        return end - start


@dataclass
class TurnTargets:
    intent_status: int  # 0 keep, 1 changed
    intent_values: np.ndarray  # (n intents,) 0/1
    intent_mask: bool  # supervise intent_values only on changed turns
    requested: np.ndarray  # (n slots,) 0/1
    user_status: np.ndarray  # (n informable,) class ids
    carryover: np.ndarray  # (n informable,) class ids
    status_mask: np.ndarray  # (n informable,) bool; False = unresolvable
    categorical: np.ndarray  # (n values,) 0/1
    categorical_mask: np.ndarray  # (n values,) bool
    span_start: np.ndarray  # (n noncat,) kept-token index or -1
    span_end: np.ndarray  # (n noncat,) kept-token index or -1
    cross: np.ndarray  # (n informable, n kept p5) 0/1
    cross_mask: np.ndarray  # (n informable,) bool; row supervised


def build_example(
    instance: TurnInstance, service: Service, encoded: EncodedInput
) -> TurnExample:
    index_map = encoded.index_map
    informable = set(informable_slots(service))
    slot_names = list(index_map.slots_part4)
    inf_names = [s for s in slot_names if s in informable]
    noncat = [s for s in inf_names if not service.slot(s).is_categorical]

    cat_values: dict[str, list[str]] = {}
    for slot, value in index_map.values:
        cat_values.setdefault(slot, []).append(value)

    features = np.array(
        [instance.features[s] for s in slot_names], dtype=np.float32
    ).reshape(len(slot_names), -1)

    example = TurnExample(
        instance=instance,
        encoded=encoded,
        intent_names=list(index_map.intents),
        slot_names=slot_names,
        informable=inf_names,
        noncategorical=noncat,
        cat_values=cat_values,
        p5_indices=list(index_map.slots_part5),
        features=features,
    )
    if instance.labels is not None:
        example.targets = build_targets(example)
    return example


def build_targets(example: TurnExample) -> TurnTargets:
    labels = example.instance.labels
    assert labels is not None

    intent_values = np.array(
        [1.0 if name == labels.active_intent else 0.0 for name in example.intent_names],
        dtype=np.float32,
    )
    requested = np.array(
        [1.0 if s in labels.requested else 0.0 for s in example.slot_names], dtype=np.float32
    )

    n_inf = len(example.informable)
    user_status = np.zeros(n_inf, dtype=np.int64)
    carryover = np.zeros(n_inf, dtype=np.int64)
    status_mask = np.ones(n_inf, dtype=bool)

    n_val = sum(len(v) for v in example.cat_values.values())
    categorical = np.zeros(n_val, dtype=np.float32)
    categorical_mask = np.zeros(n_val, dtype=bool)
    value_offset = {}
    offset = 0
    for slot, values in example.cat_values.items():
        value_offset[slot] = offset
        offset += len(values)

    span_start = np.full(len(example.noncategorical), -1, dtype=np.int64)
    span_end = np.full(len(example.noncategorical), -1, dtype=np.int64)

    kept = {orig: j for j, orig in enumerate(example.encoded.user_token_index)}
    kept_p5 = {orig: j for j, orig in enumerate(example.p5_indices)}
    cross = np.zeros((n_inf, len(example.p5_indices)), dtype=np.float32)
    cross_mask = np.zeros(n_inf, dtype=bool)

    for i, slot in enumerate(example.informable):
        lab = labels.slots[slot]
        if not lab.resolvable:
            status_mask[i] = False
            continue
        user_status[i] = int(lab.user_status)
        carryover[i] = int(lab.carryover_status)

        if lab.user_status == UserStatus.ACTIVE and lab.cat_value is not None:
            values = example.cat_values.get(slot, [])
            base = value_offset.get(slot, 0)
            for k, value in enumerate(values):
                categorical_mask[base + k] = True
                if value == lab.cat_value:
                    categorical[base + k] = 1.0
        elif lab.user_status == UserStatus.ACTIVE and lab.span_tokens is not None:
            row = example.noncategorical.index(slot)
            start, end = lab.span_tokens
            if start in kept and end in kept:
                span_start[row] = kept[start]
                span_end[row] = kept[end]
            else:  # truncated away; exclude from the loss
                status_mask[i] = False
        elif lab.carryover_status == CarryoverStatus.IN_CROSS_SERVICE_HIST:
            if lab.cross_index in kept_p5:
                cross_mask[i] = True
                cross[i, kept_p5[lab.cross_index]] = 1.0
            else:
                status_mask[i] = False

    return TurnTargets(
        intent_status=labels.intent_changed,
        intent_values=intent_values,
        intent_mask=bool(labels.intent_changed),
        requested=requested,
        user_status=user_status,
        carryover=carryover,
        status_mask=status_mask,
        categorical=categorical,
        categorical_mask=categorical_mask,
        span_start=span_start,
        span_end=span_end,
        cross=cross,
        cross_mask=cross_mask,
    )


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    examples: list[TurnExample]
    input_ids: torch.Tensor  # (B, T)
    segment_ids: torch.Tensor  # (B, T)
    attention_mask: torch.Tensor  # (B, T) bool
    cls_pos: torch.Tensor  # (B,)

    intent_ex: torch.Tensor  # (Ni,) example index per [INTENT]
    intent_pos: torch.Tensor  # (Ni,)

    slot_ex: torch.Tensor  # (Ns,) example index per Part-4 [SLOT]
    slot_pos: torch.Tensor  # (Ns,)
    slot_feats: torch.Tensor  # (Ns, 6)
    inf_rows: torch.Tensor  # (Nf,) rows of slot_* that are informable

    val_ex: torch.Tensor  # (Nv,)
    val_pos: torch.Tensor  # (Nv,)

    span_ex: torch.Tensor  # (R,)
    span_slot_row: torch.Tensor  # (R,) row into slot_* arrays
    span_tok_pos: torch.Tensor  # (R, Tu)
    span_tok_mask: torch.Tensor  # (R, Tu) bool

    cross_ex: torch.Tensor  # (R2,)
    cross_slot_row: torch.Tensor  # (R2,)
    cross_pos: torch.Tensor  # (R2, E)
    cross_pair_mask: torch.Tensor  # (R2, E) bool

    targets: Optional["BatchTargets"] = None

    def __len__(self) -> int:
        return len(self.examples)


@dataclass
class BatchTargets:
    intent_status: torch.Tensor  # (B,)
    intent_values: torch.Tensor  # (Ni,)
    intent_mask: torch.Tensor  # (Ni,) bool, expanded per element
    requested: torch.Tensor  # (Ns,)
    user_status: torch.Tensor  # (Nf,)
    carryover: torch.Tensor  # (Nf,)
    status_mask: torch.Tensor  # (Nf,) bool
    categorical: torch.Tensor  # (Nv,)
    categorical_mask: torch.Tensor  # (Nv,) bool
    span_start: torch.Tensor  # (R,)
    span_end: torch.Tensor  # (R,)
    cross: torch.Tensor  # (R2, E)
    cross_row_mask: torch.Tensor  # (R2,) bool


def collate(examples: Sequence[TurnExample], pad_id: int) -> Batch:
    if not examples:
        raise ModelError("cannot collate an empty batch")
    for example in examples:
        if len(example.encoded) == 0:
            raise ModelError(f"empty encoded input for {example.instance.uid}")

    max_len = max(len(e.encoded) for e in examples)
    batch_size = len(examples)
    input_ids = np.full((batch_size, max_len), pad_id, dtype=np.int64)
    segment_ids = np.zeros((batch_size, max_len), dtype=np.int64)
    attention = np.zeros((batch_size, max_len), dtype=bool)
    cls_pos = np.zeros(batch_size, dtype=np.int64)

    intent_ex, intent_pos = [], []
    slot_ex, slot_pos, slot_feats, inf_rows = [], [], [], []
    val_ex, val_pos = [], []
    span_meta = []  # (example idx, slot row, [token positions])
    cross_meta = []  # (example idx, slot row, [p5 positions])

    with_targets = all(e.targets is not None for e in examples)
    t_intent_status, t_intent_values, t_intent_mask = [], [], []
    t_requested, t_user, t_carry, t_status_mask = [], [], [], []
    t_cat, t_cat_mask = [], []
    t_span_start, t_span_end = [], []
    t_cross_rows, t_cross_row_mask = [], []

    slot_row_base = 0
    for b, example in enumerate(examples):
        encoded = example.encoded
        n = len(encoded)
        input_ids[b, :n] = encoded.token_ids
        segment_ids[b, :n] = encoded.segment_ids
        attention[b, :n] = True
        cls_pos[b] = encoded.index_map.cls

        for name in example.intent_names:
            intent_ex.append(b)
            intent_pos.append(encoded.index_map.intents[name])

        slot_rows = {}
        for name in example.slot_names:
            slot_rows[name] = slot_row_base + len(slot_rows)
            slot_ex.append(b)
            slot_pos.append(encoded.index_map.slots_part4[name])
        slot_feats.append(example.features)
        for name in example.informable:
            inf_rows.append(slot_rows[name])

        for slot, values in example.cat_values.items():
            for value in values:
                val_ex.append(b)
                val_pos.append(encoded.index_map.values[(slot, value)])

        user_start, user_end = encoded.index_map.user_tokens
        user_positions = list(range(user_start, user_end))
        if user_positions:
            for name in example.noncategorical:
                span_meta.append((b, slot_rows[name], user_positions))

        p5_positions = [encoded.index_map.slots_part5[i] for i in example.p5_indices]
        if p5_positions:
            for name in example.informable:
                cross_meta.append((b, slot_rows[name], p5_positions))

        if with_targets:
            tgt = example.targets
            t_intent_status.append(tgt.intent_status)
            t_intent_values.append(tgt.intent_values)
            t_intent_mask.extend([tgt.intent_mask] * len(example.intent_names))
            t_requested.append(tgt.requested)
            t_user.append(tgt.user_status)
            t_carry.append(tgt.carryover)
            t_status_mask.append(tgt.status_mask)
            t_cat.append(tgt.categorical)
            t_cat_mask.append(tgt.categorical_mask)
            if user_positions:
                t_span_start.append(tgt.span_start)
                t_span_end.append(tgt.span_end)
            if p5_positions:
                t_cross_rows.append(tgt.cross)
                t_cross_row_mask.append(tgt.cross_mask)

        slot_row_base += len(example.slot_names)

    def pad_rows(meta, rows_targets=None):
        count = len(meta)
        width = max((len(positions) for _, _, positions in meta), default=0)
        ex = np.zeros(count, dtype=np.int64)
        row = np.zeros(count, dtype=np.int64)
        pos = np.zeros((count, width), dtype=np.int64)
        mask = np.zeros((count, width), dtype=bool)
        for i, (b, slot_row, positions) in enumerate(meta):
            ex[i] = b
            row[i] = slot_row
            pos[i, : len(positions)] = positions
            mask[i, : len(positions)] = True
        return ex, row, pos, mask, width

    s_ex, s_row, s_pos, s_mask, _ = pad_rows(span_meta)
    c_ex, c_row, c_pos, c_mask, c_width = pad_rows(cross_meta)

    targets = None
    if with_targets:
        cross_rows = np.zeros((len(cross_meta), c_width), dtype=np.float32)
        offset = 0
        for block in t_cross_rows:
            rows, width = block.shape
            cross_rows[offset : offset + rows, :width] = block
            offset += rows
        targets = BatchTargets(
            intent_status=torch.tensor(t_intent_status, dtype=torch.long),
            intent_values=torch.from_numpy(
                np.concatenate(t_intent_values) if t_intent_values else np.zeros(0, np.float32)
            ),
            intent_mask=torch.tensor(t_intent_mask, dtype=torch.bool),
            requested=torch.from_numpy(np.concatenate(t_requested)),
            user_status=torch.from_numpy(np.concatenate(t_user)),
            carryover=torch.from_numpy(np.concatenate(t_carry)),
            status_mask=torch.from_numpy(np.concatenate(t_status_mask)),
            categorical=torch.from_numpy(
                np.concatenate(t_cat) if t_cat else np.zeros(0, np.float32)
            ),
            categorical_mask=torch.from_numpy(
                np.concatenate(t_cat_mask) if t_cat_mask else np.zeros(0, bool)
            ),
            span_start=torch.from_numpy(
                np.concatenate(t_span_start) if t_span_start else np.zeros(0, np.int64)
            ),
            span_end=torch.from_numpy(
                np.concatenate(t_span_end) if t_span_end else np.zeros(0, np.int64)
            ),
            cross=torch.from_numpy(cross_rows),
            cross_row_mask=torch.from_numpy(
                np.concatenate(t_cross_row_mask) if t_cross_row_mask else np.zeros(0, bool)
            ),
        )

    return Batch(
        examples=list(examples),
        input_ids=torch.from_numpy(input_ids),
        segment_ids=torch.from_numpy(segment_ids),
        attention_mask=torch.from_numpy(attention),
        cls_pos=torch.from_numpy(cls_pos),
        intent_ex=torch.tensor(intent_ex, dtype=torch.long),
        intent_pos=torch.tensor(intent_pos, dtype=torch.long),
        slot_ex=torch.tensor(slot_ex, dtype=torch.long),
        slot_pos=torch.tensor(slot_pos, dtype=torch.long),
        slot_feats=torch.from_numpy(
            np.concatenate(slot_feats) if slot_feats else np.zeros((0, 6), np.float32)
        ),
        inf_rows=torch.tensor(inf_rows, dtype=torch.long),
        val_ex=torch.tensor(val_ex, dtype=torch.long),
        val_pos=torch.tensor(val_pos, dtype=torch.long),
        span_ex=torch.from_numpy(s_ex),
        span_slot_row=torch.from_numpy(s_row),
        span_tok_pos=torch.from_numpy(s_pos),
        span_tok_mask=torch.from_numpy(s_mask),
        cross_ex=torch.from_numpy(c_ex),
        cross_slot_row=torch.from_numpy(c_row),
        cross_pos=torch.from_numpy(c_pos),
        cross_pair_mask=torch.from_numpy(c_mask),
        targets=targets,
    )


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

class TinyEncoder(nn.Module):
    """Small BERT-shaped encoder trained from scratch; word embeddings plus
    learned position and segment embeddings feeding a standard transformer
    stack."""

    def __init__(self, vocab_size: int, config: ModelConfig):
        super().__init__()
        hidden = config.tiny_hidden
        self.hidden_size = hidden
        self.word_embeddings = nn.Embedding(vocab_size, hidden)
        self.position_embeddings = nn.Embedding(config.max_positions, hidden)
        self.segment_embeddings = nn.Embedding(2, hidden)
        self.norm = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(config.tiny_dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=hidden,
            nhead=config.tiny_heads,
            dim_feedforward=config.tiny_ffn,
            dropout=config.tiny_dropout,
            activation="gelu",
            batch_first=True,
        )
        self.layers = nn.TransformerEncoder(
            layer, num_layers=config.tiny_layers, enable_nested_tensor=False
        )

    def forward(
        self, input_ids: torch.Tensor, segment_ids: torch.Tensor, attention_mask: torch.Tensor
    ) -> torch.Tensor:
        seq_len = input_ids.shape[1]
        if seq_len > self.position_embeddings.num_embeddings:
            raise ModelError(
                f"sequence length {seq_len} exceeds max_positions "
                f"{self.position_embeddings.num_embeddings}"
            )
        positions = torch.arange(seq_len, device=input_ids.device).unsqueeze(0)
        states = (
            self.word_embeddings(input_ids)
            + self.position_embeddings(positions)
            + self.segment_embeddings(segment_ids)
        )
        states = self.dropout(self.norm(states))
        return self.layers(states, src_key_padding_mask=~attention_mask)


class PretrainedEncoder(nn.Module):
    """BERT-style encoder loaded through transformers; lazy import so the
    package works without the optional dependency."""

    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        try:
            from transformers import AutoModel
        except ImportError as exc:
            raise ModelError(
                "the pretrained encoder needs the transformers package; "
                "install it with: pip install 'sgdst[pretrained]'"
            ) from exc
        try:
            self.bert = AutoModel.from_pretrained(config.pretrained_name)
        except OSError as exc:
            raise ModelError(
                f"could not load pretrained weights {config.pretrained_name!r}; "
                "download them first (requires network or a populated HF cache)"
            ) from exc
        if vocab_size > self.bert.get_input_embeddings().num_embeddings:
            # marker tokens added on top of the stock vocabulary; new rows are
            # drawn from the model's own initializer distribution
            self.bert.resize_token_embeddings(vocab_size)
        self.hidden_size = self.bert.config.hidden_size

    def forward(self, input_ids, segment_ids, attention_mask):
        out = self.bert(
            input_ids=input_ids,
            token_type_ids=segment_ids,
            attention_mask=attention_mask.to(dtype=torch.long),
        )
        return out.last_hidden_state


# ---------------------------------------------------------------------------
# Heads and the full model
# ---------------------------------------------------------------------------

class TwoLayerHead(nn.Module):
    """linear -> gelu -> dropout -> linear; optional extra features are
    concatenated after the first layer."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, dropout: float, extra_dim: int = 0):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, hidden)
        self.fc2 = nn.Linear(hidden + extra_dim, out_dim)
        self.dropout = nn.Dropout(dropout)
        self.extra_dim = extra_dim

    def forward(self, states: torch.Tensor, extra: Optional[torch.Tensor] = None) -> torch.Tensor:
        hidden = self.dropout(F.gelu(self.fc1(states)))
        if self.extra_dim:
            if extra is None:
                raise ModelError("this head requires binary features")
            hidden = torch.cat([hidden, extra], dim=-1)
        return self.fc2(hidden)


@dataclass
class BatchHeadOutputs:
    """Flat logits aligned with the batch's gather indices."""

    intent_status: torch.Tensor  # (B, 2)
    intent_values: torch.Tensor  # (Ni,)
    requested: torch.Tensor  # (Ns,)
    user_status: torch.Tensor  # (Nf, 3)
    carryover: torch.Tensor  # (Nf, 4)
    categorical: torch.Tensor  # (Nv,)
    span_start: torch.Tensor  # (R, Tu)
    span_end: torch.Tensor  # (R, Tu)
    cross: torch.Tensor  # (R2, E)


@dataclass
class HeadOutputs:
    """Per-example numpy view of the logits, shaped by the example's index
    map."""

    intent_status: np.ndarray  # (2,)
    intent_values: np.ndarray  # (n intents,)
    requested: np.ndarray  # (n slots,)
    user_status: np.ndarray  # (n informable, 3)
    carryover: np.ndarray  # (n informable, 4)
    categorical: np.ndarray  # (n values,)
    span_start: np.ndarray  # (n noncat, n user tokens)
    span_end: np.ndarray  # (n noncat, n user tokens)
    cross: np.ndarray  # (n informable, n kept p5)


class DstModel(nn.Module):
    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        self.config = config
        if config.encoder == "tiny":
            self.encoder = TinyEncoder(vocab_size, config)
        else:
            self.encoder = PretrainedEncoder(config, vocab_size)
        hidden = self.encoder.hidden_size
        head_hidden = config.head_hidden or hidden
        p = config.head_dropout
        feat = config.binary_feature_dim

        self.intent_status_head = TwoLayerHead(hidden, head_hidden, 2, p)
        self.intent_value_head = TwoLayerHead(hidden, head_hidden, 1, p)
        self.requested_head = TwoLayerHead(hidden, head_hidden, 1, p, extra_dim=feat)
        self.user_status_head = TwoLayerHead(hidden, head_hidden, 3, p, extra_dim=feat)
        self.carryover_head = TwoLayerHead(hidden, head_hidden, 4, p, extra_dim=feat)
        self.categorical_head = TwoLayerHead(hidden, head_hidden, 1, p)
        self.start_head = TwoLayerHead(2 * hidden, head_hidden, 1, p)
        self.end_head = TwoLayerHead(2 * hidden, head_hidden, 1, p)
        self.cross_head = TwoLayerHead(2 * hidden, head_hidden, 1, p)

    def forward(self, batch: Batch) -> BatchHeadOutputs:
        hidden = self.encoder(batch.input_ids, batch.segment_ids, batch.attention_mask)
        batch_idx = torch.arange(len(batch), device=hidden.device)

        cls_states = hidden[batch_idx, batch.cls_pos]
        intent_states = hidden[batch.intent_ex, batch.intent_pos]
        slot_states = hidden[batch.slot_ex, batch.slot_pos]
        inf_states = slot_states[batch.inf_rows]
        inf_feats = batch.slot_feats[batch.inf_rows]
        val_states = hidden[batch.val_ex, batch.val_pos]

        token_states = hidden[batch.span_ex.unsqueeze(1), batch.span_tok_pos]  # (R, Tu, H)
        span_slot = slot_states[batch.span_slot_row].unsqueeze(1).expand_as(token_states)
        span_pairs = torch.cat([token_states, span_slot], dim=-1)

        p5_states = hidden[batch.cross_ex.unsqueeze(1), batch.cross_pos]  # (R2, E, H)
        cross_slot = slot_states[batch.cross_slot_row].unsqueeze(1).expand_as(p5_states)
        cross_pairs = torch.cat([p5_states, cross_slot], dim=-1)

        return BatchHeadOutputs(
            intent_status=self.intent_status_head(cls_states),
            intent_values=self.intent_value_head(intent_states).squeeze(-1),
            requested=self.requested_head(slot_states, batch.slot_feats).squeeze(-1),
            user_status=self.user_status_head(inf_states, inf_feats),
            carryover=self.carryover_head(inf_states, inf_feats),
            categorical=self.categorical_head(val_states).squeeze(-1),
            span_start=self.start_head(span_pairs).squeeze(-1),
            span_end=self.end_head(span_pairs).squeeze(-1),
            cross=self.cross_head(cross_pairs).squeeze(-1),
        )


def init_model(config: ModelConfig, vocab_size: int, seed: int = 0) -> DstModel:
    """Build the model with deterministic initial weights for a given seed
    (exact for the tiny encoder; the pretrained path only seeds the heads and
    any resized embedding rows)."""
    torch.manual_seed(seed)
    return DstModel(config, vocab_size)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def _masked_bce(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    if logits.numel() == 0 or not bool(mask.any()):
        return logits.new_zeros(())
    per_element = F.binary_cross_entropy_with_logits(logits, targets, reduction="none")
    return per_element[mask].mean()


def _masked_ce(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    if logits.numel() == 0 or not bool(mask.any()):
        return logits.new_zeros(())
    return F.cross_entropy(logits[mask], targets[mask])


def compute_loss(
    outputs: BatchHeadOutputs, batch: Batch, weights: LossWeights = LossWeights()
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Weighted multi-task loss; every component is a mean over its unmasked
    targets and contributes zero when it has none."""
    targets = batch.targets
    if targets is None:
        raise ModelError("compute_loss needs a batch collated with targets")

    components: dict[str, torch.Tensor] = {}
    components["intent_status"] = F.cross_entropy(outputs.intent_status, targets.intent_status)
    components["intent_value"] = _masked_bce(
        outputs.intent_values, targets.intent_values, targets.intent_mask
    )
    components["requested"] = _masked_bce(
        outputs.requested, targets.requested, torch.ones_like(targets.requested, dtype=torch.bool)
    )
    components["user_status"] = _masked_ce(
        outputs.user_status, targets.user_status, targets.status_mask
    )
    components["carryover"] = _masked_ce(
        outputs.carryover, targets.carryover, targets.status_mask
    )
    components["categorical"] = _masked_bce(
        outputs.categorical, targets.categorical, targets.categorical_mask
    )

    span_logits_start = outputs.span_start.masked_fill(~batch.span_tok_mask, NEG_INF)
    span_logits_end = outputs.span_end.masked_fill(~batch.span_tok_mask, NEG_INF)
    start_mask = targets.span_start >= 0
    end_mask = targets.span_end >= 0
    components["span_start"] = _masked_ce(
        span_logits_start, targets.span_start.clamp(min=0), start_mask
    )
    components["span_end"] = _masked_ce(
        span_logits_end, targets.span_end.clamp(min=0), end_mask
    )

    pair_mask = batch.cross_pair_mask & targets.cross_row_mask.unsqueeze(-1)
    components["cross"] = _masked_bce(outputs.cross, targets.cross, pair_mask)

    w = weights
    total = (
        w.lambda1 * (w.w1 * components["intent_status"] + w.w2 * components["intent_value"])
        + w.lambda2 * components["requested"]
        + w.lambda3
        * (
            w.w3 * components["user_status"]
            + w.w4 * components["carryover"]
            + w.w5 * components["categorical"]
            + w.w6 * components["span_start"]
            + w.w7 * components["span_end"]
            + w.w8 * components["cross"]
        )
    )
    return total, components


# ---------------------------------------------------------------------------
# Per-example output views and prediction tables
# ---------------------------------------------------------------------------

def split_head_outputs(batch: Batch, outputs: BatchHeadOutputs) -> list[HeadOutputs]:
    """Regroup the flat batch logits into one numpy HeadOutputs per example."""
    def _np(tensor):
        return tensor.detach().cpu().numpy()

    intent_ex = _np(batch.intent_ex)
    slot_ex = _np(batch.slot_ex)
    inf_rows = _np(batch.inf_rows)
    inf_ex = slot_ex[inf_rows]
    val_ex = _np(batch.val_ex)
    span_ex = _np(batch.span_ex)
    cross_ex = _np(batch.cross_ex)
    span_mask = _np(batch.span_tok_mask)
    cross_mask = _np(batch.cross_pair_mask)

    intent_values = _np(outputs.intent_values)
    requested = _np(outputs.requested)
    user_status = _np(outputs.user_status)
    carryover = _np(outputs.carryover)
    categorical = _np(outputs.categorical)
    span_start = _np(outputs.span_start)
    span_end = _np(outputs.span_end)
    cross = _np(outputs.cross)
    intent_status = _np(outputs.intent_status)

    results = []
    for b, example in enumerate(batch.examples):
        n_user = example.n_user_tokens
        n_p5 = len(example.p5_indices)
        span_sel = span_ex == b
        cross_sel = cross_ex == b
        # examples with no user tokens contribute no span rows; examples with
        # an empty previous state contribute no cross rows
        if span_sel.any():
            ex_start = span_start[span_sel][:, :n_user]
            ex_end = span_end[span_sel][:, :n_user]
        else:
            ex_start = np.zeros((len(example.noncategorical), n_user), dtype=np.float32)
            ex_end = np.zeros((len(example.noncategorical), n_user), dtype=np.float32)
        if cross_sel.any():
            ex_cross = cross[cross_sel][:, :n_p5]
        else:
            ex_cross = np.zeros((len(example.informable), n_p5), dtype=np.float32)
        results.append(
            HeadOutputs(
                intent_status=intent_status[b],
                intent_values=intent_values[intent_ex == b],
                requested=requested[slot_ex == b],
                user_status=user_status[inf_ex == b],
                carryover=carryover[inf_ex == b],
                categorical=categorical[val_ex == b],
                span_start=ex_start,
                span_end=ex_end,
                cross=ex_cross,
            )
        )
    return results


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def to_turn_predictions(example: TurnExample, outputs: HeadOutputs):
    """Probability tables for the decoder, keyed by the example's alignment
    lists."""
    from sgdst.decoding import TurnPredictions

    intent_scores = dict(zip(example.intent_names, _sigmoid(outputs.intent_values).tolist()))
    requested_scores = dict(zip(example.slot_names, _sigmoid(outputs.requested).tolist()))

    user_status = {}
    carry = {}
    for i, slot in enumerate(example.informable):
        user_status[slot] = _softmax(outputs.user_status[i])
        carry[slot] = _softmax(outputs.carryover[i])

    categorical: dict[str, dict[str, float]] = {}
    offset = 0
    for slot, values in example.cat_values.items():
        probs = _sigmoid(outputs.categorical[offset : offset + len(values)])
        categorical[slot] = dict(zip(values, probs.tolist()))
        offset += len(values)

    span_start = {}
    span_end = {}
    if outputs.span_start.size:
        for row, slot in enumerate(example.noncategorical):
            span_start[slot] = _softmax(outputs.span_start[row])
            span_end[slot] = _softmax(outputs.span_end[row])

    cross: dict[str, dict[int, float]] = {}
    if outputs.cross.size:
        for i, slot in enumerate(example.informable):
            probs = _sigmoid(outputs.cross[i])
            cross[slot] = dict(zip(example.p5_indices, probs.tolist()))

    return TurnPredictions(
        service=example.instance.service,
        utterance=example.instance.utterance,
        user_offsets=list(example.encoded.user_offsets),
        intent_status=_softmax(outputs.intent_status),
        intent_scores=intent_scores,
        requested_scores=requested_scores,
        user_status=user_status,
        carryover=carry,
        categorical=categorical,
        span_start=span_start,
        span_end=span_end,
        cross=cross,
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, payload: dict) -> None:
    """Atomic write: serialize to a temp file in the same directory, then
    rename over the target."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"checkpoint not found: {path}")
    return torch.load(path, map_location="cpu", weights_only=False)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
