"""Tokenizers behind a single small interface.

Two implementations: a self-contained lowercase word tokenizer whose
vocabulary is built from a corpus (used with the tiny encoder, no downloads
needed), and a thin adapter over the HuggingFace BERT wordpiece tokenizer for
the pretrained encoder.  Both report character offsets for utterance tokens so
span predictions can be read back out of the raw utterance text.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

import numpy as np

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
INTENT_TOKEN = "[INTENT]"
SLOT_TOKEN = "[SLOT]"
VALUE_TOKEN = "[VALUE]"

MARKER_TOKENS = (INTENT_TOKEN, SLOT_TOKEN, VALUE_TOKEN)
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN) + MARKER_TOKENS

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class Tokenizer:
    """Interface shared by the word and the wordpiece tokenizers."""

    def word_tokens(self, text: str) -> list[str]:
        """Tokenize a text fragment (schema name, value, action rendering)."""
        raise NotImplementedError

    def utterance_tokens(self, text: str) -> tuple[list[str], list[tuple[int, int]]]:
        """Tokenize an utterance, returning tokens and char offsets into it."""
        raise NotImplementedError

    def token_id(self, token: str) -> int:
        raise NotImplementedError

    def convert(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.token_id(t) for t in tokens], dtype=np.int64)

    @property
    def vocab_size(self) -> int:
        raise NotImplementedError

    @property
    def pad_id(self) -> int:
        return self.token_id(PAD_TOKEN)

    @property
    def unk_id(self) -> int:
        return self.token_id(UNK_TOKEN)

    def fingerprint(self) -> str:
        raise NotImplementedError


class WordTokenizer(Tokenizer):
    """Lowercase word-level tokenizer with a frozen vocabulary.

    Words outside the vocabulary map to [UNK] at the id level; their surface
    form and offsets are kept so span values can still be extracted from the
    raw utterance.
    """

    def __init__(self, vocab: Sequence[str]):
        tokens = list(SPECIAL_TOKENS) + [t for t in vocab if t not in SPECIAL_TOKENS]
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    @classmethod
    def build(cls, texts: Iterable[str]) -> "WordTokenizer":
        words: set[str] = set()
        for text in texts:
            words.update(m.group(0).lower() for m in _WORD_RE.finditer(text))
        return cls(sorted(words))

    def word_tokens(self, text: str) -> list[str]:
        return [m.group(0).lower() for m in _WORD_RE.finditer(text)]

    def utterance_tokens(self, text: str) -> tuple[list[str], list[tuple[int, int]]]:
        tokens, offsets = [], []
        for m in _WORD_RE.finditer(text):
            tokens.append(m.group(0).lower())
            offsets.append((m.start(), m.end()))
        return tokens, offsets

    def token_id(self, token: str) -> int:
        return self.index.get(token, self.index[UNK_TOKEN])

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256("\n".join(self.tokens).encode("utf-8"))
        return h.hexdigest()[:16]


def build_word_tokenizer(schemas, dialogue_sets) -> WordTokenizer:
    """Build a vocabulary from schemas and dialogues.

    Covers normalized schema names, descriptions, categorical values, action
    act names, and all utterance words, plus the literal words the serializer
    injects ("none", "system", "dontcare").
    """
    from sgdst.corpus import normalize_name

    texts: list[str] = ["none", "system", "dontcare", ";"]
    for schema in schemas:
        for service in schema:
            texts.append(normalize_name(service.name))
            for intent in service.intents:
                texts.append(normalize_name(intent.name))
            for slot in service.slots:
                texts.append(normalize_name(slot.name))
                texts.append(slot.description)
                texts.extend(slot.possible_values)
    for dialogues in dialogue_sets:
        for dialogue in dialogues:
            for turn in dialogue.turns:
                texts.append(turn.utterance)
                for frame in turn.frames:
                    for action in frame.actions:
                        texts.append(normalize_name(action.act))
                        texts.extend(action.values)
    return WordTokenizer.build(texts)


class WordpieceTokenizer(Tokenizer):
    """Adapter over the HuggingFace BERT uncased tokenizer, with the custom
    marker tokens registered as added tokens."""

    def __init__(self, pretrained_name: str = "bert-base-uncased"):
        try:
            from transformers import AutoTokenizer
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise RuntimeError(
                "the pretrained encoder path needs the 'transformers' package; "
                "install with: pip install sgdst[pretrained]"
            ) from exc
        try:
            self._tok = AutoTokenizer.from_pretrained(pretrained_name)
        except OSError as exc:  # pragma: no cover - environment dependent
            raise RuntimeError(
                f"could not load tokenizer {pretrained_name!r}; download the "
                f"model files or set HF_HOME to a populated cache"
            ) from exc
        self._tok.add_tokens(list(MARKER_TOKENS))
        self.pretrained_name = pretrained_name

    def word_tokens(self, text: str) -> list[str]:
        return self._tok.tokenize(text)

    def utterance_tokens(self, text: str) -> tuple[list[str], list[tuple[int, int]]]:
        enc = self._tok(text, add_special_tokens=False, return_offsets_mapping=True)
        tokens = self._tok.convert_ids_to_tokens(enc["input_ids"])
        return tokens, [tuple(o) for o in enc["offset_mapping"]]

    def token_id(self, token: str) -> int:
        mapped = {
            PAD_TOKEN: self._tok.pad_token or PAD_TOKEN,
            UNK_TOKEN: self._tok.unk_token or UNK_TOKEN,
            CLS_TOKEN: self._tok.cls_token or CLS_TOKEN,
            SEP_TOKEN: self._tok.sep_token or SEP_TOKEN,
        }.get(token, token)
        return self._tok.convert_tokens_to_ids(mapped)

    @property
    def vocab_size(self) -> int:
        return len(self._tok)

    def fingerprint(self) -> str:
        return f"wordpiece:{self.pretrained_name}:{len(self._tok)}"
