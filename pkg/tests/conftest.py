"""Shared fixtures: one synthetic corpus per session plus tokenizer and
instance caches so individual tests stay fast."""

import pytest

from sgdst.corpus import load_dialogues, load_schema
from sgdst.encoding import EncoderOptions, build_input
from sgdst.labeling import iter_corpus_instances
from sgdst.model import build_example
from sgdst.tokenization import build_word_tokenizer
from sgdst.toydata import generate_toy_corpus


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_toy_corpus(root, seed=0)
    return root


@pytest.fixture(scope="session")
def train_schema(corpus_root):
    return load_schema(corpus_root / "train" / "schema.json")


@pytest.fixture(scope="session")
def train_dialogues(corpus_root, train_schema):
    return load_dialogues(corpus_root / "train", train_schema)


@pytest.fixture(scope="session")
def test_schema(corpus_root):
    return load_schema(corpus_root / "test" / "schema.json")


@pytest.fixture(scope="session")
def test_dialogues(corpus_root, test_schema):
    return load_dialogues(corpus_root / "test", test_schema)


@pytest.fixture(scope="session")
def tokenizer(corpus_root, train_schema, train_dialogues, test_schema):
    dev_schema = load_schema(corpus_root / "dev" / "schema.json")
    return build_word_tokenizer([train_schema, dev_schema, test_schema], [train_dialogues])


@pytest.fixture(scope="session")
def train_instances(train_dialogues, train_schema, tokenizer):
    return list(iter_corpus_instances(train_dialogues, train_schema, tokenizer=tokenizer))


@pytest.fixture(scope="session")
def eval_options():
    return EncoderOptions(word_dropout_p=0.0, schema_augment_p=0.0, shuffle_schema=False)


@pytest.fixture(scope="session")
def make_eval_example(train_schema, tokenizer, eval_options):
    """instance -> TurnExample with no augmentation; the common eval path."""

    def build(instance, schema=None):
        service = (schema or train_schema).service(instance.service)
        encoded = build_input(
            instance.snapshot,
            service,
            instance.utterance,
            instance.s_prev,
            eval_options,
            tokenizer,
            system_actions=instance.system_actions,
            system_utterance=instance.system_utterance,
            train=False,
        )
        return build_example(instance, service, encoded)

    return build


@pytest.fixture(scope="session")
def train_examples(train_instances, make_eval_example):
    return [make_eval_example(inst) for inst in train_instances]
