"""Multi-task schema-guided dialogue state tracking with slot carryover.

A single encoder reads a five-part serialization of the preceding system
actions, the current user utterance, the active service schema and the
relevant dialogue history.  Nine classification heads jointly predict the
active intent, the requested slots and the slot values, including carryover
of values from system offers and from other services.
"""

from sgdst.corpus import (
    DONTCARE,
    NONE_INTENT,
    Dialogue,
    DialogueState,
    Frame,
    Intent,
    Schema,
    Service,
    Slot,
    Turn,
    informable_slots,
    load_dialogues,
    load_schema,
    normalize_name,
)
from sgdst.context import (
    BinaryFeatures,
    DialogueContext,
    PrevSlotEntry,
    binary_features,
    compute_s_prev,
    init_context,
    involved_services,
    observe_system_turn,
    observe_user_turn,
)
from sgdst.decoding import DecodeOptions, TurnPredictions, decode_turn
from sgdst.encoding import EncodedInput, EncoderOptions, build_input
from sgdst.evaluation import (
    evaluate_frames,
    fuzzy_match,
    gold_frames_from_dialogues,
    load_prediction_dump,
    write_prediction_dump,
)
from sgdst.labeling import (
    CarryoverStatus,
    TurnInstance,
    TurnLabels,
    UserStatus,
    derive_turn_labels,
    iter_corpus_instances,
)
from sgdst.model import (
    DstModel,
    LossWeights,
    ModelConfig,
    build_example,
    collate,
    compute_loss,
    init_model,
)
from sgdst.pipeline import (
    RunConfig,
    dump_examples,
    evaluate,
    load_config,
    oracle_check,
    predict,
    train,
)
from sgdst.tokenization import WordTokenizer, build_word_tokenizer

__version__ = "0.1.0"
