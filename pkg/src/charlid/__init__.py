"""Per-character language identification with a bidirectional GRU labeler."""

from .corpus import LabeledStream, LabelSet, Vocabulary
from .network import ModelConfig, ModelParams, forward_window, init_params
from .tasks import (CharPrediction, classify_document, detect_languages,
                    partition_text, predict_chars)

__version__ = "0.1.0"

__all__ = [
    "LabeledStream", "LabelSet", "Vocabulary", "ModelConfig", "ModelParams",
    "forward_window", "init_params", "CharPrediction", "classify_document",
    "detect_languages", "partition_text", "predict_chars", "__version__",
]
