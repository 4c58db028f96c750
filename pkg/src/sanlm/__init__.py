"""Self-attention language models for sentence scoring and N-best rescoring."""

from .corpus import Vocabulary, build_vocab, tokenize
from .model import BIDIRECTIONAL, UNIDIRECTIONAL, LanguageModel, ModelConfig
from .rng import RngState
from .scoring import make_scorer, score_bidirectional, score_unidirectional
from .training import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Vocabulary", "build_vocab", "tokenize",
    "BIDIRECTIONAL", "UNIDIRECTIONAL", "LanguageModel", "ModelConfig",
    "RngState",
    "make_scorer", "score_bidirectional", "score_unidirectional",
    "TrainConfig", "load_checkpoint", "save_checkpoint", "train",
    "__version__",
]
