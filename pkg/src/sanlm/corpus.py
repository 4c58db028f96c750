"""Text ingestion: vocabulary, tokenization, training instances, batches."""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, ParameterError, SequenceTooLongError, VocabularyError
from .rng import RngState

PAD, UNK, BOS, EOS, MASK = "<pad>", "<unk>", "<s>", "</s>", "<M>"
SPECIALS = [PAD, UNK, BOS, EOS, MASK]
PAD_ID, UNK_ID, BOS_ID, EOS_ID, MASK_ID = range(5)

MAX_MASKS_PER_INSTANCE = 4
MASK_FRACTION = 0.15

# Label value marking unsupervised positions in padded label matrices.
IGNORE = -1


def tokenize(line: str) -> list[str]:
    """Lowercase and split on whitespace runs."""
    return line.lower().split()


class Vocabulary:
    """Token <-> id map; specials at fixed ids, then frequency-ranked tokens."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[:len(SPECIALS)] != SPECIALS:
            raise VocabularyError(
                f"vocabulary must start with specials {SPECIALS}")
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("vocabulary contains duplicate tokens")
        self._tokens = tokens
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise VocabularyError(f"token id {token_id} out of range")
        return self._tokens[token_id]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def content_hash(self) -> str:
        """Stable hash of the token list (independent of file location)."""
        payload = "\n".join(self._tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls([line for line in text.splitlines() if line != ""])


def build_vocab(lines: Iterable[str], k: int) -> Vocabulary:
    """Specials plus the k most frequent tokens (ties broken lexically)."""
    if k < 1:
        raise ParameterError(f"vocabulary size must be >= 1, got {k}")
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(tokenize(line))
    if not counts:
        raise DataError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(SPECIALS + [tok for tok, _ in ranked[:k]])


@dataclass
class TrainingInstance:
    mode: str                       # "bidirectional" | "unidirectional"
    input_ids: list[int]
    labels: list[int]               # per masked position (bi) or per position (uni)
    masked_positions: list[int] | None = None  # sorted; None for uni


def mask_count(n: int) -> int:
    """min(4, max(1, round(0.15 n))) with round half away from zero."""
    return min(MAX_MASKS_PER_INSTANCE, max(1, int(math.floor(MASK_FRACTION * n + 0.5))))


def make_mlm_instance(tokens: Sequence[str], vocab: Vocabulary, rng: RngState,
                      max_len: int = 128) -> TrainingInstance:
    """Mask a fixed fraction of positions (always with <M>) and keep labels."""
    n = len(tokens)
    if n < 1:
        raise DataError("cannot build an instance from an empty sentence")
    if n > max_len:
        raise SequenceTooLongError(
            f"sentence of {n} words exceeds max length {max_len}")
    ids = vocab.encode(tokens)
    positions = sorted(int(p) for p in rng.choice(n, size=mask_count(n)))
    labels = [ids[p] for p in positions]
    for p in positions:
        ids[p] = MASK_ID
    return TrainingInstance("bidirectional", ids, labels, positions)


def make_unilm_instance(tokens: Sequence[str], vocab: Vocabulary,
                        max_len: int = 128) -> TrainingInstance:
    """Input <s> w1..wn; targets w1..wn </s> (input shifted left by one)."""
    n = len(tokens)
    if n < 1:
        raise DataError("cannot build an instance from an empty sentence")
    if n + 1 > max_len:
        raise SequenceTooLongError(
            f"sentence of {n} words needs {n + 1} positions, max is {max_len}")
    ids = vocab.encode(tokens)
    return TrainingInstance("unidirectional", [BOS_ID] + ids, ids + [EOS_ID])


@dataclass
class Batch:
    """Padded instances; pad positions are excluded from attention and loss."""

    inputs: np.ndarray    # [B, n_max] int64
    valid: np.ndarray     # [B, n_max] bool, False at padding
    labels: np.ndarray    # [B, n_max] int64, IGNORE where unsupervised
    lengths: list[int]
    mode: str

    @property
    def label_mask(self) -> np.ndarray:
        return self.labels != IGNORE


def make_batch(instances: Sequence[TrainingInstance]) -> Batch:
    if not instances:
        raise DataError("cannot batch zero instances")
    mode = instances[0].mode
    if any(inst.mode != mode for inst in instances):
        raise DataError("cannot mix instance modes in one batch")
    lengths = [len(inst.input_ids) for inst in instances]
    n_max = max(lengths)
    b = len(instances)
    inputs = np.full((b, n_max), PAD_ID, dtype=np.int64)
    valid = np.zeros((b, n_max), dtype=bool)
    labels = np.full((b, n_max), IGNORE, dtype=np.int64)
    for row, inst in enumerate(instances):
        n = lengths[row]
        inputs[row, :n] = inst.input_ids
        valid[row, :n] = True
        if mode == "bidirectional":
            if not inst.masked_positions:
                raise DataError("bidirectional instance has no masked positions")
            for pos, label in zip(inst.masked_positions, inst.labels):
                labels[row, pos] = label
        else:
            labels[row, :n] = inst.labels
    return Batch(inputs, valid, labels, lengths, mode)


def batches(instances: Sequence[TrainingInstance],
            batch_size: int) -> Iterator[Batch]:
    """Stream fixed-size padded batches in instance order."""
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    for start in range(0, len(instances), batch_size):
        yield make_batch(instances[start:start + batch_size])


def read_corpus(path) -> list[str]:
    """One sentence per line, UTF-8; blank lines dropped."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"corpus file not found: {p}")
    return [line for line in p.read_text(encoding="utf-8").splitlines()
            if line.strip()]
