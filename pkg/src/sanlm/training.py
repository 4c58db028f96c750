"""Training loop, held-out evaluation, and portable checkpointing.

The checkpoint is a self-describing binary container: an 8-byte magic,
a format version, a JSON header (model config, vocabulary hash, step
counter, rng state, tensor manifest with byte offsets), the raw
little-endian float64 tensor payload, and a trailing SHA-256 of all
preceding bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus as C
from .errors import (CheckpointChecksumError, CheckpointFormatError,
                     CheckpointVersionError, DataError, ParameterError,
                     VocabularyMismatchError)
from .model import BIDIRECTIONAL, LanguageModel, ModelConfig
from .optim import Adam
from .rng import RngState
from .tensor import backward

MAGIC = b"SANLMCKP"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    model: ModelConfig
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    max_steps: int = 100
    eval_interval: int = 50
    heldout_fraction: float = 0.05
    seed: int = 0
    checkpoint_dir: str | None = None
    checkpoint_interval: int | None = None  # default: only a final checkpoint

    def __post_init__(self):
        if self.max_steps < 0:
            raise ParameterError("max_steps must be >= 0")
        if self.eval_interval < 1:
            raise ParameterError("eval_interval must be >= 1")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ParameterError("heldout_fraction must be in [0, 1)")


@dataclass
class TrainResult:
    model: LanguageModel
    metrics: list[dict]
    skipped_too_long: int
    final_checkpoint: str | None
    rng: RngState
    optimizer: Adam = None


def _make_instance(tokens, vocab, rng, config: ModelConfig):
    if config.mode == BIDIRECTIONAL:
        return C.make_mlm_instance(tokens, vocab, rng, config.max_len)
    return C.make_unilm_instance(tokens, vocab, config.max_len)


def _compute_loss(model: LanguageModel, batch: C.Batch, training, rng):
    if model.config.mode == BIDIRECTIONAL:
        return model.mlm_loss(batch, training, rng)
    return model.next_word_loss(batch, training, rng)


def evaluate_heldout(model: LanguageModel, instances) -> dict:
    """Inference-mode mean loss and top-1 accuracy over supervised positions."""
    if not instances:
        raise DataError("evaluate_heldout requires at least one instance")
    total_nll = 0.0
    total_correct = 0
    total_positions = 0
    for batch in C.batches(list(instances), 64):
        log_probs = model.forward_batch(batch.inputs, batch.valid).data
        mask = batch.label_mask
        safe = np.where(mask, batch.labels, 0)
        picked = np.take_along_axis(log_probs, safe[..., None], axis=-1)[..., 0]
        total_nll += -(picked * mask).sum()
        predicted = log_probs.argmax(axis=-1)
        total_correct += int(((predicted == batch.labels) & mask).sum())
        total_positions += int(mask.sum())
    return {
        "loss": total_nll / total_positions,
        "accuracy": total_correct / total_positions,
    }


def train(config: TrainConfig, lines: list[str], vocab: C.Vocabulary,
          log_path=None) -> TrainResult:
    """Run Adam training over fresh per-epoch instances; log per-step loss."""
    if not lines:
        raise DataError("training corpus is empty")
    rng = RngState(config.seed)
    model = LanguageModel.create(config.model, rng)
    optimizer = Adam(model.parameters(), config.learning_rate,
                     config.beta1, config.beta2)

    tokenized = [C.tokenize(line) for line in lines]
    tokenized = [t for t in tokenized if t]
    order = rng.permutation(len(tokenized))
    n_heldout = min(len(tokenized) - 1,
                    max(1, int(config.heldout_fraction * len(tokenized))))
    heldout_sents = [tokenized[i] for i in order[:n_heldout]]
    train_sents = [tokenized[i] for i in order[n_heldout:]]
    if not train_sents:
        raise DataError("no training sentences after held-out split")

    skipped = 0
    heldout_instances = []
    heldout_rng = rng.fork()
    for tokens in heldout_sents:
        try:
            heldout_instances.append(
                _make_instance(tokens, vocab, heldout_rng, config.model))
        except C.SequenceTooLongError:
            skipped += 1

    metrics: list[dict] = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None

    def log(record: dict):
        metrics.append(record)
        if log_file:
            log_file.write(json.dumps(record, sort_keys=True) + "\n")

    step = 0
    pending = []
    try:
        while step < config.max_steps:
            epoch_order = rng.permutation(len(train_sents))
            made_any = False
            for idx in epoch_order:
                try:
                    pending.append(_make_instance(train_sents[idx], vocab, rng,
                                                  config.model))
                    made_any = True
                except C.SequenceTooLongError:
                    skipped += 1
                    continue
                if len(pending) < config.batch_size:
                    continue
                batch = C.make_batch(pending)
                pending = []
                loss = _compute_loss(model, batch, True, rng)
                backward(loss)
                optimizer.step()
                step += 1
                log({"step": step, "split": "train", "loss": float(loss.data)})
                if heldout_instances and step % config.eval_interval == 0:
                    ev = evaluate_heldout(model, heldout_instances)
                    log({"step": step, "split": "heldout",
                         "loss": ev["loss"], "accuracy": ev["accuracy"]})
                if (config.checkpoint_dir and config.checkpoint_interval
                        and step % config.checkpoint_interval == 0):
                    save_checkpoint(
                        Path(config.checkpoint_dir) / f"step{step:08d}.ckpt",
                        model, vocab.content_hash(), step, rng, optimizer)
                if step >= config.max_steps:
                    break
            if not made_any:
                raise DataError(
                    "corpus yielded zero valid training instances")
    finally:
        if log_file:
            log_file.close()

    final_path = None
    if config.checkpoint_dir:
        Path(config.checkpoint_dir).mkdir(parents=True, exist_ok=True)
        final_path = str(Path(config.checkpoint_dir) / "final.ckpt")
        save_checkpoint(final_path, model, vocab.content_hash(), step, rng,
                        optimizer)
    return TrainResult(model, metrics, skipped, final_path, rng, optimizer)


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

@dataclass
class LoadedCheckpoint:
    model: LanguageModel
    step: int
    rng: RngState
    vocab_hash: str
    optimizer_tensors: dict | None = None
    optimizer_step: int | None = None
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, model: LanguageModel, vocab_hash: str, step: int,
                    rng: RngState, optimizer: Adam | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    tensors: dict[str, np.ndarray] = {p.name: p.data for p in model.parameters()}
    if optimizer is not None:
        tensors.update(optimizer.state_tensors())

    manifest = []
    offset = 0
    for name in tensors:
        arr = tensors[name]
        nbytes = arr.size * 8
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset})
        offset += nbytes

    header = {
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "step": int(step),
        "rng": rng.state(),
        "optimizer_step": optimizer.step_count if optimizer else None,
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    for name in tensors:
        blob += np.ascontiguousarray(tensors[name], dtype="<f8").tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    path.write_bytes(bytes(blob))


def load_checkpoint(path, expected_vocab_hash: str | None = None,
                    load_optimizer: bool = False) -> LoadedCheckpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointFormatError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 12 + 32 or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"not a checkpoint file: {path}")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointChecksumError(f"checksum mismatch in {path}")
    version, = struct.unpack_from("<I", body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    header_len, = struct.unpack_from("<Q", body, len(MAGIC) + 4)
    header_start = len(MAGIC) + 12
    try:
        header = json.loads(body[header_start:header_start + header_len])
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"corrupt checkpoint header: {exc}") from exc
    if expected_vocab_hash is not None and header["vocab_hash"] != expected_vocab_hash:
        raise VocabularyMismatchError(
            f"checkpoint vocabulary hash {header['vocab_hash'][:12]}... does "
            f"not match the supplied vocabulary {expected_vocab_hash[:12]}...")

    payload = body[header_start + header_len:]
    loaded: dict[str, np.ndarray] = {}
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        loaded[entry["name"]] = arr.reshape(shape).astype(np.float64)

    config = ModelConfig.from_dict(header["config"])
    model = LanguageModel.zeros(config)
    for p in model.parameters():
        if p.name not in loaded:
            raise CheckpointFormatError(f"checkpoint missing tensor {p.name}")
        p.data[...] = loaded[p.name]

    optimizer_tensors = None
    if load_optimizer and header.get("optimizer_step") is not None:
        optimizer_tensors = {k: v for k, v in loaded.items()
                             if k.startswith("optim.")}
    return LoadedCheckpoint(
        model=model,
        step=header["step"],
        rng=RngState.from_state(header["rng"]),
        vocab_hash=header["vocab_hash"],
        optimizer_tensors=optimizer_tensors,
        optimizer_step=header.get("optimizer_step"),
    )
