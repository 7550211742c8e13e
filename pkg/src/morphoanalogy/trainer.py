"""Training loops for the classifier and regressor, plus checkpoint files.

Training iterates over base quadruples grouped into fixed-size batches of
post-augmentation examples; the four words of each base are embedded once
per batch and the augmented forms are assembled by index gathers, which is
also how the embedding gradients flow back. Invalid forms for the
classifier are sampled once per run, so a (config, seed) pair fully
determines every batch and the resulting checkpoint bit for bit.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import augment
from .annc import AnncParams, annc_backward, annc_forward, init_annc
from .annr import AnnrParams, annr_backward, annr_forward, init_annr
from .corpus import CharIndex, Quadruple, build_charset, quadruple_words
from .embedder import (
    EmbedderParams,
    embed_batch,
    embed_batch_backward,
    init_embedder,
)
from .numkit import (
    NumericError,
    Parameter,
    Rng,
    adam_step,
    bce_loss,
    bce_loss_backward,
    ratio_loss,
    ratio_loss_backward,
    zero_grads,
)

MAGIC = b"MRPH"
FORMAT_VERSION = 1
TOOL_VERSION = "0.1.0"

INVALID_SETTINGS = ("3-of-base", "8-sampled", "24-all")

CLASSIFICATION_LR = 1e-3
REGRESSION_LR = 1e-4


class TrainingError(RuntimeError):
    """Training aborted: empty data, config contradiction, or numeric blowup."""


class CheckpointError(ValueError):
    """Checkpoint bytes are corrupt, truncated, or of an unsupported version."""


@dataclass(frozen=True)
class TrainConfig:
    task: str
    language: str = ""
    epochs: int = 20
    lr: float = CLASSIFICATION_LR
    batch_size: int = 256            # post-augmentation examples per batch
    char_dim: int = 64
    invalid_setting: str = "8-sampled"
    cap: Optional[int] = 50000       # extraction cap, recorded for provenance
    seed: int = 0
    freeze_epochs: int = 10          # regression only

    @classmethod
    def classification(cls, **kwargs) -> "TrainConfig":
        kwargs.setdefault("lr", CLASSIFICATION_LR)
        return cls(task="classification", **kwargs)

    @classmethod
    def regression(cls, **kwargs) -> "TrainConfig":
        kwargs.setdefault("lr", REGRESSION_LR)
        return cls(task="regression", **kwargs)

    def validate(self) -> None:
        if self.task not in ("classification", "regression"):
            raise TrainingError(f"unknown task {self.task!r}")
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise TrainingError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise TrainingError(f"batch size must be >= 1, got {self.batch_size}")
        if self.invalid_setting not in INVALID_SETTINGS:
            raise TrainingError(
                f"invalid_setting must be one of {INVALID_SETTINGS}, got {self.invalid_setting!r}")


@dataclass
class Checkpoint:
    """Named float32 parameter arrays plus JSON-serializable metadata."""

    metadata: dict
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def task(self) -> str:
        return self.metadata.get("task", "")

    def charset(self) -> CharIndex:
        return CharIndex.from_json(self.metadata["charset"])


# ---------------------------------------------------------------------------
# checkpoint serialization


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.metadata, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<Q", len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(ckpt.params)))
    for name, value in ckpt.params.items():
        if value.dtype != np.float32:
            raise CheckpointError(f"parameter {name!r} is {value.dtype}, expected float32")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", value.ndim))
        for extent in value.shape:
            buf.write(struct.pack("<Q", extent))
        buf.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return buf.getvalue()


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    view = memoryview(data)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != MAGIC:
        raise CheckpointError("bad magic: not a model checkpoint")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")
    (meta_len,) = struct.unpack("<Q", take(8, "metadata length"))
    try:
        metadata = json.loads(bytes(take(meta_len, "metadata")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata block: {exc}") from exc
    (n_records,) = struct.unpack("<I", take(4, "record count"))
    params: dict[str, np.ndarray] = {}
    for _ in range(n_records):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = bytes(take(name_len, "name")).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, "rank"))
        shape = tuple(struct.unpack("<Q", take(8, "extent"))[0] for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = take(4 * count, f"payload of {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if pos != len(view):
        raise CheckpointError(f"{len(view) - pos} trailing byte(s) after last record")
    return Checkpoint(metadata, params)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    data = checkpoint_to_bytes(ckpt)
    with open(path, "wb") as fh:
        fh.write(data)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())


# ---------------------------------------------------------------------------
# model <-> checkpoint plumbing


def _collect_params(*param_lists) -> dict[str, np.ndarray]:
    out = {}
    for params in param_lists:
        for p in params:
            out[p.name] = np.asarray(p.value, dtype=np.float32)
    return out


def embedder_from_checkpoint(ckpt: Checkpoint) -> EmbedderParams:
    md = ckpt.metadata
    params = EmbedderParams(
        Parameter("embedder.char_matrix", ckpt.params["embedder.char_matrix"].copy()), {}, {})
    for width in md["widths"]:
        params.conv_weights[width] = Parameter(
            f"embedder.conv_w{width}.weight", ckpt.params[f"embedder.conv_w{width}.weight"].copy())
        params.conv_biases[width] = Parameter(
            f"embedder.conv_w{width}.bias", ckpt.params[f"embedder.conv_w{width}.bias"].copy())
    return params


def annc_from_checkpoint(ckpt: Checkpoint) -> AnncParams:
    g = ckpt.params
    return AnncParams(*(Parameter(name, g[name].copy()) for name in (
        "annc.conv1.weight", "annc.conv1.bias", "annc.conv2.weight",
        "annc.conv2.bias", "annc.dense.weight", "annc.dense.bias")))


def annr_from_checkpoint(ckpt: Checkpoint) -> AnnrParams:
    g = ckpt.params
    return AnnrParams(*(Parameter(name, g[name].copy()) for name in (
        "annr.enc_ab.weight", "annr.enc_ab.bias", "annr.enc_ac.weight",
        "annr.enc_ac.bias", "annr.combiner.weight", "annr.combiner.bias")))


def _base_metadata(config: TrainConfig, charset: CharIndex,
                   e_params: EmbedderParams) -> dict:
    widths = list(e_params.widths)
    return {
        "format": "morphoanalogy-checkpoint",
        "tool_version": TOOL_VERSION,
        "task": config.task,
        "language": config.language,
        "seed": config.seed,
        "config": asdict(config),
        "charset": charset.to_json(),
        "char_dim": e_params.char_dim,
        "embed_dim": e_params.out_dim,
        "widths": widths,
        "filters_per_width": e_params.conv_weights[widths[0]].shape[0],
        "init_scheme": ("weights uniform(+-sqrt(1/fan_in)); biases zero; "
                        "char rows uniform(+-0.05); PAD row zero, never updated"),
        "annc_conv1_stride": [2, 1],
        "annc_conv2_stride": [2, 2],
    }


# ---------------------------------------------------------------------------
# batched form assembly


@dataclass
class FormBatch:
    """One batch of stacked form embeddings with scatter info for backward."""

    stacks: np.ndarray        # (N, 4, n)
    embed_ctx: object
    word_idx: np.ndarray      # (B, 4) into the unique-word embedding matrix
    rows: np.ndarray          # (N,) base index per form
    slot_mat: np.ndarray      # (N, 4) slot pattern per form
    unique_shape: tuple


def build_form_batch(e_params: EmbedderParams, charset: CharIndex,
                     quads: Sequence[Quadruple],
                     slot_arrays: Sequence[np.ndarray]) -> FormBatch:
    """Embed each batch word once and gather per-form (4, n) stacks."""
    unique: dict[str, int] = {}
    word_idx = np.empty((len(quads), 4), dtype=np.int64)
    for i, quad in enumerate(quads):
        for j, word in enumerate(quad):
            idx = unique.get(word)
            if idx is None:
                idx = unique[word] = len(unique)
            word_idx[i, j] = idx

    emb, embed_ctx = embed_batch(e_params, list(unique), charset)
    e4 = emb[word_idx]                                     # (B, 4, n)
    counts = [len(s) for s in slot_arrays]
    rows = np.repeat(np.arange(len(quads)), counts)
    slot_mat = np.concatenate(slot_arrays).reshape(-1, 4)
    stacks = e4[rows[:, None], slot_mat]                   # (N, 4, n)
    return FormBatch(stacks, embed_ctx, word_idx, rows, slot_mat, emb.shape)


def scatter_form_grads(e_params: EmbedderParams, batch: FormBatch,
                       dstacks: np.ndarray) -> None:
    """Route per-form stack gradients back into the embedder parameters."""
    n = dstacks.shape[-1]
    d_e4 = np.zeros((batch.word_idx.shape[0], 4, n), dtype=dstacks.dtype)
    np.add.at(d_e4, (batch.rows[:, None], batch.slot_mat), dstacks)
    d_unique = np.zeros(batch.unique_shape, dtype=dstacks.dtype)
    np.add.at(d_unique, batch.word_idx.reshape(-1), d_e4.reshape(-1, n))
    embed_batch_backward(e_params, batch.embed_ctx, d_unique)


def _batches_by_budget(order: np.ndarray, counts: np.ndarray, budget: int):
    batch, total = [], 0
    for idx in order:
        batch.append(int(idx))
        total += int(counts[idx])
        if total >= budget:
            yield batch
            batch, total = [], 0
    if batch:
        yield batch


VALID_SLOTS_ARRAY = np.array(augment.VALID_FORM_SLOTS, dtype=np.int64)


def classification_plan(quads: Sequence[Quadruple], setting: str,
                        rng: Rng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-base form slots and labels for one classifier run.

    Invalid forms are drawn once here, not per epoch, so the run seed pins
    the whole augmented dataset.
    """
    slot_arrays, label_arrays = [], []
    for q in quads:
        if setting == "8-sampled":
            invalid = augment.sample_invalid_slots(q, 8, rng)
        elif setting == "24-all":
            invalid = augment.invalid_slots_for(q)
        else:
            invalid = augment.base_invalid_slots_for(q)
        slots = np.concatenate([VALID_SLOTS_ARRAY,
                                np.array(invalid, dtype=np.int64).reshape(-1, 4)])
        labels = np.concatenate([np.ones(8, dtype=np.float32),
                                 np.zeros(len(invalid), dtype=np.float32)])
        slot_arrays.append(slots)
        label_arrays.append(labels)
    return slot_arrays, label_arrays


# ---------------------------------------------------------------------------
# training loops


def train_classifier(train_quads: Sequence[Quadruple], config: TrainConfig,
                     rng: Optional[Rng] = None, log=None) -> Checkpoint:
    """Train embedder + classifier on augmented quadruples; returns a checkpoint."""
    config = replace(config, task="classification")
    config.validate()
    if not train_quads:
        raise TrainingError("empty training set")
    rng = rng if rng is not None else Rng(config.seed)

    charset = build_charset(quadruple_words(train_quads))
    e_params = init_embedder(charset, config.char_dim, rng.stream("init-embedder"))
    c_params = init_annc(e_params.out_dim, rng.stream("init-annc"))
    params = e_params.parameters() + c_params.parameters()

    slot_arrays, label_arrays = classification_plan(
        train_quads, config.invalid_setting, rng.stream("invalid-sample"))
    counts = np.array([len(s) for s in slot_arrays])

    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.stream(f"epoch-{epoch}").permutation(len(train_quads))
        epoch_loss, epoch_correct, epoch_count = 0.0, 0, 0
        for batch_no, base_idx in enumerate(_batches_by_budget(order, counts, config.batch_size)):
            quads = [train_quads[i] for i in base_idx]
            slots = [slot_arrays[i] for i in base_idx]
            labels = np.concatenate([label_arrays[i] for i in base_idx])
            try:
                batch = build_form_batch(e_params, charset, quads, slots)
                scores, annc_ctx = annc_forward(c_params, batch.stacks)
                losses, bce_ctx = bce_loss(labels, scores)
                loss = float(np.mean(losses, dtype=np.float64))
                if not np.isfinite(loss):
                    raise NumericError(f"batch mean loss is {loss}")
                dscores = bce_loss_backward(
                    bce_ctx, np.full(len(labels), 1.0 / len(labels), dtype=np.float32))
                dstacks = annc_backward(c_params, annc_ctx, dscores)
                scatter_form_grads(e_params, batch, dstacks)
            except NumericError as exc:
                raise TrainingError(
                    f"non-finite value at epoch {epoch} batch {batch_no} "
                    f"(lr={config.lr}, seed={config.seed}): {exc}") from exc
            adam_step(params, config.lr)
            zero_grads(params)
            epoch_loss += loss * len(labels)
            epoch_correct += int(((scores >= 0.5) == (labels >= 0.5)).sum())
            epoch_count += len(labels)
        stats = {"epoch": epoch,
                 "loss": epoch_loss / epoch_count,
                 "accuracy": epoch_correct / epoch_count}
        history.append(stats)
        if log is not None:
            log(stats)

    metadata = _base_metadata(config, charset, e_params)
    metadata["history"] = history
    return Checkpoint(metadata, _collect_params(e_params.parameters(), c_params.parameters()))


def train_regressor(train_quads: Sequence[Quadruple], config: TrainConfig,
                    init_from: Checkpoint, rng: Optional[Rng] = None,
                    log=None) -> Checkpoint:
    """Train the regressor on valid forms only, embedder warm-started and frozen.

    The embedder comes from ``init_from`` (a classifier checkpoint for the
    same language); its parameters stay bitwise untouched through the first
    ``config.freeze_epochs`` epochs and train afterwards.
    """
    config = replace(config, task="regression")
    config.validate()
    if not train_quads:
        raise TrainingError("empty training set")
    if init_from.task != "classification":
        raise TrainingError(
            f"init_from must be a classifier checkpoint, got task={init_from.task!r}")
    rng = rng if rng is not None else Rng(config.seed)

    charset = init_from.charset()
    missing = sorted({ch for q in train_quads for w in q for ch in w if ch not in charset})
    if missing:
        raise TrainingError(
            "charset mismatch with init_from: training words use characters "
            f"unknown to the checkpoint: {''.join(missing)!r}")

    e_params = embedder_from_checkpoint(init_from)
    r_params = init_annr(e_params.out_dim, rng.stream("init-annr"))
    valid_slots = [VALID_SLOTS_ARRAY] * 1  # shared per-base pattern

    counts = np.full(len(train_quads), len(VALID_SLOTS_ARRAY))
    history = []
    for epoch in range(1, config.epochs + 1):
        frozen = epoch <= config.freeze_epochs
        trainable = r_params.parameters() if frozen else (
            e_params.parameters() + r_params.parameters())
        order = rng.stream(f"epoch-{epoch}").permutation(len(train_quads))
        epoch_loss, epoch_count = 0.0, 0
        for batch_no, base_idx in enumerate(_batches_by_budget(order, counts, config.batch_size)):
            quads = [train_quads[i] for i in base_idx]
            slots = valid_slots * len(quads)
            try:
                batch = build_form_batch(e_params, charset, quads, slots)
                ea, eb, ec, ed = (batch.stacks[:, i, :] for i in range(4))
                pred, annr_ctx = annr_forward(r_params, ea, eb, ec)
                losses, loss_ctx = ratio_loss(ea, eb, ec, ed, pred)
                loss = float(np.mean(losses, dtype=np.float64))
                if not np.isfinite(loss):
                    raise NumericError(f"batch mean loss is {loss}")
                dmean = np.full(len(losses), 1.0 / len(losses), dtype=np.float32)
                da, db, dc, dd, dpred = ratio_loss_backward(loss_ctx, dmean)
                ra, rb, rc = annr_backward(r_params, annr_ctx, dpred)
                if not frozen:
                    dstacks = np.stack([da + ra, db + rb, dc + rc, dd], axis=1)
                    scatter_form_grads(e_params, batch, dstacks)
            except NumericError as exc:
                raise TrainingError(
                    f"non-finite value at epoch {epoch} batch {batch_no} "
                    f"(lr={config.lr}, seed={config.seed}): {exc}") from exc
            adam_step(trainable, config.lr)
            zero_grads(trainable)
            epoch_loss += loss * len(losses)
            epoch_count += len(losses)
        stats = {"epoch": epoch, "loss": epoch_loss / epoch_count, "frozen": frozen}
        history.append(stats)
        if log is not None:
            log(stats)

    metadata = _base_metadata(config, charset, e_params)
    metadata["history"] = history
    metadata["init_from"] = {"task": init_from.task,
                             "language": init_from.metadata.get("language", ""),
                             "seed": init_from.metadata.get("seed")}
    return Checkpoint(metadata, _collect_params(e_params.parameters(), r_params.parameters()))
