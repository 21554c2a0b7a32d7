"""Desk-scale speaker classifier: a linear feature transform trained with
softmax cross-entropy, used as the evaluation model and as the stage-1
similarity space for nearest-neighbour source selection.

The model scores logits C @ (A @ x). A starts at the identity and C at a
small seeded Gaussian; plain mini-batch SGD with seeded shuffling makes
training bit-reproducible for fixed inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TrainError
from .records import UtteranceRecord, atomic_write_bytes
from .scenarios import Scenario
from .seeding import substream
from .store import EmbeddingStore

VCAM_MAGIC = b"VCAM"
VCAM_VERSION = 1

_HEADER = struct.Struct("<4sIII")
_U32 = struct.Struct("<I")

PHI_TRAINED = "trained"
PHI_IDENTITY = "identity"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch: int = 64
    lr: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0:
            raise TrainError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch < 1:
            raise TrainError(f"batch must be >= 1, got {self.batch}")
        if not self.lr > 0 or not np.isfinite(self.lr):
            raise TrainError(f"lr must be positive and finite, got {self.lr}")


@dataclass
class LinearSpeakerModel:
    A: np.ndarray                      # d x d feature transform
    C: np.ndarray                      # n_classes x d class weights
    class_index: dict[str, int]
    loss_history: list[float] = field(default_factory=list, compare=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise TrainError(f"A must be square, got shape {self.A.shape}")
        if self.C.ndim != 2 or self.C.shape[1] != self.A.shape[1]:
            raise TrainError(f"C shape {self.C.shape} inconsistent with A {self.A.shape}")
        if not np.all(np.isfinite(self.A)) or not np.all(np.isfinite(self.C)):
            raise TrainError("model weights contain non-finite values")
        if sorted(self.class_index.values()) != list(range(self.C.shape[0])):
            raise TrainError("class_index is not a bijection onto the rows of C")


def identity_model(dim: int) -> LinearSpeakerModel:
    """An untrained pass-through model: embed(x) = x."""
    return LinearSpeakerModel(
        A=np.eye(dim, dtype=np.float64),
        C=np.empty((0, dim), dtype=np.float64),
        class_index={},
    )


def embed(model: LinearSpeakerModel, x) -> np.ndarray:
    """A @ x, the model's feature for one utterance embedding."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (model.dim,):
        raise TrainError(f"embed: vector shape {vec.shape} does not match model dim {model.dim}")
    return model.A @ vec


def loss_and_grads(
    A: np.ndarray, C: np.ndarray, X: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy of logits C(AX^T) and its gradients.

    Returns (loss, dL/dA, dL/dC) averaged over the batch.
    """
    n = X.shape[0]
    Z = X @ A.T                           # n x d
    logits = Z @ C.T                      # n x n_classes
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    probs = expl / expl.sum(axis=1, keepdims=True)
    idx = np.arange(n)
    loss = float(-np.mean(np.log(probs[idx, y])))
    G = probs.copy()
    G[idx, y] -= 1.0
    G /= n
    grad_C = G.T @ Z                      # n_classes x d
    grad_Z = G @ C                        # n x d
    grad_A = grad_Z.T @ X                 # d x d
    return loss, grad_A, grad_C


def _dataset(records: list[UtteranceRecord], store: EmbeddingStore):
    recs = sorted(records, key=lambda r: r.utt_id)
    for rec in recs:
        if rec.speaker_id is None:
            raise TrainError(f"unlabelled record {rec.utt_id!r} cannot enter training")
        if rec.utt_id not in store:
            raise TrainError(f"missing embedding for record {rec.utt_id!r}")
    speakers = sorted({rec.speaker_id for rec in recs})
    class_index = {spk: i for i, spk in enumerate(speakers)}
    X = store.matrix([rec.utt_id for rec in recs])
    y = np.array([class_index[rec.speaker_id] for rec in recs], dtype=np.int64)
    return X, y, class_index


def train(
    records: list[UtteranceRecord], store: EmbeddingStore, cfg: TrainConfig
) -> LinearSpeakerModel:
    """Fit the classifier on labelled records; deterministic in cfg.seed.

    Records are canonicalized by utt_id before shuffling, so the result does
    not depend on input order. loss_history holds the full-dataset loss
    before training and after each epoch.
    """
    cfg.validate()
    if not records:
        raise TrainError("empty training set")
    X, y, class_index = _dataset(records, store)
    if len(class_index) < 2:
        raise TrainError(f"training requires >= 2 speakers, got {len(class_index)}")
    n, d = X.shape
    A = np.eye(d, dtype=np.float64)
    C = 0.01 * substream(cfg.seed, "init-C").standard_normal((len(class_index), d))
    history = [loss_and_grads(A, C, X, y)[0]]
    for epoch in range(cfg.epochs):
        perm = substream(cfg.seed, "shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch):
            sel = perm[start : start + cfg.batch]
            _, grad_A, grad_C = loss_and_grads(A, C, X[sel], y[sel])
            A -= cfg.lr * grad_A
            C -= cfg.lr * grad_C
        history.append(loss_and_grads(A, C, X, y)[0])
    model = LinearSpeakerModel(A=A, C=C, class_index=class_index, loss_history=history)
    model.validate()
    return model


def train_phi(
    scenario: Scenario, store: EmbeddingStore, cfg: TrainConfig, phi: str = PHI_TRAINED
) -> LinearSpeakerModel:
    """Stage-1 model trained on the scenario's labelled records only."""
    if phi == PHI_IDENTITY:
        return identity_model(store.dim)
    if phi != PHI_TRAINED:
        raise TrainError(f"unknown phi mode {phi!r}")
    labelled = scenario.labelled_records()
    if not labelled:
        raise TrainError("scenario has no labelled records to train on")
    return train(labelled, store, cfg)


def transform_store(
    model: LinearSpeakerModel, store: EmbeddingStore, utt_ids: list[str] | None = None
) -> EmbeddingStore:
    """New store holding embed(model, x) for each requested utterance."""
    ids = sorted(set(utt_ids)) if utt_ids is not None else store.ids()
    out = EmbeddingStore(model.dim)
    for utt_id in ids:
        out.add(utt_id, embed(model, store.get(utt_id)))
    return out


def training_accuracy(
    model: LinearSpeakerModel, records: list[UtteranceRecord], store: EmbeddingStore
) -> float:
    X, y, class_index = _dataset(records, store)
    if class_index != model.class_index:
        raise TrainError("records do not match the model's class table")
    logits = (X @ model.A.T) @ model.C.T
    return float(np.mean(np.argmax(logits, axis=1) == y))


def save_model(model: LinearSpeakerModel, path: str | Path) -> None:
    """Checkpoint: header, row-major float64 A then C, then the class table."""
    model.validate()
    n_classes = model.C.shape[0]
    chunks = [_HEADER.pack(VCAM_MAGIC, VCAM_VERSION, model.dim, n_classes)]
    chunks.append(np.ascontiguousarray(model.A, dtype="<f8").tobytes())
    chunks.append(np.ascontiguousarray(model.C, dtype="<f8").tobytes())
    by_row = {row: spk for spk, row in model.class_index.items()}
    for row in range(n_classes):
        id_bytes = by_row[row].encode("utf-8")
        chunks.append(_U32.pack(len(id_bytes)))
        chunks.append(id_bytes)
    atomic_write_bytes(path, b"".join(chunks))


def load_model(path: str | Path) -> LinearSpeakerModel:
    payload = Path(path).read_bytes()
    if len(payload) < _HEADER.size:
        raise TrainError(f"{path}: truncated header")
    magic, version, dim, n_classes = _HEADER.unpack_from(payload, 0)
    if magic != VCAM_MAGIC:
        raise TrainError(f"{path}: bad magic {magic!r}")
    if version != VCAM_VERSION:
        raise TrainError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise TrainError(f"{path}: invalid dim {dim}")
    offset = _HEADER.size
    a_bytes = 8 * dim * dim
    c_bytes = 8 * n_classes * dim
    if len(payload) < offset + a_bytes + c_bytes:
        raise TrainError(f"{path}: truncated weights")
    A = np.frombuffer(payload, dtype="<f8", count=dim * dim, offset=offset).reshape(dim, dim).copy()
    offset += a_bytes
    C = np.frombuffer(payload, dtype="<f8", count=n_classes * dim, offset=offset).reshape(
        n_classes, dim
    ).copy()
    offset += c_bytes
    class_index: dict[str, int] = {}
    for row in range(n_classes):
        if offset + 4 > len(payload):
            raise TrainError(f"{path}: truncated class table at row {row}")
        (id_len,) = _U32.unpack_from(payload, offset)
        offset += 4
        if offset + id_len > len(payload):
            raise TrainError(f"{path}: truncated class table at row {row}")
        spk = payload[offset : offset + id_len].decode("utf-8")
        offset += id_len
        if spk in class_index:
            raise TrainError(f"{path}: duplicate class id {spk!r}")
        class_index[spk] = row
    if offset != len(payload):
        raise TrainError(f"{path}: {len(payload) - offset} trailing bytes")
    model = LinearSpeakerModel(A=A, C=C, class_index=class_index)
    model.validate()
    return model
