"""Losses, the two-phase training procedure and checkpoints."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

from .corpus import Document
from .model import CorefModel, DocumentScores, ModelConfig
from .scorer import AntecedentScores, PrunedSet
from .spans import Span

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "simcoref-checkpoint"
CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-12


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.25
    max_width: int = 10
    lr_encoder: float = 1e-2
    lr_head: float = 1e-2
    lr_decay: float = 0.999
    epochs: int = 100
    pretrain_epochs: int = 100
    seed: int = 0
    max_antecedents: int | None = None
    detect_scope: str = "all"
    """``"pruned"`` scores the detection loss over the kept spans only;
    ``"all"`` over every candidate."""

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")
        if self.max_width < 1:
            raise ValueError(f"max_width must be >= 1, got {self.max_width}")
        if self.lr_encoder <= 0 or self.lr_head <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValueError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.detect_scope not in ("pruned", "all"):
            raise ValueError(f"detect_scope must be 'pruned' or 'all', got {self.detect_scope!r}")

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: f.type for f in fields(cls)}


# ---------------------------------------------------------------- losses


def detection_loss(scores: torch.Tensor | PrunedSet, labels: Sequence[float] | torch.Tensor) -> torch.Tensor:
    """Summed binary cross-entropy of ``sigmoid(scores)`` against 0/1 labels."""
    if isinstance(scores, PrunedSet):
        scores = scores.scores
    y = torch.as_tensor(labels, dtype=scores.dtype)
    p = torch.sigmoid(scores).clamp(PROB_FLOOR, 1 - PROB_FLOOR)
    return -(y * torch.log(p) + (1 - y) * torch.log(1 - p)).sum()


def mention_labels(spans: Sequence[Span], gold_mentions: set[Span]) -> list[float]:
    return [1.0 if s in gold_mentions else 0.0 for s in spans]


def gold_antecedent_mask(
    spans: Sequence[Span],
    clusters: Sequence[Sequence[Span]],
    admissible: torch.Tensor | None = None,
) -> torch.Tensor:
    """Boolean (k, k+1) mask of ``Y(i) ∩ GOLD(i)``; column 0 is the dummy.

    ``admissible`` marks ``Y(i)`` when an antecedent cap narrows it. Spans
    left without a gold antecedent fall back to the dummy.
    """
    cluster_of = {m: c for c, cluster in enumerate(clusters) for m in cluster}
    k = len(spans)
    mask = torch.zeros((k, k + 1), dtype=torch.bool)
    for i, s in enumerate(spans):
        c = cluster_of.get(s)
        if c is not None:
            for j in range(i):
                if cluster_of.get(spans[j]) == c:
                    mask[i, j + 1] = True
    if admissible is not None:
        mask &= admissible
    mask[:, 0] = ~mask[:, 1:].any(dim=1)
    return mask


def marginal_loss(scores: AntecedentScores, clusters: Sequence[Sequence[Span]], pruned: PrunedSet) -> torch.Tensor:
    """``-Σ_i log Σ_{y ∈ Y(i) ∩ GOLD(i)} P(y)`` over the kept spans."""
    logits = scores.logits
    gold = gold_antecedent_mask(pruned.spans, clusters, torch.isfinite(logits.detach()))
    assert bool(gold.any(dim=1).all()), "a span has no admissible gold antecedent"
    gold_logits = logits.masked_fill(~gold, float("-inf"))
    per_span = torch.logsumexp(logits, dim=1) - torch.logsumexp(gold_logits, dim=1)
    return per_span.clamp_min(0.0).sum()


# ---------------------------------------------------------------- model helpers


def run_document(model: CorefModel, doc: Document, config: TrainConfig, keep=None) -> DocumentScores:
    return model(doc, config.max_width, config.lam, config.max_antecedents, keep=keep)


def document_losses(out: DocumentScores, doc: Document, config: TrainConfig) -> tuple[torch.Tensor, torch.Tensor]:
    """(detection loss, marginal loss) for one forward pass."""
    gold = doc.gold_mentions
    if config.detect_scope == "all":
        det = detection_loss(out.mention_scores, mention_labels(out.candidates, gold))
    else:
        det = detection_loss(out.pruned, mention_labels(out.pruned.spans, gold))
    mar = marginal_loss(out.antecedents, doc.clusters, out.pruned)
    return det, mar


def _check_gradients(model: CorefModel, context: str) -> None:
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise TrainingError(f"non-finite gradient for {name} ({context})")


def _sgd_step(model: CorefModel, lr_encoder: float, lr_head: float) -> None:
    encoder, head = model.parameter_groups()
    with torch.no_grad():
        for group, lr in ((encoder, lr_encoder), (head, lr_head)):
            for p in group:
                if p.grad is not None:
                    p -= lr * p.grad
                    p.grad = None


EpochCallback = Callable[[str, int, float, float, float], None]


def _run_phase(
    phase: str,
    model: CorefModel,
    docs: Sequence[Document],
    config: TrainConfig,
    epochs: int,
    objective: Callable[[DocumentScores, Document], torch.Tensor],
    callback: EpochCallback | None,
) -> CorefModel:
    if not docs and epochs:
        raise TrainingError("no training documents")
    lr_enc, lr_head = config.lr_encoder, config.lr_head
    for epoch in range(epochs):
        total = 0.0
        for doc in docs:
            out = run_document(model, doc, config)
            loss = objective(out, doc)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite {phase} loss at epoch {epoch}, document {doc.doc_key}")
            loss.backward()
            _check_gradients(model, f"{phase} epoch {epoch}, document {doc.doc_key}")
            _sgd_step(model, lr_enc, lr_head)
            total += value
        log.info("epoch=%d phase=%s loss=%.6f lr_encoder=%.6g lr_head=%.6g", epoch, phase, total, lr_enc, lr_head)
        if callback is not None:
            callback(phase, epoch, total, lr_enc, lr_head)
        lr_enc *= config.lr_decay
        lr_head *= config.lr_decay
    return model


def pretrain_mentions(
    docs: Sequence[Document],
    config: TrainConfig,
    init: CorefModel | None = None,
    model_config: ModelConfig | None = None,
    callback: EpochCallback | None = None,
) -> CorefModel:
    """Fit the mention scorer alone on the detection loss.

    Returns a new model; ``init`` is left untouched.
    """
    torch.manual_seed(config.seed)
    model = copy.deepcopy(init) if init is not None else CorefModel(model_config)

    def objective(out, doc):
        return document_losses(out, doc, config)[0]

    return _run_phase("pretrain", model, docs, config, config.pretrain_epochs, objective, callback)


def train(
    docs: Sequence[Document],
    config: TrainConfig,
    init: CorefModel,
    callback: EpochCallback | None = None,
) -> CorefModel:
    """Jointly train every parameter on the marginal antecedent likelihood."""
    torch.manual_seed(config.seed)
    model = copy.deepcopy(init)

    def objective(out, doc):
        return document_losses(out, doc, config)[1]

    return _run_phase("train", model, docs, config, config.epochs, objective, callback)


# ---------------------------------------------------------------- inference


@dataclass
class Prediction:
    doc_key: str
    clusters: list[tuple[Span, ...]]
    proposed: list[Span]


def predict(model: CorefModel, docs: Iterable[Document], config: TrainConfig) -> list[Prediction]:
    from .decode import decode

    preds = []
    with torch.no_grad():
        for doc in docs:
            out = run_document(model, doc, config)
            preds.append(Prediction(doc.doc_key, decode(out.antecedents, out.pruned.spans), out.pruned.spans))
    return preds


# ---------------------------------------------------------------- checkpoints


def parameter_arrays(model: CorefModel) -> dict[str, np.ndarray]:
    return {name: p.detach().cpu().numpy().copy() for name, p in model.named_parameters()}


def save_checkpoint(model: CorefModel, path: str | Path, train_config: TrainConfig | None = None) -> None:
    arrays = parameter_arrays(model)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "train_config": asdict(train_config) if train_config is not None else None,
        "seed": model.config.encoder.seed,
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "dtype": "float64",
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def read_checkpoint_meta(path: str | Path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data.files:
            raise CheckpointError(f"{path}: missing metadata record")
        meta = json.loads(str(data["__meta__"]))
    if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {meta.get('format')} v{meta.get('version')}")
    return meta


def load_checkpoint(path: str | Path, config: ModelConfig | None = None) -> CorefModel:
    """Rebuild the model stored at ``path``.

    With ``config`` given, the stored arrays must match its shapes.
    """
    meta = read_checkpoint_meta(path)
    model = CorefModel(config or ModelConfig.from_dict(meta["model_config"]))
    expected = dict(model.named_parameters())
    with np.load(path, allow_pickle=False) as data:
        stored = {k: data[k] for k in data.files if k != "__meta__"}
    for name in expected:
        if name not in stored:
            raise CheckpointError(f"{path}: missing array {name}")
    for name in stored:
        if name not in expected:
            raise CheckpointError(f"{path}: unexpected array {name}")
    with torch.no_grad():
        for name, p in expected.items():
            arr = stored[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"{path}: array {name} has shape {tuple(arr.shape)}, model expects {tuple(p.shape)}"
                )
            if arr.dtype != np.float64:
                raise CheckpointError(f"{path}: array {name} has dtype {arr.dtype}, expected float64")
            p.copy_(torch.from_numpy(arr))
    return model


def checkpoint_train_config(path: str | Path) -> TrainConfig | None:
    stored = read_checkpoint_meta(path).get("train_config")
    return TrainConfig(**stored) if stored else None
