"""Central finite-difference check of the autograd gradients.

The span selection made by pruning is recorded on the unperturbed pass and
replayed for every perturbed evaluation, so the check covers exactly the
differentiable part of the objective.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from .corpus import Document
from .learning import TrainConfig, document_losses, run_document
from .model import CorefModel


def total_loss(model: CorefModel, docs: Sequence[Document], config: TrainConfig, keeps=None):
    """Sum of detection and marginal losses; returns ``(loss, keeps)``."""
    loss = 0.0
    chosen = []
    for k, doc in enumerate(docs):
        out = run_document(model, doc, config, keep=None if keeps is None else keeps[k])
        det, mar = document_losses(out, doc, config)
        loss = loss + det + mar
        chosen.append(out.pruned.indices)
    return loss, chosen


def analytic_gradients(model: CorefModel, docs, config) -> tuple[dict[str, np.ndarray], list]:
    model.zero_grad(set_to_none=True)
    loss, keeps = total_loss(model, docs, config)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        grads[name] = g.detach().numpy().copy()
    model.zero_grad(set_to_none=True)
    return grads, keeps


def numerical_gradients(
    model: CorefModel, docs, config, keeps, step: float = 1e-5, names: Sequence[str] | None = None
) -> dict[str, np.ndarray]:
    grads = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            if names is not None and name not in names:
                continue
            flat = p.view(-1)
            out = np.zeros(flat.numel())
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + step
                up = float(total_loss(model, docs, config, keeps)[0])
                flat[i] = orig - step
                down = float(total_loss(model, docs, config, keeps)[0])
                flat[i] = orig
                out[i] = (up - down) / (2 * step)
            grads[name] = out.reshape(tuple(p.shape))
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def gradient_check(model: CorefModel, docs, config, step: float = 1e-5, floor: float = 1e-6) -> dict[str, float]:
    """Max relative error per parameter array."""
    analytic, keeps = analytic_gradients(model, docs, config)
    numeric = numerical_gradients(model, docs, config, keeps, step)
    return {name: float(relative_error(analytic[name], numeric[name], floor).max()) for name in analytic}
