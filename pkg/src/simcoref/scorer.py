"""Mention scoring, top-λn pruning and pairwise antecedent scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .spans import Span


class FFNN(nn.Module):
    """ReLU feedforward network with a scalar linear output."""

    def __init__(
        self,
        in_dim: int,
        hidden: int = 32,
        depth: int = 2,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        dims = [in_dim] + [hidden] * depth + [1]
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=torch.float64) for a, b in zip(dims[:-1], dims[1:])
        )
        with torch.no_grad():
            for layer in self.layers:
                bound = 1.0 / math.sqrt(layer.in_features)
                for p in (layer.weight, layer.bias):
                    p.copy_((torch.rand(p.shape, generator=generator, dtype=p.dtype) * 2 - 1) * bound)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers[:-1]:
            x = torch.relu(layer(x))
        return self.layers[-1](x)


def mention_score(g: torch.Tensor, ffnn_m: nn.Module) -> torch.Tensor:
    """Score(s) for one span representation or a stack of them."""
    return ffnn_m(g).squeeze(-1)


def keep_count(n: int, lam: float) -> int:
    if not 0 < lam <= 1:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    # round away float noise such as 0.1 * 30 = 3.0000000000000004
    return math.ceil(round(lam * n, 9))


@dataclass
class PrunedSet:
    spans: list[Span]
    scores: torch.Tensor
    indices: list[int]
    """Positions of the kept spans in the candidate list."""
    lam: float


def prune(
    spans: Sequence[Span],
    scores: torch.Tensor | Sequence[float],
    n: int,
    lam: float,
    keep: Sequence[int] | None = None,
) -> PrunedSet:
    """Keep the ``ceil(lam * n)`` best spans, earlier spans winning ties.

    ``spans`` must be in span order. ``keep`` overrides the selection, which
    lets a caller replay a fixed choice.
    """
    if not isinstance(scores, torch.Tensor):
        scores = torch.as_tensor(scores, dtype=torch.float64)
    if keep is None:
        k = min(keep_count(n, lam), len(spans))
        values = scores.detach().tolist()
        ranked = sorted(range(len(spans)), key=lambda i: (-values[i], i))
        keep = sorted(ranked[:k])
    else:
        keep = sorted(keep)
    index = torch.tensor(keep, dtype=torch.long)
    return PrunedSet([spans[i] for i in keep], scores[index], list(keep), lam)


def antecedent_score(g_i: torch.Tensor, g_j: torch.Tensor, ffnn_a: nn.Module) -> torch.Tensor:
    return ffnn_a(torch.cat([g_i, g_j, g_i * g_j], dim=-1)).squeeze(-1)


def coref_score(i: int, j: int | None, s_m: Sequence[float], s_a) -> float:
    """Three-term pair score; ``j=None`` is the dummy antecedent, fixed at 0.

    ``s_a`` is either the precomputed pair score or a matrix indexed
    ``s_a[i][j]``.
    """
    if j is None:
        return 0.0
    if not 0 <= j < i:
        raise ValueError(f"antecedent {j} does not precede span {i}")
    pair = s_a if isinstance(s_a, (int, float)) else s_a[i][j]
    return s_m[i] + s_m[j] + pair


@dataclass
class AntecedentScores:
    """Score matrix over ``Y(i)``.

    ``logits[i, 0]`` is the dummy antecedent (exactly 0); ``logits[i, j + 1]``
    is ``s(i, j)`` for ``j < i`` and ``-inf`` otherwise.
    """

    logits: torch.Tensor
    pair_scores: torch.Tensor

    def __len__(self) -> int:
        return self.logits.shape[0]

    def candidates(self, i: int) -> list[int]:
        row = self.logits[i, 1:]
        return [j for j in range(i) if math.isfinite(row[j].item())]

    def score(self, i: int, j: int | None) -> float:
        return 0.0 if j is None else self.logits[i, j + 1].item()

    def probabilities(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=1)


def antecedent_mask(k: int, max_antecedents: int | None = None) -> torch.Tensor:
    i = torch.arange(k)[:, None]
    j = torch.arange(k)[None, :]
    mask = j < i
    if max_antecedents is not None:
        mask &= j >= i - max_antecedents
    return mask


def score_antecedents(
    g: torch.Tensor,
    s_m: torch.Tensor,
    ffnn_a: nn.Module,
    max_antecedents: int | None = None,
) -> AntecedentScores:
    """All pair scores for the pruned spans ``g`` (k, 3d) with mention scores ``s_m``."""
    k = g.shape[0]
    gi = g[:, None, :].expand(k, k, g.shape[1])
    gj = g[None, :, :].expand(k, k, g.shape[1])
    pair = antecedent_score(gi, gj, ffnn_a)
    full = s_m[:, None] + s_m[None, :] + pair
    full = full.masked_fill(~antecedent_mask(k, max_antecedents), float("-inf"))
    dummy = full.new_zeros((k, 1))
    return AntecedentScores(torch.cat([dummy, full], dim=1), pair)
