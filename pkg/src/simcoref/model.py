"""The full scoring network: encoder, span pooling, mention and pair scorers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import torch
from torch import nn

from .corpus import Document
from .encoder import EncoderConfig, ToyEncoder, encode
from .scorer import FFNN, AntecedentScores, PrunedSet, mention_score, prune, score_antecedents
from .spans import Span, enumerate_spans, span_representations

ENCODER_PREFIX = "encoder."


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hidden: int = 32
    depth: int = 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> ModelConfig:
        obj = dict(obj)
        obj["encoder"] = EncoderConfig(**obj.get("encoder", {}))
        return cls(**obj)


@dataclass
class DocumentScores:
    candidates: list[Span]
    mention_scores: torch.Tensor
    pruned: PrunedSet
    antecedents: AntecedentScores


class CorefModel(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config = config or ModelConfig()
        generator = torch.Generator().manual_seed(config.encoder.seed)
        d = config.encoder.dim
        self.encoder = ToyEncoder(config.encoder, generator)
        self.ffnn_alpha = FFNN(d, config.hidden, config.depth, generator)
        self.ffnn_m = FFNN(3 * d, config.hidden, config.depth, generator)
        self.ffnn_a = FFNN(9 * d, config.hidden, config.depth, generator)

    def parameter_groups(self) -> tuple[list[nn.Parameter], list[nn.Parameter]]:
        """(encoder parameters, head parameters)."""
        enc, head = [], []
        for name, p in self.named_parameters():
            (enc if name.startswith(ENCODER_PREFIX) else head).append(p)
        return enc, head

    def forward(
        self,
        doc: Document,
        max_width: int,
        lam: float,
        max_antecedents: int | None = None,
        keep: Sequence[int] | None = None,
    ) -> DocumentScores:
        x = encode(doc, self.encoder)
        candidates = enumerate_spans(doc, max_width)
        g = span_representations(x, candidates, self.ffnn_alpha)
        scores = mention_score(g, self.ffnn_m)
        pruned = prune(candidates, scores, doc.n, lam, keep=keep)
        g_kept = g[torch.tensor(pruned.indices, dtype=torch.long)]
        antecedents = score_antecedents(g_kept, pruned.scores, self.ffnn_a, max_antecedents)
        return DocumentScores(candidates, scores, pruned, antecedents)
