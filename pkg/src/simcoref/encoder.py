"""Token encoder contract with overlapping segmentation and max-context merging.

The bundled :class:`ToyEncoder` is a small trainable stand-in for a
pretrained transformer: hashed embeddings followed by one local mixing
layer. Any module mapping a :class:`~simcoref.corpus.Document` to an
``(n, d)`` float64 tensor can replace it.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 16
    max_segment: int = 64
    vocab_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.max_segment < 2 or self.max_segment % 2:
            raise ValueError(f"max_segment must be an even integer >= 2, got {self.max_segment}")
        if self.vocab_size < 1:
            raise ValueError(f"vocab_size must be positive, got {self.vocab_size}")


def segment(n: int, window: int) -> list[tuple[int, int]]:
    """Half-open windows of ``window`` tokens taken every ``window // 2`` tokens.

    A window is only emitted if it reaches a token no earlier window covers.
    """
    if n < 1 or window < 2 or window % 2:
        raise ValueError(f"need n >= 1 and an even window >= 2, got n={n}, window={window}")
    stride = window // 2
    segments = []
    covered = 0
    start = 0
    while covered < n:
        end = min(start + window, n)
        if end > covered:
            segments.append((start, end))
            covered = end
        start += stride
    return segments


def token_context(position: int, seg: tuple[int, int]) -> int:
    start, end = seg
    return min(position - start, end - 1 - position)


def max_context_owners(n: int, segments: Sequence[tuple[int, int]]) -> list[int]:
    """Index of the segment each token is read from (earliest wins ties)."""
    owners = [-1] * n
    best = [-1] * n
    for k, seg in enumerate(segments):
        for t in range(seg[0], seg[1]):
            ctx = token_context(t, seg)
            if ctx > best[t]:
                best[t], owners[t] = ctx, k
    if -1 in owners:
        raise ValueError(f"token {owners.index(-1)} is not covered by any segment")
    return owners


def merge_max_context(
    segment_vectors: Sequence[torch.Tensor], segments: Sequence[tuple[int, int]]
) -> torch.Tensor:
    if len(segment_vectors) != len(segments):
        raise RuntimeError(f"{len(segment_vectors)} segment outputs for {len(segments)} segments")
    for vecs, (start, end) in zip(segment_vectors, segments):
        if vecs.shape[0] != end - start:
            raise RuntimeError(
                f"segment ({start},{end}) produced {vecs.shape[0]} vectors, expected {end - start}"
            )
    n = max(end for _, end in segments)
    owners = max_context_owners(n, segments)
    pieces = []
    t = 0
    while t < n:
        k = owners[t]
        u = t
        while u < n and owners[u] == k:
            u += 1
        start = segments[k][0]
        pieces.append(segment_vectors[k][t - start : u - start])
        t = u
    return torch.cat(pieces, dim=0)


def token_hash(text: str, vocab_size: int) -> int:
    return zlib.crc32(text.encode("utf-8")) % vocab_size


class ToyEncoder(nn.Module):
    """``x_t = tanh(A · mean(e_{t-1}, e_t, e_{t+1}) + b)`` within each segment."""

    def __init__(self, config: EncoderConfig, generator: torch.Generator | None = None):
        super().__init__()
        self.config = config
        if generator is None:
            generator = torch.Generator().manual_seed(config.seed)
        d, v = config.dim, config.vocab_size
        bound = 1.0 / d**0.5
        self.embedding = nn.Parameter(torch.randn(v, d, generator=generator, dtype=torch.float64))
        self.mix_weight = nn.Parameter(
            (torch.rand(d, d, generator=generator, dtype=torch.float64) * 2 - 1) * bound
        )
        self.mix_bias = nn.Parameter(
            (torch.rand(d, generator=generator, dtype=torch.float64) * 2 - 1) * bound
        )

    def token_ids(self, tokens: Sequence[str]) -> torch.Tensor:
        return torch.tensor([token_hash(t, self.config.vocab_size) for t in tokens], dtype=torch.long)

    def encode_segment(self, ids: torch.Tensor) -> torch.Tensor:
        e = self.embedding[ids]
        pad = e.new_zeros((1, e.shape[1]))
        total = e + torch.cat([pad, e[:-1]]) + torch.cat([e[1:], pad])
        counts = torch.full((len(ids),), 3.0, dtype=e.dtype)
        counts[0] -= 1
        counts[-1] -= 1
        if len(ids) == 1:
            counts[0] = 1.0
        mean = total / counts[:, None]
        return torch.tanh(mean @ self.mix_weight.T + self.mix_bias)

    def forward(self, tokens: Sequence[str]) -> torch.Tensor:
        ids = self.token_ids(tokens)
        segments = segment(len(ids), self.config.max_segment)
        outputs = [self.encode_segment(ids[s:e]) for s, e in segments]
        return merge_max_context(outputs, segments)


def encode(doc, encoder: nn.Module) -> torch.Tensor:
    """Token vectors ``(n, d)`` for ``doc``."""
    return encoder([t.text for t in doc.tokens])
