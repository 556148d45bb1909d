"""Candidate span enumeration and attention-pooled span representations."""

from __future__ import annotations

from typing import TYPE_CHECKING, Callable, NamedTuple, Sequence

import torch

if TYPE_CHECKING:
    from .corpus import Document


class Span(NamedTuple):
    """Inclusive token range.

    Tuple comparison gives the ordering the model relies on: by start, then
    by end.
    """

    start: int
    end: int

    @property
    def width(self) -> int:
        return self.end - self.start + 1


def enumerate_spans(doc: Document, max_width: int) -> list[Span]:
    if max_width < 1:
        raise ValueError(f"max_width must be >= 1, got {max_width}")
    synthetic = [tok.synthetic for tok in doc.tokens]
    spans = []
    for sent_start, sent_end in doc.sentence_boundaries:
        for start in range(sent_start, sent_end):
            if synthetic[start]:
                continue
            for end in range(start, min(start + max_width, sent_end)):
                if synthetic[end]:
                    break
                spans.append(Span(start, end))
    spans.sort()
    return spans


def span_count(m: int, max_width: int) -> int:
    """Number of spans of width <= max_width in a sentence of m tokens."""
    return sum(m - k + 1 for k in range(1, min(max_width, m) + 1))


def attention_weights(
    alpha: torch.Tensor, spans: Sequence[Span]
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Per-span softmax of token attention logits.

    Returns ``(beta, index, mask)``, each of shape (num_spans, max_width);
    padded positions carry zero weight and a clipped index.
    """
    starts = torch.tensor([s.start for s in spans], dtype=torch.long)
    ends = torch.tensor([s.end for s in spans], dtype=torch.long)
    width = int((ends - starts).max()) + 1 if len(spans) else 1
    offsets = torch.arange(width, dtype=torch.long)
    index = starts[:, None] + offsets[None, :]
    mask = index <= ends[:, None]
    index = torch.minimum(index, ends[:, None])
    logits = alpha[index].masked_fill(~mask, float("-inf"))
    # softmax subtracts the row max internally
    beta = torch.softmax(logits, dim=1)
    return beta, index, mask


def span_representations(
    x: torch.Tensor,
    spans: Sequence[Span],
    ffnn_alpha: Callable[[torch.Tensor], torch.Tensor],
) -> torch.Tensor:
    """Stack ``[x_start, x_end, x_hat]`` for every span, shape (num_spans, 3d)."""
    if not spans:
        return x.new_zeros((0, 3 * x.shape[1]))
    alpha = ffnn_alpha(x).squeeze(-1)
    beta, index, _ = attention_weights(alpha, spans)
    pooled = (beta[:, :, None] * x[index]).sum(dim=1)
    starts = torch.tensor([s.start for s in spans], dtype=torch.long)
    ends = torch.tensor([s.end for s in spans], dtype=torch.long)
    return torch.cat([x[starts], x[ends], pooled], dim=1)


def span_representation(
    span: Span,
    x: torch.Tensor,
    ffnn_alpha: Callable[[torch.Tensor], torch.Tensor],
) -> torch.Tensor:
    return span_representations(x, [span], ffnn_alpha)[0]
