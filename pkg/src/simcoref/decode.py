"""Greedy antecedent decoding and cluster construction."""

from __future__ import annotations

from typing import Optional, Sequence

from .scorer import AntecedentScores
from .spans import Span

Assignment = list[Optional[int]]


def assign_antecedents(scores: AntecedentScores | Sequence[Sequence[float]]) -> Assignment:
    """Best antecedent per span; ``None`` is the dummy antecedent.

    ``scores`` may also be a plain matrix laid out like
    :attr:`AntecedentScores.logits`. Ties prefer the dummy, then the
    closest real antecedent.
    """
    logits = scores.logits.detach().tolist() if isinstance(scores, AntecedentScores) else scores
    assignment: Assignment = []
    for i, row in enumerate(logits):
        best, best_score = None, 0.0
        for j in range(i - 1, -1, -1):
            if row[j + 1] > best_score:
                best, best_score = j, row[j + 1]
        assignment.append(best)
    return assignment


class UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, u: int) -> int:
        root = u
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[u] != root:
            self.parent[u], u = root, self.parent[u]
        return root

    def union(self, u: int, v: int) -> None:
        ru, rv = self.find(u), self.find(v)
        if ru != rv:
            self.parent[max(ru, rv)] = min(ru, rv)


def build_clusters(assignment: Assignment, spans: Sequence[Span]) -> list[tuple[Span, ...]]:
    if len(assignment) != len(spans):
        raise ValueError(f"{len(assignment)} antecedents for {len(spans)} spans")
    uf = UnionFind(len(spans))
    for i, a in enumerate(assignment):
        if a is not None:
            if not 0 <= a < i:
                raise ValueError(f"antecedent {a} does not precede span {i}")
            uf.union(i, a)
    groups: dict[int, list[Span]] = {}
    for i, span in enumerate(spans):
        groups.setdefault(uf.find(i), []).append(span)
    return sorted(tuple(sorted(g)) for g in groups.values() if len(g) >= 2)


def decode(scores: AntecedentScores, spans: Sequence[Span]) -> list[tuple[Span, ...]]:
    return build_clusters(assign_antecedents(scores), spans)
