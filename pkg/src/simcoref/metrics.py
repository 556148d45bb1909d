"""MUC, B³ and CEAF_φ4 with corpus-level pooling, plus mention recall.

Every metric is computed from per-document ``(p_num, p_den, r_num, r_den)``
counts; corpus scores sum the counts before dividing, as the CoNLL-2012
reference scorer does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Clusters = Sequence[Iterable[Hashable]]
Counts = tuple[float, float, float, float]

METRICS = ("muc", "b_cubed", "ceaf_phi4")
LABELS = {"muc": "MUC", "b_cubed": "B-CUBED", "ceaf_phi4": "CEAF_phi4"}


def _as_sets(clusters: Clusters) -> list[frozenset]:
    return [frozenset(c) for c in clusters if len(frozenset(c))]


def _mention_index(clusters: list[frozenset]) -> dict:
    index = {}
    for k, c in enumerate(clusters):
        for m in c:
            index.setdefault(m, k)
    return index


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def muc_counts(gold: Clusters, system: Clusters) -> Counts:
    gold, system = _as_sets(gold), _as_sets(system)

    def partition_counts(keys, response):
        index = _mention_index(response)
        num = den = 0
        for c in keys:
            parts = {index[m] for m in c if m in index}
            unaligned = sum(1 for m in c if m not in index)
            num += len(c) - (len(parts) + unaligned)
            den += len(c) - 1
        return num, den

    r_num, r_den = partition_counts(gold, system)
    p_num, p_den = partition_counts(system, gold)
    return p_num, p_den, r_num, r_den


def b_cubed_counts(gold: Clusters, system: Clusters) -> Counts:
    gold, system = _as_sets(gold), _as_sets(system)
    g_index, s_index = _mention_index(gold), _mention_index(system)

    def overlap(m, own, own_index, other, other_index):
        if m not in other_index:
            return 0.0
        return len(own[own_index[m]] & other[other_index[m]]) / len(own[own_index[m]])

    r_num = sum(overlap(m, gold, g_index, system, s_index) for m in g_index)
    p_num = sum(overlap(m, system, s_index, gold, g_index) for m in s_index)
    return p_num, len(s_index), r_num, len(g_index)


def phi4(a: frozenset, b: frozenset) -> float:
    return 2 * len(a & b) / (len(a) + len(b))


def ceaf_phi4_counts(gold: Clusters, system: Clusters) -> Counts:
    gold, system = _as_sets(gold), _as_sets(system)
    if not gold or not system:
        return 0.0, len(system), 0.0, len(gold)
    sim = np.array([[phi4(g, s) for s in system] for g in gold])
    rows, cols = linear_sum_assignment(sim, maximize=True)
    total = float(sim[rows, cols].sum())
    return total, len(system), total, len(gold)


COUNTERS = {"muc": muc_counts, "b_cubed": b_cubed_counts, "ceaf_phi4": ceaf_phi4_counts}


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, counts: Counts) -> Score:
        p_num, p_den, r_num, r_den = counts
        p, r = _ratio(p_num, p_den), _ratio(r_num, r_den)
        return cls(p, r, f1(p, r))


def muc(gold: Clusters, system: Clusters) -> Score:
    return Score.from_counts(muc_counts(gold, system))


def b_cubed(gold: Clusters, system: Clusters) -> Score:
    return Score.from_counts(b_cubed_counts(gold, system))


def ceaf_phi4(gold: Clusters, system: Clusters) -> Score:
    return Score.from_counts(ceaf_phi4_counts(gold, system))


def average_f1(scores: Iterable[float | Score]) -> float:
    values = [s.f1 if isinstance(s, Score) else float(s) for s in scores]
    if len(values) != 3:
        raise ValueError(f"expected three F1 values, got {len(values)}")
    return sum(values) / 3


@dataclass(frozen=True)
class MetricReport:
    muc: Score
    b_cubed: Score
    ceaf_phi4: Score

    @property
    def avg_f1(self) -> float:
        return average_f1([self.muc, self.b_cubed, self.ceaf_phi4])

    def to_dict(self) -> dict:
        out = {}
        for name in METRICS:
            s = getattr(self, name)
            out[name] = {"precision": s.precision, "recall": s.recall, "f1": s.f1}
        out["avg_f1"] = self.avg_f1
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self, name: str = "system", percent: bool = True) -> str:
        """Text table with P/R/F1 for each metric followed by the average F1."""
        scale = 100.0 if percent else 1.0
        cells = []
        for metric in METRICS:
            s = getattr(self, metric)
            cells += [s.precision, s.recall, s.f1]
        cells.append(self.avg_f1)
        width = max(len(name), 6)
        head1 = " " * width + " | " + " | ".join(f"{LABELS[m]:^20}" for m in METRICS) + " |"
        head2 = (
            " " * width
            + " | "
            + " | ".join(f"{'P':>6}{'R':>7}{'F1':>7}" for _ in METRICS)
            + f" | {'Avg. F1':>7}"
        )
        values = [f"{c * scale:6.1f}" for c in cells]
        row = name.ljust(width) + " | " + " | ".join(
            " ".join(values[3 * i : 3 * i + 3]) for i in range(3)
        ) + f" | {values[-1]:>7}"
        return "\n".join([head1, head2, "-" * len(head2), row])


@dataclass
class CorefEvaluator:
    """Accumulates per-document counts for all three metrics."""

    counts: dict = field(default_factory=lambda: {m: [0.0, 0.0, 0.0, 0.0] for m in METRICS})
    documents: int = 0

    def update(self, gold: Clusters, system: Clusters) -> None:
        for name, counter in COUNTERS.items():
            for k, v in enumerate(counter(gold, system)):
                self.counts[name][k] += v
        self.documents += 1

    def report(self) -> MetricReport:
        return MetricReport(**{m: Score.from_counts(tuple(self.counts[m])) for m in METRICS})


def evaluate_clusters(pairs: Iterable[tuple[Clusters, Clusters]]) -> MetricReport:
    """Corpus report over ``(gold, system)`` cluster pairs, one per document."""
    evaluator = CorefEvaluator()
    for gold, system in pairs:
        evaluator.update(gold, system)
    return evaluator.report()


@dataclass(frozen=True)
class RecallReport:
    spans_proposed_per_doc: float
    gold_mention_recall: float
    documents: int = 0
    gold_mentions: int = 0
    gold_found: int = 0

    def to_dict(self) -> dict:
        return {
            "spans_proposed_per_doc": self.spans_proposed_per_doc,
            "gold_mention_recall": self.gold_mention_recall,
            "documents": self.documents,
            "gold_mentions": self.gold_mentions,
            "gold_found": self.gold_found,
        }

    def to_table(self, name: str = "system") -> str:
        width = max(len(name), 6)
        head = f"{'':{width}} | {'Avg. Nb Spans Proposed':>24} | {'Gold Mention Recall':>19}"
        row = (
            f"{name:{width}} | {f'~ {self.spans_proposed_per_doc:.2f} spans / docs':>24}"
            f" | {f'{100 * self.gold_mention_recall:.1f}%':>19}"
        )
        return "\n".join([head, "-" * len(head), row])


def mention_recall(
    gold_mentions: Sequence[Iterable[Hashable]], proposed: Sequence[Iterable[Hashable]]
) -> RecallReport:
    """Exact-match recall of gold mentions among proposed spans, per document."""
    if len(gold_mentions) != len(proposed):
        raise ValueError("need one proposed span set per document")
    total = found = n_spans = 0
    for gold, spans in zip(gold_mentions, proposed):
        gold, spans = set(gold), set(spans)
        total += len(gold)
        found += len(gold & spans)
        n_spans += len(spans)
    docs = len(proposed)
    return RecallReport(_ratio(n_spans, docs), _ratio(found, total), docs, total, found)
