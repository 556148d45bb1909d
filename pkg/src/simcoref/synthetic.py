"""Small deterministic documents with known coreference, for overfitting runs."""

from __future__ import annotations

import random

from .corpus import Document, build_document

ENTITIES = [
    [["Alice"], ["she"], ["Ms.", "Reed"]],
    [["Bob"], ["he"], ["the", "doctor"]],
    [["the", "dog"], ["it"]],
    [["Paris"], ["the", "city"]],
    [["the", "committee"], ["they"]],
    [["the", "report"], ["the", "document"]],
]
OPENERS = [[], [], ["later"], ["then"], ["yesterday"], ["meanwhile"]]
PREDICATES = [
    ["walked", "home"],
    ["smiled", "warmly"],
    ["was", "very", "busy"],
    ["looked", "at", "the", "sky"],
    ["came", "early"],
    ["stayed", "outside"],
    ["seemed", "quite", "happy"],
    ["waited", "there"],
]


def vocabulary() -> set[str]:
    words = {".", "and"}
    for group in (ENTITIES, [OPENERS], [PREDICATES]):
        for forms in group:
            for form in forms:
                words.update(form)
    return words


def make_document(doc_key: str, rng: random.Random, n_clusters: int = 2, speakers: bool = False) -> Document:
    """One document of one-mention sentences; every entity is mentioned 2-3 times."""
    chosen = rng.sample(range(len(ENTITIES)), n_clusters)
    plan = []
    for e in chosen:
        forms = ENTITIES[e]
        count = rng.choice([2, 3])
        plan += [(e, forms[0])] + [(e, rng.choice(forms)) for _ in range(count - 1)]
    rng.shuffle(plan)
    sentences, speaker_rows = [], []
    clusters: dict[int, list[tuple[int, int]]] = {e: [] for e in chosen}
    offset = 0
    names = ["Ann", "Ben"]
    for k, (e, form) in enumerate(plan):
        opener = rng.choice(OPENERS)
        sentence = list(opener)
        start = offset + len(sentence)
        sentence += form
        clusters[e].append((start, start + len(form) - 1))
        sentence += rng.choice(PREDICATES) + ["."]
        offset += len(sentence)
        sentences.append(sentence)
        speaker = names[k // 2 % 2] if speakers else "-"
        speaker_rows.append([speaker] * len(sentence))
    return build_document(doc_key, sentences, speaker_rows, [clusters[e] for e in chosen])


def make_corpus(n_docs: int = 4, seed: int = 0, max_tokens: int = 40, speakers: bool = False) -> list[Document]:
    rng = random.Random(seed)
    docs = []
    while len(docs) < n_docs:
        doc = make_document(f"synth{len(docs)}_0", rng, rng.choice([2, 3]), speakers)
        mentions = sum(len(c) for c in doc.clusters)
        if doc.n <= max_tokens and 4 * mentions <= doc.n:
            docs.append(doc)
    return docs
