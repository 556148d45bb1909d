"""Document model, CoNLL-2012 reader/writer, JSON-lines interchange and
speaker-name insertion."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Sequence

from .spans import Span

SEPARATOR = ":"
UNKNOWN_SPEAKERS = frozenset({"", "-", "_"})
MIN_CONLL_COLUMNS = 12

Cluster = tuple[Span, ...]


class CorpusError(ValueError):
    pass


class ConllParseError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class JsonlFormatError(CorpusError):
    def __init__(self, doc_key: str | None, field_name: str, message: str):
        self.doc_key = doc_key
        self.field = field_name
        super().__init__(f"document {doc_key!r}, field {field_name!r}: {message}")


@dataclass(frozen=True)
class Token:
    text: str
    sentence_index: int
    synthetic: bool = False


@dataclass
class Document:
    doc_key: str
    tokens: list[Token]
    sentence_boundaries: list[tuple[int, int]]
    """Half-open ``[start, end)`` token ranges, one per sentence."""
    speakers: list[list[str]]
    """Speaker per token, grouped by sentence."""
    clusters: list[Cluster] = field(default_factory=list)

    def __post_init__(self):
        self.clusters = normalize_clusters(self.clusters)

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def sentences(self) -> list[list[str]]:
        return [[t.text for t in self.tokens[s:e]] for s, e in self.sentence_boundaries]

    @property
    def gold_mentions(self) -> set[Span]:
        return {m for cluster in self.clusters for m in cluster}

    @property
    def has_synthetic(self) -> bool:
        return any(t.synthetic for t in self.tokens)

    def sentence_of(self, index: int) -> int:
        return self.tokens[index].sentence_index

    def with_clusters(self, clusters: Iterable[Iterable[Span]]) -> Document:
        return replace(self, clusters=[tuple(c) for c in clusters])

    def validate(self) -> Document:
        n = len(self.tokens)
        pos = 0
        for i, (start, end) in enumerate(self.sentence_boundaries):
            if start != pos or end <= start:
                raise CorpusError(f"{self.doc_key}: sentence {i} range ({start},{end}) is not contiguous")
            for tok in self.tokens[start:end]:
                if tok.sentence_index != i:
                    raise CorpusError(f"{self.doc_key}: token sentence index mismatch in sentence {i}")
            pos = end
        if pos != n:
            raise CorpusError(f"{self.doc_key}: sentences cover {pos} of {n} tokens")
        if [len(s) for s in self.speakers] != [e - s for s, e in self.sentence_boundaries]:
            raise CorpusError(f"{self.doc_key}: speakers are not parallel to sentences")
        for tok in self.tokens:
            if not tok.text:
                raise CorpusError(f"{self.doc_key}: empty token text")
        for cluster in self.clusters:
            if not cluster:
                raise CorpusError(f"{self.doc_key}: empty cluster")
            for m in cluster:
                if not 0 <= m.start <= m.end < n:
                    raise CorpusError(f"{self.doc_key}: mention {tuple(m)} out of range")
                if self.sentence_of(m.start) != self.sentence_of(m.end):
                    raise CorpusError(f"{self.doc_key}: mention {tuple(m)} crosses a sentence boundary")
                if any(t.synthetic for t in self.tokens[m.start : m.end + 1]):
                    raise CorpusError(f"{self.doc_key}: mention {tuple(m)} covers a speaker token")
        return self


def normalize_clusters(clusters: Iterable[Iterable[Sequence[int]]]) -> list[Cluster]:
    out = [tuple(sorted({Span(*m) for m in c})) for c in clusters]
    return sorted(c for c in out if c)


def build_document(
    doc_key: str,
    sentences: Sequence[Sequence[str]],
    speakers: Sequence[Sequence[str]] | None = None,
    clusters: Iterable[Iterable[Sequence[int]]] = (),
    synthetic: Iterable[int] = (),
) -> Document:
    synthetic = set(synthetic)
    tokens, bounds = [], []
    for i, sent in enumerate(sentences):
        start = len(tokens)
        for text in sent:
            tokens.append(Token(text, i, len(tokens) in synthetic))
        bounds.append((start, len(tokens)))
    if speakers is None:
        speakers = [["-"] * len(s) for s in sentences]
    doc = Document(doc_key, tokens, bounds, [list(s) for s in speakers], list(clusters))
    return doc.validate()


# ---------------------------------------------------------------- speakers


def is_unknown_speaker(name: str | None) -> bool:
    return name is None or name.strip() in UNKNOWN_SPEAKERS


def insert_speakers(doc: Document, separator: str = SEPARATOR) -> Document:
    """Prefix the speaker's name and ``separator`` wherever the speaker changes.

    The unknown speaker takes part in change detection but contributes no
    tokens. Documents that already carry speaker tokens are returned as is.
    """
    if doc.has_synthetic:
        return doc
    tokens: list[Token] = []
    bounds: list[tuple[int, int]] = []
    speakers: list[list[str]] = []
    remap: list[int] = []
    previous = object()
    for i, (start, end) in enumerate(doc.sentence_boundaries):
        sent_speakers = doc.speakers[i]
        speaker = sent_speakers[0] if sent_speakers else None
        key = None if is_unknown_speaker(speaker) else speaker
        new_start = len(tokens)
        prefix: list[str] = []
        if key != previous and key is not None:
            prefix = speaker.split() + [separator]
        for text in prefix:
            tokens.append(Token(text, i, True))
        for tok in doc.tokens[start:end]:
            remap.append(len(tokens))
            tokens.append(tok)
        bounds.append((new_start, len(tokens)))
        speakers.append([speaker] * len(prefix) + list(sent_speakers))
        previous = key
    clusters = [tuple(Span(remap[m.start], remap[m.end]) for m in c) for c in doc.clusters]
    return Document(doc.doc_key, tokens, bounds, speakers, clusters).validate()


def strip_speakers(doc: Document) -> Document:
    """Inverse of :func:`insert_speakers`."""
    if not doc.has_synthetic:
        return doc
    remap: dict[int, int] = {}
    sentences, speakers = [], []
    for i, (start, end) in enumerate(doc.sentence_boundaries):
        sent, spk = [], []
        for j in range(start, end):
            if not doc.tokens[j].synthetic:
                remap[j] = len(remap)
                sent.append(doc.tokens[j].text)
                spk.append(doc.speakers[i][j - start])
        sentences.append(sent)
        speakers.append(spk)
    clusters = [[(remap[m.start], remap[m.end]) for m in c] for c in doc.clusters]
    return build_document(doc.doc_key, sentences, speakers, clusters)


# ---------------------------------------------------------------- CoNLL

_BEGIN = re.compile(r"^#begin document \((.*)\);?(?:\s*part\s+(\d+))?\s*$")
_TAG = re.compile(r"^(\()?(\d+)(\))?$")


def split_doc_key(doc_key: str) -> tuple[str, int]:
    head, sep, part = doc_key.rpartition("_")
    if sep and part.isdigit():
        return head, int(part)
    return doc_key, 0


def parse_coref_tags(column: str) -> list[tuple[str, int]]:
    """Split a coreference cell into ``('open'|'close'|'single', chain)`` events."""
    if column == "-":
        return []
    events = []
    for part in column.split("|"):
        match = _TAG.match(part)
        if not match or not (match.group(1) or match.group(3)):
            raise ValueError(f"bad coreference tag {part!r}")
        opened, chain, closed = match.groups()
        kind = "single" if opened and closed else "open" if opened else "close"
        events.append((kind, int(chain)))
    return events


def parse_conll(stream: IO[str] | Iterable[str], keep_singletons: bool = False) -> list[Document]:
    """Read CoNLL-2012 documents.

    One-mention chains are dropped unless ``keep_singletons`` is set, which a
    scorer needs when a system file lists them.
    """
    docs: list[Document] = []
    doc_id: str | None = None
    part = 0
    sentences: list[list[str]] = []
    speakers: list[list[str]] = []
    sentence: list[str] = []
    sent_speakers: list[str] = []
    columns = 0
    chains: dict[int, list[tuple[int, int]]] = defaultdict(list)
    stacks: dict[int, list[tuple[int, int]]] = defaultdict(list)
    n_tokens = 0

    def close_sentence(lineno: int):
        nonlocal sentence, sent_speakers, columns
        if not sentence:
            return
        for chain, stack in stacks.items():
            if stack:
                raise ConllParseError(
                    f"mention of chain {chain} opened on line {stack[-1][1]} crosses a sentence boundary",
                    lineno,
                )
        sentences.append(sentence)
        speakers.append(sent_speakers)
        sentence, sent_speakers, columns = [], [], 0

    lineno = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if line.startswith("#begin"):
            if doc_id is not None:
                raise ConllParseError("nested #begin document", lineno)
            match = _BEGIN.match(line.strip())
            if not match:
                raise ConllParseError("malformed #begin document line", lineno)
            doc_id, part = match.group(1), int(match.group(2) or 0)
            sentences, speakers, sentence, sent_speakers = [], [], [], []
            chains, stacks = defaultdict(list), defaultdict(list)
            n_tokens = 0
            continue
        if line.startswith("#end"):
            if doc_id is None:
                raise ConllParseError("#end document without #begin", lineno)
            close_sentence(lineno)
            clusters = [[m for m, _ in chains[c]] for c in sorted(chains)]
            clusters = [c for c in clusters if len(set(c)) >= (1 if keep_singletons else 2)]
            try:
                docs.append(build_document(f"{doc_id}_{part}", sentences, speakers, clusters))
            except CorpusError as exc:
                raise ConllParseError(str(exc), lineno) from exc
            doc_id = None
            continue
        if not line.strip():
            if doc_id is not None:
                close_sentence(lineno)
            continue
        if doc_id is None:
            if line.startswith("#"):
                continue
            raise ConllParseError("token line outside of a document", lineno)
        if line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < MIN_CONLL_COLUMNS:
            raise ConllParseError(
                f"expected at least {MIN_CONLL_COLUMNS} columns, found {len(fields)}", lineno
            )
        if columns and len(fields) != columns:
            raise ConllParseError(
                f"column count {len(fields)} differs from {columns} earlier in the sentence", lineno
            )
        columns = len(fields)
        if fields[0] != doc_id:
            raise ConllParseError(f"document id {fields[0]!r} does not match {doc_id!r}", lineno)
        try:
            events = parse_coref_tags(fields[-1])
        except ValueError as exc:
            raise ConllParseError(str(exc), lineno) from exc
        index = n_tokens
        for kind, chain in events:
            if kind == "single":
                chains[chain].append(((index, index), lineno))
            elif kind == "open":
                stacks[chain].append((index, lineno))
            else:
                if not stacks[chain]:
                    raise ConllParseError(f"unbalanced close bracket for chain {chain}", lineno)
                start, _ = stacks[chain].pop()
                chains[chain].append(((start, index), lineno))
        sentence.append(fields[3])
        sent_speakers.append(fields[9])
        n_tokens += 1

    if doc_id is not None:
        raise ConllParseError(f"document {doc_id!r} is missing #end document", lineno)
    return docs


def coref_columns(n: int, clusters: Sequence[Cluster]) -> list[str]:
    """Render clusters as per-token coreference cells.

    Closing tags precede single-token tags, which precede opening tags, so a
    mention ending where a same-chain mention starts is read back correctly.
    """
    closes: list[list[str]] = [[] for _ in range(n)]
    singles: list[list[str]] = [[] for _ in range(n)]
    opens: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    for chain, cluster in enumerate(clusters):
        for m in cluster:
            if m.start == m.end:
                singles[m.start].append(f"({chain})")
            else:
                opens[m.start].append((m.end, f"({chain}"))
                closes[m.end].append((m.start, f"{chain})"))
    cells = []
    for i in range(n):
        # longer mentions open first and close last
        ordered_opens = [tag for _, tag in sorted(opens[i], key=lambda o: -o[0])]
        ordered_closes = [tag for _, tag in sorted(closes[i], key=lambda c: -c[0])]
        parts = ordered_closes + singles[i] + ordered_opens
        cells.append("|".join(parts) if parts else "-")
    return cells


def write_conll(docs: Iterable[Document], stream: IO[str]) -> None:
    """Write documents in 12-column CoNLL-2012 layout; speaker tokens are dropped."""
    for doc in docs:
        doc = strip_speakers(doc)
        doc_id, part = split_doc_key(doc.doc_key)
        cells = coref_columns(doc.n, doc.clusters)
        stream.write(f"#begin document ({doc_id}); part {part:03d}\n")
        for i, (start, end) in enumerate(doc.sentence_boundaries):
            for j in range(start, end):
                speaker = doc.speakers[i][j - start] or "-"
                speaker = "_".join(speaker.split()) or "-"
                row = [doc_id, str(part), str(j - start), doc.tokens[j].text,
                       "-", "-", "-", "-", "-", speaker, "*", cells[j]]
                stream.write("\t".join(row) + "\n")
            stream.write("\n")
        stream.write("#end document\n")


# ---------------------------------------------------------------- JSON lines

_REQUIRED = ("doc_key", "sentences", "speakers", "clusters")


def document_from_json(obj: dict) -> Document:
    doc_key = obj.get("doc_key") if isinstance(obj, dict) else None
    if not isinstance(obj, dict):
        raise JsonlFormatError(None, "<root>", "expected a JSON object")
    for name in _REQUIRED:
        if name not in obj:
            raise JsonlFormatError(doc_key, name, "missing field")
    if not isinstance(doc_key, str):
        raise JsonlFormatError(doc_key, "doc_key", "must be a string")
    sentences, speakers = obj["sentences"], obj["speakers"]
    if not isinstance(sentences, list) or not all(
        isinstance(s, list) and s and all(isinstance(t, str) and t for t in s) for s in sentences
    ):
        raise JsonlFormatError(doc_key, "sentences", "must be a list of non-empty token lists")
    if not isinstance(speakers, list) or len(speakers) != len(sentences) or any(
        not isinstance(sp, list) or len(sp) != len(s) for sp, s in zip(speakers, sentences)
    ):
        raise JsonlFormatError(doc_key, "speakers", "not parallel to sentences")
    n = sum(len(s) for s in sentences)
    clusters = obj["clusters"]
    if not isinstance(clusters, list):
        raise JsonlFormatError(doc_key, "clusters", "must be a list")
    for cluster in clusters:
        if not isinstance(cluster, list):
            raise JsonlFormatError(doc_key, "clusters", "each cluster must be a list")
        for m in cluster:
            if (
                not isinstance(m, list)
                or len(m) != 2
                or not all(isinstance(v, int) for v in m)
                or not 0 <= m[0] <= m[1] < n
            ):
                raise JsonlFormatError(doc_key, "clusters", f"mention {m} out of range for {n} tokens")
    synthetic = obj.get("synthetic", [])
    if not isinstance(synthetic, list) or not all(isinstance(i, int) and 0 <= i < n for i in synthetic):
        raise JsonlFormatError(doc_key, "synthetic", "must list token indices")
    try:
        return build_document(doc_key, sentences, speakers, clusters, synthetic)
    except CorpusError as exc:
        raise JsonlFormatError(doc_key, "clusters", str(exc)) from exc


def document_to_json(doc: Document) -> dict:
    obj = {
        "doc_key": doc.doc_key,
        "sentences": doc.sentences,
        "speakers": [list(s) for s in doc.speakers],
        "clusters": [[[m.start, m.end] for m in c] for c in doc.clusters],
    }
    synthetic = [i for i, t in enumerate(doc.tokens) if t.synthetic]
    if synthetic:
        obj["synthetic"] = synthetic
    return obj


def read_jsonlines(stream: IO[str] | Iterable[str]) -> list[Document]:
    docs = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise JsonlFormatError(None, "<line>", f"line {lineno}: {exc}") from exc
        docs.append(document_from_json(obj))
    return docs


def write_jsonlines(docs: Iterable[Document], stream: IO[str]) -> None:
    for doc in docs:
        stream.write(json.dumps(document_to_json(doc), ensure_ascii=False) + "\n")


def iter_mentions(doc: Document) -> Iterator[tuple[int, Span]]:
    for cid, cluster in enumerate(doc.clusters):
        for m in cluster:
            yield cid, m
