"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import random

from simcoref.corpus import build_document


def bracket_mentions(cells):
    """Match coreference cells by scanning back for the nearest open bracket."""
    events = []
    for t, cell in enumerate(cells):
        if cell == "-":
            continue
        for part in cell.split("|"):
            chain = int(part.strip("()"))
            if part.startswith("(") and part.endswith(")"):
                events.append((t, "single", chain))
            elif part.startswith("("):
                events.append((t, "open", chain))
            else:
                events.append((t, "close", chain))
    used = set()
    chains = {}
    for k, (t, kind, chain) in enumerate(events):
        if kind == "single":
            chains.setdefault(chain, []).append((t, t))
        elif kind == "close":
            for back in range(k - 1, -1, -1):
                bt, bkind, bchain = events[back]
                if bkind == "open" and bchain == chain and back not in used:
                    used.add(back)
                    chains.setdefault(chain, []).append((bt, t))
                    break
            else:
                raise ValueError("unmatched close")
    return {c: sorted(ms) for c, ms in chains.items()}


def spans_brute_force(sentence_lengths, max_width):
    out = []
    offset = 0
    for m in sentence_lengths:
        for a, b in itertools.combinations_with_replacement(range(offset, offset + m), 2):
            if b - a + 1 <= max_width:
                out.append((a, b))
        offset += m
    return sorted(out)


def best_context_segment(t, segments):
    """Owner segment of token t by listing every covering segment's context."""
    options = [(min(t - s, e - 1 - t), -k) for k, (s, e) in enumerate(segments) if s <= t < e]
    ctx, neg_k = max(options)
    return -neg_k


# ---------------------------------------------------------------- metrics


def _components(mentions, links):
    parent = {m: m for m in mentions}

    def root(m):
        while parent[m] != m:
            m = parent[m]
        return m

    for a, b in links:
        if a in parent and b in parent:
            parent[root(a)] = root(b)
    return len({root(m) for m in mentions})


def _chain_links(clusters):
    # every pair: coreference is transitive, so a response cluster links all its members
    return [(a, b) for c in clusters for a in c for b in c if a != b]


def muc_brute(gold, system):
    """MUC via connected components of each key cluster under response links."""

    def side(keys, response):
        links = _chain_links(response)
        num = sum(len(c) - _components(list(c), links) for c in keys)
        den = sum(len(c) - 1 for c in keys)
        return num, den

    rn, rd = side(gold, system)
    pn, pd = side(system, gold)
    return _prf(pn, pd, rn, rd)


def b3_brute(gold, system):
    def side(keys, response):
        total, count = 0.0, 0
        for c in keys:
            for m in c:
                match = [r for r in response if m in r]
                overlap = len(set(c) & set(match[0])) if match else 0
                total += overlap / len(c)
                count += 1
        return total, count

    rn, rd = side(gold, system)
    pn, pd = side(system, gold)
    return _prf(pn, pd, rn, rd)


def ceaf_brute(gold, system):
    """CEAF_φ4 with the alignment found by enumerating all injections."""
    gold = [set(c) for c in gold]
    system = [set(c) for c in system]
    best = 0.0
    if gold and system:
        small, large, flip = (gold, system, False) if len(gold) <= len(system) else (system, gold, True)
        for perm in itertools.permutations(range(len(large)), len(small)):
            total = 0.0
            for a, b in zip(range(len(small)), perm):
                g, s = (large[b], small[a]) if flip else (small[a], large[b])
                total += 2 * len(g & s) / (len(g) + len(s))
            best = max(best, total)
    return _prf(best, len(system), best, len(gold))


def _prf(pn, pd, rn, rd):
    p = pn / pd if pd else 0.0
    r = rn / rd if rd else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def random_partition(rng: random.Random, mentions, max_clusters, min_size=2):
    """Random disjoint clusters over a subset of ``mentions``."""
    k = rng.randint(0, max_clusters)
    pool = list(mentions)
    rng.shuffle(pool)
    clusters = []
    for _ in range(k):
        size = rng.randint(min_size, 4)
        if len(pool) < size:
            break
        clusters.append([pool.pop() for _ in range(size)])
    return clusters


# ---------------------------------------------------------------- corpora


def crafted_documents(count: int = 24, seed: int = 0):
    """Documents with stacked, nested, same-start and overlapping mentions.

    Mentions of the same chain never partially overlap, since bracket
    notation cannot express that unambiguously.
    """
    rng = random.Random(seed)
    words = ["the", "cat", "sat", "on", "mat", "and", "it", "purred", "she", "saw", "a", "bird", "."]
    docs = []
    for d in range(count):
        sentences = [[rng.choice(words) for _ in range(rng.randint(1, 9))] for _ in range(rng.randint(1, 4))]
        speakers = []
        for s in sentences:
            name = rng.choice(["A", "B", "-", "Dr_Who"])
            speakers.append([name] * len(s))
        candidates = []
        offset = 0
        for s in sentences:
            for a in range(offset, offset + len(s)):
                for b in range(a, min(a + 4, offset + len(s))):
                    candidates.append((a, b))
            offset += len(s)
        clusters = []
        for c in random_partition(rng, candidates, 4):
            kept = []
            for m in c:
                if all(not _crossing(m, o) for o in kept):
                    kept.append(m)
            if len(set(kept)) >= 2:
                clusters.append(kept)
        used = set()
        disjoint = []
        for c in clusters:
            c = [m for m in c if m not in used]
            if len(c) >= 2:
                disjoint.append(c)
                used.update(c)
        docs.append(build_document(f"genre/src/{d:02d}/doc_{d}", sentences, speakers, disjoint))
    return docs


def _crossing(a, b):
    return a[0] < b[0] <= a[1] < b[1] or b[0] < a[0] <= b[1] < a[1]
