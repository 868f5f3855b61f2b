"""Similarity joins over literal values and emission of similarity edges.

String literals are compared with Jaccard similarity on q-gram sets.  The
join is an all-pairs prefix-filtering join (ppjoin+): records are sorted by
a global rare-first token order, only prefixes are indexed, and candidate
pairs are pruned with size, positional and suffix bounds before exact
verification.  Numeric and time literals are joined by a sorted sweep.
"""
from __future__ import annotations

import logging
import math
from bisect import bisect_left
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .. import vocab
from ..rdf import IRI, EncodedGraph, RawTriple, Term

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 11))
SIM_NAMESPACE = "urn:mandolin:sim:"

_PAD_START = "\u0002"
_PAD_END = "\u0003"
_SUFFIX_MAX_DEPTH = 2


@dataclass
class SimilarityConfig:
    q: int = 3
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    numeric_threshold: float = 1.0
    # per-property absolute bound, keyed by property IRI
    numeric_thresholds: dict[str, float] = field(default_factory=dict)
    namespace: str = SIM_NAMESPACE
    emit_hierarchy: bool = False

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be a positive integer")
        ths = tuple(float(t) for t in self.thresholds)
        if not ths or any(not (0.0 < t <= 1.0) for t in ths):
            raise ValueError("thresholds must lie in (0, 1]")
        if list(ths) != sorted(ths):
            raise ValueError("thresholds must be sorted ascending")
        self.thresholds = ths

    def numeric_bound(self, prop_iri: str) -> float:
        return self.numeric_thresholds.get(prop_iri, self.numeric_threshold)


# -- q-grams ------------------------------------------------------------------

def qgrams(text: str, q: int = 3) -> frozenset[str]:
    """Set of q-grams; strings shorter than q are padded on both ends."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if not text:
        return frozenset()
    if len(text) < q:
        text = _PAD_START * (q - 1) + text + _PAD_END * (q - 1)
    return frozenset(text[i:i + q] for i in range(len(text) - q + 1))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a or not b:
        return 0.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def jaccard_qgrams(s1: str, s2: str, q: int = 3) -> float:
    return jaccard(qgrams(s1, q), qgrams(s2, q))


# -- ppjoin+ --------------------------------------------------------------------

def _suffix_bound(x: Sequence[int], y: Sequence[int], hmax: int, depth: int) -> int:
    """Lower bound on the Hamming distance between two sorted token lists.

    Returns early with any value above ``hmax`` once the bound exceeds it.
    """
    lx, ly = len(x), len(y)
    if depth > _SUFFIX_MAX_DEPTH or lx == 0 or ly == 0:
        return abs(lx - ly)
    mid = ly // 2
    w = y[mid]
    yl, yr = y[:mid], y[mid + 1:]
    p = bisect_left(x, w)
    if p < lx and x[p] == w:
        xl, xr, diff = x[:p], x[p + 1:], 0
    else:
        xl, xr, diff = x[:p], x[p:], 1
    h = abs(len(xl) - len(yl)) + abs(len(xr) - len(yr)) + diff
    if h > hmax:
        return h
    hr_size = abs(len(xr) - len(yr))
    h_left = _suffix_bound(xl, yl, hmax - hr_size - diff, depth + 1)
    h = h_left + hr_size + diff
    if h > hmax:
        return h
    h_right = _suffix_bound(xr, yr, hmax - h_left - diff, depth + 1)
    return h_left + h_right + diff


def _required_overlap(theta: float, lx: int, ly: int) -> int:
    # tiny epsilon guards against 0.6 * 5 == 3.0000000000000004 style rounding
    return math.ceil(theta / (1.0 + theta) * (lx + ly) - 1e-9)


def _prefix_length(theta: float, size: int) -> int:
    return size - math.ceil(theta * size - 1e-9) + 1


def token_set_join(sets: Sequence[frozenset], theta: float) -> list[tuple[int, int, float]]:
    """All pairs ``(i, j, jaccard)`` with ``i < j`` and similarity >= theta."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    df = Counter(tok for s in sets for tok in s)
    rank = {tok: r for r, tok in enumerate(sorted(df, key=lambda t: (df[t], t)))}
    records = [sorted(rank[t] for t in s) for s in sets]
    order = sorted((i for i in range(len(sets)) if records[i]), key=lambda i: (len(records[i]), i))

    index: dict[int, list[tuple[int, int]]] = defaultdict(list)
    result = []
    for x in order:
        rx = records[x]
        lx = len(rx)
        min_size = theta * lx - 1e-9
        overlap: dict[int, int] = {}
        for i in range(_prefix_length(theta, lx)):
            for y, j in index.get(rx[i], ()):
                cur = overlap.get(y, 0)
                if cur < 0:
                    continue
                ry = records[y]
                ly = len(ry)
                if ly < min_size:
                    overlap[y] = -1
                    continue
                alpha = _required_overlap(theta, lx, ly)
                if cur + 1 + min(lx - i - 1, ly - j - 1) < alpha:
                    overlap[y] = -1
                    continue
                if cur == 0:
                    hmax = lx + ly - 2 * alpha - (i + j)
                    if _suffix_bound(rx[i + 1:], ry[j + 1:], hmax, 1) > hmax:
                        overlap[y] = -1
                        continue
                overlap[y] = cur + 1
        for y, cnt in overlap.items():
            if cnt > 0:
                sim = jaccard(sets[x], sets[y])
                if sim >= theta:
                    result.append((min(x, y), max(x, y), sim))
        for i in range(_prefix_length(theta, lx)):
            index[rx[i]].append((x, i))
    result.sort()
    return result


def similar_string_pairs(strings: Sequence[str], theta: float, q: int = 3) -> list[tuple[int, int, float]]:
    return token_set_join([qgrams(s, q) for s in strings], theta)


def naive_string_pairs(strings: Sequence[str], theta: float, q: int = 3) -> list[tuple[int, int, float]]:
    """Quadratic reference join."""
    grams = [qgrams(s, q) for s in strings]
    out = []
    for i in range(len(grams)):
        for j in range(i + 1, len(grams)):
            sim = jaccard(grams[i], grams[j])
            if sim >= theta and sim > 0:
                out.append((i, j, sim))
    return out


# -- numeric join -------------------------------------------------------------------

def literal_value(term: Term) -> float | None:
    """Numeric value of a numeric or time literal (epoch seconds for times)."""
    dt = term.datatype
    text = term.lexical.strip()
    try:
        if dt in vocab.NUMERIC_TYPES:
            return float(text)
        if dt in vocab.TIME_TYPES:
            if dt == vocab.XSD + "gYear":
                stamp = datetime(int(text[:4] if text[0] != "-" else text[:5]), 1, 1, tzinfo=timezone.utc)
            else:
                stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
                if stamp.tzinfo is None:
                    stamp = stamp.replace(tzinfo=timezone.utc)
            return stamp.timestamp()
    except (ValueError, OverflowError, IndexError):
        return None
    return None


def is_numeric_literal(term: Term) -> bool:
    return term.datatype in vocab.NUMERIC_TYPES or term.datatype in vocab.TIME_TYPES


def numeric_pairs(values: Sequence[float], bound: float) -> list[tuple[int, int, float]]:
    """Pairs ``(i, j, |vi - vj|)`` with difference strictly below ``bound``."""
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    out = []
    for a, i in enumerate(order):
        vi = values[i]
        for j in order[a + 1:]:
            d = values[j] - vi
            if not d < bound:
                break
            out.append((min(i, j), max(i, j), d))
    out.sort()
    return out


def numeric_similarity_join(bucket: Sequence[tuple[int, Term]], bound: float):
    """Sweep join of numeric literals; returns ``(pairs, skipped)``.

    ``pairs`` holds ``(subjectA, subjectB, similarity)`` with similarity
    ``1 - diff / bound`` so the pairs can share the threshold ladder of the
    string join.
    """
    subjects, values, skipped = [], [], 0
    for subj, lit in bucket:
        v = literal_value(lit)
        if v is None or math.isnan(v):
            skipped += 1
            continue
        subjects.append(subj)
        values.append(v)
    if skipped:
        logger.warning("numeric join skipped %d unparseable literals", skipped)
    if bound <= 0:
        return [], skipped
    pairs = [(subjects[i], subjects[j], 1.0 - d / bound) for i, j, d in numeric_pairs(values, bound)]
    return _subject_pairs(pairs), skipped


def string_similarity_join(bucket: Sequence[tuple[int, Term | str]], theta: float, q: int = 3):
    """Subject pairs whose literals reach Jaccard >= theta."""
    strings = [lit if isinstance(lit, str) else lit.lexical for _, lit in bucket]
    pairs = [(bucket[i][0], bucket[j][0], sim) for i, j, sim in similar_string_pairs(strings, theta, q)]
    return _subject_pairs(pairs)


def _subject_pairs(pairs: Iterable[tuple[int, int, float]]) -> list[tuple[int, int, float]]:
    best: dict[tuple[int, int], float] = {}
    for a, b, sim in pairs:
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        if sim > best.get(key, -1.0):
            best[key] = sim
    return [(a, b, s) for (a, b), s in sorted(best.items())]


# -- buckets and emission ---------------------------------------------------------------

def bucket_literals(graph: EncodedGraph) -> dict[int, list[tuple[int, Term]]]:
    buckets: dict[int, list[tuple[int, Term]]] = defaultdict(list)
    for s, p, o in graph:
        term = graph.term(o)
        if term.is_literal:
            buckets[p].append((s, term))
    return dict(buckets)


def _local_part(iri: str) -> str:
    for prefix, ns in vocab.PREFIXES.items():
        if iri.startswith(ns) and len(iri) > len(ns):
            return f"{prefix}_{iri[len(ns):]}"
    cut = max(iri.rfind("#"), iri.rfind("/"), iri.rfind(":"))
    local = iri[cut + 1:] or iri
    return "".join(ch if ch.isalnum() or ch in "_-." else "_" for ch in local)


def format_threshold(theta: float) -> str:
    return repr(round(float(theta), 6))


def similarity_predicate(prop_iri: str, theta: float, namespace: str = SIM_NAMESPACE) -> str:
    """``foaf:name`` at 0.6 -> ``<namespace>foaf_name_0.6``."""
    return f"{namespace}{_local_part(prop_iri)}_{format_threshold(theta)}"


def is_similarity_predicate(iri: str, namespace: str = SIM_NAMESPACE) -> bool:
    return iri.startswith(namespace)


def emit_similarity_triples(pairs: Iterable[tuple[Term, Term, float]], base_property: str,
                            thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                            namespace: str = SIM_NAMESPACE) -> list[RawTriple]:
    preds = [(t, IRI(similarity_predicate(base_property, t, namespace))) for t in thresholds]
    out: list[RawTriple] = []
    for a, b, sim in pairs:
        for theta, pred in preds:
            if theta <= sim + 1e-12:
                out.append((a, pred, b))
                out.append((b, pred, a))
    return out


def hierarchy_triples(base_property: str, thresholds: Sequence[float],
                      namespace: str = SIM_NAMESPACE) -> list[RawTriple]:
    sub = IRI(vocab.RDFS_SUBPROPERTYOF)
    preds = [IRI(similarity_predicate(base_property, t, namespace)) for t in sorted(thresholds)]
    return [(hi, sub, lo) for lo, hi in zip(preds, preds[1:])]


def similarity_triples(graph: EncodedGraph, config: SimilarityConfig | None = None) -> list[RawTriple]:
    """Similarity edges for every datatype property of ``graph``."""
    config = config or SimilarityConfig()
    lowest = config.thresholds[0]
    out: list[RawTriple] = []
    for prop, bucket in sorted(bucket_literals(graph).items()):
        prop_iri = graph.term(prop).lexical
        strings = [(s, lit) for s, lit in bucket if not is_numeric_literal(lit)]
        numbers = [(s, lit) for s, lit in bucket if is_numeric_literal(lit)]
        pairs = []
        if len(strings) > 1:
            pairs += string_similarity_join(strings, lowest, config.q)
        if len(numbers) > 1:
            pairs += numeric_similarity_join(numbers, config.numeric_bound(prop_iri))[0]
        pairs = _subject_pairs(pairs)
        if not pairs:
            continue
        decoded = [(graph.term(a), graph.term(b), sim) for a, b, sim in pairs]
        out += emit_similarity_triples(decoded, prop_iri, config.thresholds, config.namespace)
        if config.emit_hierarchy:
            out += hierarchy_triples(prop_iri, config.thresholds, config.namespace)
        logger.info("similarity join on %s: %d subject pairs", prop_iri, len(pairs))
    return out
