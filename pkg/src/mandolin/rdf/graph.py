"""Dictionary-encoded triple store."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Iterator

from .ntriples import RawTriple, Term

TripleId = tuple[int, int, int]


class GraphError(ValueError):
    pass


class TermDictionary:
    """Bijection between terms and dense integer ids (first-seen order)."""

    def __init__(self, terms: Iterable[Term] = ()):
        self._terms: list[Term] = []
        self._ids: dict[Term, int] = {}
        for t in terms:
            self.add(t)

    def add(self, term: Term) -> int:
        tid = self._ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._terms.append(term)
            self._ids[term] = tid
        return tid

    def id_of(self, term: Term) -> int | None:
        return self._ids.get(term)

    def term(self, tid: int) -> Term:
        return self._terms[tid]

    def __contains__(self, term: Term) -> bool:
        return term in self._ids

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Term]:
        return iter(self._terms)

    def copy(self) -> "TermDictionary":
        d = TermDictionary()
        d._terms = list(self._terms)
        d._ids = dict(self._ids)
        return d

    def encode_triple(self, triple: RawTriple) -> TripleId:
        s, p, o = triple
        return self.add(s), self.add(p), self.add(o)

    def decode_triple(self, triple: TripleId) -> RawTriple:
        s, p, o = triple
        return self._terms[s], self._terms[p], self._terms[o]


class EncodedGraph:
    """Immutable set of encoded triples with predicate-keyed indices.

    ``pso[p][s]`` lists the objects of ``s`` under ``p``; ``pos[p][o]`` the
    subjects; ``spo`` and ``ops`` key the remaining access paths.  All lists
    are sorted.
    """

    def __init__(self, dictionary: TermDictionary, triples: Iterable[TripleId]):
        self.dictionary = dictionary
        uniq = set(triples)
        terms = dictionary._terms
        for s, p, o in uniq:
            if terms[s].is_literal:
                raise GraphError(f"literal in subject position: {dictionary.decode_triple((s, p, o))}")
            if not terms[p].is_iri:
                raise GraphError(f"non-IRI predicate: {dictionary.decode_triple((s, p, o))}")
        self._triples: list[TripleId] = sorted(uniq)
        self._set = frozenset(uniq)

        pso: dict[int, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
        pos: dict[int, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
        by_s: dict[int, list[tuple[int, int]]] = defaultdict(list)
        by_o: dict[int, list[tuple[int, int]]] = defaultdict(list)
        # _triples is sorted by (s, p, o) so every list below comes out sorted
        for s, p, o in self._triples:
            pso[p][s].append(o)
            by_s[s].append((p, o))
        for s, p, o in sorted(self._triples, key=lambda t: (t[2], t[1], t[0])):
            pos[p][o].append(s)
            by_o[o].append((s, p))
        self.pso = {p: dict(m) for p, m in pso.items()}
        self.pos = {p: dict(m) for p, m in pos.items()}
        self._by_s = dict(by_s)
        self._by_o = dict(by_o)
        self.predicate_counts = {p: sum(len(v) for v in m.values()) for p, m in self.pso.items()}
        self._nodes: frozenset[int] | None = None

    # -- basic container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[TripleId]:
        return iter(self._triples)

    def __contains__(self, triple) -> bool:
        return triple in self._set

    @property
    def triples(self) -> list[TripleId]:
        return self._triples

    @property
    def triple_set(self) -> frozenset[TripleId]:
        return self._set

    # -- decoding ---------------------------------------------------------------
    def term(self, tid: int) -> Term:
        return self.dictionary.term(tid)

    def id_of(self, term: Term) -> int | None:
        return self.dictionary.id_of(term)

    def decode(self, triple: TripleId) -> RawTriple:
        return self.dictionary.decode_triple(triple)

    def decoded(self) -> set[RawTriple]:
        return {self.dictionary.decode_triple(t) for t in self._triples}

    def iter_decoded(self) -> Iterator[RawTriple]:
        for t in self._triples:
            yield self.dictionary.decode_triple(t)

    # -- structure --------------------------------------------------------------
    def predicates(self) -> list[int]:
        return sorted(self.pso)

    def nodes(self) -> frozenset[int]:
        """Ids occurring as subject or object."""
        if self._nodes is None:
            self._nodes = frozenset(self._by_s) | frozenset(self._by_o)
        return self._nodes

    def index_pso(self, p: int) -> list[tuple[int, int]]:
        return [(s, o) for s, objs in sorted(self.pso.get(p, {}).items()) for o in objs]

    def objects(self, s: int, p: int) -> list[int]:
        return self.pso.get(p, {}).get(s, [])

    def subjects(self, o: int, p: int) -> list[int]:
        return self.pos.get(p, {}).get(o, [])

    def query(self, s: int | None = None, p: int | None = None, o: int | None = None) -> Iterator[TripleId]:
        """Yield the triples matching a pattern; ``None`` is a wildcard."""
        if p is not None:
            if s is not None and o is not None:
                if (s, p, o) in self._set:
                    yield (s, p, o)
            elif s is not None:
                for obj in self.objects(s, p):
                    yield (s, p, obj)
            elif o is not None:
                for subj in self.subjects(o, p):
                    yield (subj, p, o)
            else:
                for subj, objs in self.pso.get(p, {}).items():
                    for obj in objs:
                        yield (subj, p, obj)
        elif s is not None:
            for pred, obj in self._by_s.get(s, ()):
                if o is None or obj == o:
                    yield (s, pred, obj)
        elif o is not None:
            for subj, pred in self._by_o.get(o, ()):
                yield (subj, pred, o)
        else:
            yield from self._triples

    def with_triples(self, extra: Iterable[TripleId], dictionary: TermDictionary | None = None) -> "EncodedGraph":
        """New graph holding these triples plus ``extra`` (ids in ``dictionary``)."""
        d = dictionary if dictionary is not None else self.dictionary
        return EncodedGraph(d, list(self._triples) + list(extra))


def encode(raw: Iterable[RawTriple], dictionary: TermDictionary | None = None) -> EncodedGraph:
    """Encode raw triples; terms get ids in first-seen order."""
    d = dictionary.copy() if dictionary is not None else TermDictionary()
    ids = []
    for triple in raw:
        if triple[0].is_literal:
            raise GraphError(f"literal in subject position: {triple}")
        ids.append(d.encode_triple(triple))
    return EncodedGraph(d, ids)


def merge(g: EncodedGraph, h: EncodedGraph) -> EncodedGraph:
    """Union of two graphs; ``h`` is re-encoded through ``g``'s dictionary."""
    d = g.dictionary.copy()
    mapped = [d.encode_triple(h.decode(t)) for t in h]
    return g.with_triples(mapped, d)


def empty_graph() -> EncodedGraph:
    return EncodedGraph(TermDictionary(), [])
