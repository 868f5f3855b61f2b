"""Forward chaining of schema entailment rules to a least fixpoint."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .. import vocab
from ..rdf import IRI, EncodedGraph, TripleId

logger = logging.getLogger(__name__)


class ClosureLimitError(RuntimeError):
    pass


Pattern = tuple[str, str, str]


@dataclass(frozen=True)
class ClosureRule:
    """Body atoms and head over variables (``?x``) and constant IRIs."""

    name: str
    body: tuple[Pattern, ...]
    head: Pattern

    def __post_init__(self):
        body_vars = {t for atom in self.body for t in atom if t.startswith("?")}
        head_vars = {t for t in self.head if t.startswith("?")}
        if not head_vars <= body_vars:
            raise ValueError(f"rule {self.name} is not range-restricted")


def _rules() -> tuple[ClosureRule, ...]:
    T, DOM, RNG = vocab.RDF_TYPE, vocab.RDFS_DOMAIN, vocab.RDFS_RANGE
    SPO, SCO, SAME = vocab.RDFS_SUBPROPERTYOF, vocab.RDFS_SUBCLASSOF, vocab.OWL_SAMEAS
    INV = vocab.OWL_INVERSEOF
    return (
        ClosureRule("rdfs2", (("?p", DOM, "?c"), ("?x", "?p", "?y")), ("?x", T, "?c")),
        ClosureRule("rdfs3", (("?p", RNG, "?c"), ("?x", "?p", "?y")), ("?y", T, "?c")),
        ClosureRule("rdfs5", (("?p", SPO, "?q"), ("?q", SPO, "?r")), ("?p", SPO, "?r")),
        ClosureRule("rdfs7", (("?p", SPO, "?q"), ("?x", "?p", "?y")), ("?x", "?q", "?y")),
        ClosureRule("rdfs9", (("?c", SCO, "?d"), ("?x", T, "?c")), ("?x", T, "?d")),
        ClosureRule("rdfs11", (("?c", SCO, "?d"), ("?d", SCO, "?e")), ("?c", SCO, "?e")),
        ClosureRule("sameas-sym", (("?a", SAME, "?b"),), ("?b", SAME, "?a")),
        ClosureRule("sameas-trans", (("?a", SAME, "?b"), ("?b", SAME, "?c")), ("?a", SAME, "?c")),
        ClosureRule("inverse-1", (("?p", INV, "?q"), ("?x", "?p", "?y")), ("?y", "?q", "?x")),
        ClosureRule("inverse-2", (("?p", INV, "?q"), ("?x", "?q", "?y")), ("?y", "?p", "?x")),
        ClosureRule("symmetric", (("?p", T, vocab.OWL_SYMMETRIC), ("?x", "?p", "?y")), ("?y", "?p", "?x")),
        ClosureRule("transitive", (("?p", T, vocab.OWL_TRANSITIVE), ("?x", "?p", "?y"), ("?y", "?p", "?z")),
                    ("?x", "?p", "?z")),
    )


DEFAULT_RULES: tuple[ClosureRule, ...] = _rules()


class TripleStore:
    """Mutable triple set indexed on every access path."""

    def __init__(self, triples: Iterable[TripleId] = ()):
        self.all: set[TripleId] = set()
        self.sp = defaultdict(set)
        self.po = defaultdict(set)
        self.so = defaultdict(set)
        self.s = defaultdict(set)
        self.p = defaultdict(set)
        self.o = defaultdict(set)
        for t in triples:
            self.add(t)

    def add(self, t: TripleId) -> bool:
        if t in self.all:
            return False
        s, p, o = t
        self.all.add(t)
        self.sp[s, p].add(o)
        self.po[p, o].add(s)
        self.so[s, o].add(p)
        self.s[s].add(t)
        self.p[p].add(t)
        self.o[o].add(t)
        return True

    def __len__(self):
        return len(self.all)

    def match(self, s: int | None, p: int | None, o: int | None) -> Iterator[TripleId]:
        if s is not None and p is not None and o is not None:
            if (s, p, o) in self.all:
                yield (s, p, o)
        elif s is not None and p is not None:
            for x in self.sp.get((s, p), ()):
                yield (s, p, x)
        elif p is not None and o is not None:
            for x in self.po.get((p, o), ()):
                yield (x, p, o)
        elif s is not None and o is not None:
            for x in self.so.get((s, o), ()):
                yield (s, x, o)
        elif s is not None:
            yield from self.s.get(s, ())
        elif p is not None:
            yield from self.p.get(p, ())
        elif o is not None:
            yield from self.o.get(o, ())
        else:
            yield from self.all


def _compile(rule: ClosureRule, dictionary) -> tuple | None:
    """Resolve constants to ids; ``None`` if a body constant is absent (rule cannot fire)."""
    body = []
    for atom in rule.body:
        ids = []
        for t in atom:
            if t.startswith("?"):
                ids.append(t)
            else:
                tid = dictionary.id_of(IRI(t))
                if tid is None:
                    return None
                ids.append(tid)
        body.append(tuple(ids))
    head = tuple(t if t.startswith("?") else dictionary.add(IRI(t)) for t in rule.head)
    return tuple(body), head


def _unify(atom, triple, binding):
    new = dict(binding)
    for t, v in zip(atom, triple):
        if isinstance(t, str):
            prev = new.get(t)
            if prev is None:
                new[t] = v
            elif prev != v:
                return None
        elif t != v:
            return None
    return new


def _solve(atoms, sources, binding):
    if not atoms:
        yield binding
        return
    atom, rest = atoms[0], atoms[1:]
    store = sources[0]
    pattern = [binding.get(t) if isinstance(t, str) else t for t in atom]
    for triple in store.match(*pattern):
        b = _unify(atom, triple, binding)
        if b is not None:
            yield from _solve(rest, sources[1:], b)


def _instantiate(head, binding):
    return tuple(binding[t] if isinstance(t, str) else t for t in head)


def forward_chain(graph: EncodedGraph, rules: Sequence[ClosureRule] = DEFAULT_RULES,
                  max_derived: int | None = None) -> EncodedGraph:
    """Least fixpoint of ``rules`` over ``graph`` by semi-naive evaluation.

    Each round joins at least one body atom against the triples derived in
    the previous round.  Derivations with a literal subject or a non-IRI
    predicate are discarded.
    """
    if max_derived is None:
        max_derived = max(10 * len(graph), 10_000)
    dictionary = graph.dictionary.copy()
    compiled = []
    for r in rules:
        c = _compile(r, dictionary)
        if c is not None:
            compiled.append((r.name, *c))
    terms = dictionary._terms

    def admissible(t):
        return not terms[t[0]].is_literal and terms[t[1]].is_iri

    full = TripleStore(graph)
    delta = TripleStore(graph)
    derived: list[TripleId] = []
    per_rule: dict[str, int] = defaultdict(int)
    rounds = 0
    while len(delta):
        rounds += 1
        fresh = TripleStore()
        for name, body, head in compiled:
            for k in range(len(body)):
                # atom k reads the frontier, all others read the full store
                order = [k] + [i for i in range(len(body)) if i != k]
                atoms = [body[i] for i in order]
                sources = [delta] + [full] * (len(body) - 1)
                for b in _solve(atoms, sources, {}):
                    t = _instantiate(head, b)
                    if t not in full.all and admissible(t) and fresh.add(t):
                        per_rule[name] += 1
        for t in fresh.all:
            full.add(t)
            derived.append(t)
        if len(derived) > max_derived:
            worst = max(per_rule, key=per_rule.get)
            raise ClosureLimitError(
                f"forward chaining derived {len(derived)} triples (cap {max_derived}); "
                f"most productive rule: {worst}")
        delta = fresh
    logger.info("forward chaining: %d rounds, %d derived triples", rounds, len(derived))
    return graph.with_triples(derived, dictionary)
