"""Two-step grounding of Horn rules into a ground Markov network.

Step one derives every statement the rules can reach from the evidence
(semi-naive, closed world).  Step two materializes one factor per rule
instantiation that touches at least one derived statement.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .mining import HornRule, RuleClass
from .rdf import EncodedGraph, TermDictionary, TripleId, term_to_nt
from .rdf.ntriples import _read_term

logger = logging.getLogger(__name__)


class GroundingLimitError(RuntimeError):
    pass


class AtomStatus(Enum):
    EVIDENCE = "evidence"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class GroundAtom:
    triple: TripleId
    status: AtomStatus


@dataclass(frozen=True)
class Factor:
    rule_id: int
    body: tuple[int, ...]
    head: int
    weight: float


class _Facts:
    """Per-predicate subject and object maps over a growing fact set."""

    def __init__(self):
        self.sub: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
        self.obj: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))

    def add(self, s: int, p: int, o: int) -> bool:
        objs = self.sub[p][s]
        if o in objs:
            return False
        objs.add(o)
        self.obj[p][o].add(s)
        return True

    def has(self, s: int, p: int, o: int) -> bool:
        m = self.sub.get(p)
        if m is None:
            return False
        objs = m.get(s)
        return objs is not None and o in objs

    def objects(self, s: int, p: int) -> set[int]:
        m = self.sub.get(p)
        return m.get(s, ()) if m is not None else ()

    def subjects(self, o: int, p: int) -> set[int]:
        m = self.obj.get(p)
        return m.get(o, ()) if m is not None else ()


def _a_by_z(facts: _Facts, cls: RuleClass, a: int, z: int):
    """x values with a-atom satisfied for join value z."""
    if cls in (RuleClass.C3, RuleClass.C5):  # a(z,x)
        return facts.objects(z, a)
    return facts.subjects(z, a)  # a(x,z)


def _b_by_z(facts: _Facts, cls: RuleClass, b: int, z: int):
    if cls in (RuleClass.C3, RuleClass.C4):  # b(z,y)
        return facts.objects(z, b)
    return facts.subjects(z, b)  # b(y,z)


def _a_parts(cls: RuleClass, s: int, o: int) -> tuple[int, int]:
    """(x, z) from a fact matching atom a."""
    return (o, s) if cls in (RuleClass.C3, RuleClass.C5) else (s, o)


def _b_parts(cls: RuleClass, s: int, o: int) -> tuple[int, int]:
    """(y, z) from a fact matching atom b."""
    return (o, s) if cls in (RuleClass.C3, RuleClass.C4) else (s, o)


def _a_atom(cls: RuleClass, a: int, x: int, z: int) -> TripleId:
    return (z, a, x) if cls in (RuleClass.C3, RuleClass.C5) else (x, a, z)


def _b_atom(cls: RuleClass, b: int, y: int, z: int) -> TripleId:
    return (z, b, y) if cls in (RuleClass.C3, RuleClass.C4) else (y, b, z)


def _instantiations_from(rule: HornRule, facts: _Facts, delta: dict[int, list[tuple[int, int]]]
                         ) -> Iterator[tuple[tuple[TripleId, ...], TripleId]]:
    """Rule instantiations over ``facts`` with at least one body atom in ``delta``."""
    cls, a, b, c = rule.cls, rule.a, rule.b, rule.c
    if cls is RuleClass.C1:
        for s, o in delta.get(a, ()):
            yield ((s, a, o),), (s, c, o)
        return
    if cls is RuleClass.C2:
        for s, o in delta.get(a, ()):
            yield ((s, a, o),), (o, c, s)
        return
    for s, o in delta.get(a, ()):
        x, z = _a_parts(cls, s, o)
        for y in _b_by_z(facts, cls, b, z):
            yield ((s, a, o), _b_atom(cls, b, y, z)), (x, c, y)
    for s, o in delta.get(b, ()):
        y, z = _b_parts(cls, s, o)
        for x in _a_by_z(facts, cls, a, z):
            yield (_a_atom(cls, a, x, z), (s, b, o)), (x, c, y)


def infer_closure(graph: EncodedGraph, rules: Sequence[HornRule], max_derived: int | None = None
                  ) -> set[TripleId]:
    """Statements derivable from ``graph`` under ``rules`` but absent from it."""
    if not rules:
        return set()
    if max_derived is None:
        max_derived = 20 * max(len(graph), 1)
    relevant = {r.a for r in rules} | {r.b for r in rules if r.b is not None} | {r.c for r in rules}
    facts = _Facts()
    delta: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for p in relevant:
        for s, objs in graph.pso.get(p, {}).items():
            for o in objs:
                facts.add(s, p, o)
                delta[p].append((s, o))

    derived: set[TripleId] = set()
    per_rule = [0] * len(rules)
    rounds = 0
    while delta:
        rounds += 1
        fresh: dict[int, set[tuple[int, int]]] = defaultdict(set)
        for rid, rule in enumerate(rules):
            for _, (s, p, o) in _instantiations_from(rule, facts, delta):
                if not facts.has(s, p, o) and (s, o) not in fresh[p]:
                    fresh[p].add((s, o))
                    per_rule[rid] += 1
        delta = defaultdict(list)
        for p, pairs in fresh.items():
            for s, o in sorted(pairs):
                facts.add(s, p, o)
                derived.add((s, p, o))
                delta[p].append((s, o))
        if len(derived) > max_derived:
            worst = max(range(len(rules)), key=per_rule.__getitem__)
            raise GroundingLimitError(
                f"grounding derived {len(derived)} atoms (cap {max_derived}); "
                f"most productive rule #{worst}: {rules[worst].cls.value} "
                f"a={rules[worst].a} b={rules[worst].b} c={rules[worst].c}")
        delta = {p: v for p, v in delta.items() if v}
    logger.info("closure: %d rounds, %d hidden atoms", rounds, len(derived))
    return derived


class GroundNetwork:
    """Evidence and hidden atoms plus clause factors ``~body1 | ~body2 | head``.

    Atoms are stored in canonical ``(s, p, o)`` order.  Factor arrays hold
    atom indices; ``factor_body[:, 1] == -1`` for single-atom bodies.
    """

    def __init__(self, atoms: np.ndarray, hidden: np.ndarray, factor_rule: np.ndarray,
                 factor_body: np.ndarray, factor_head: np.ndarray, factor_weight: np.ndarray,
                 dictionary: TermDictionary | None = None):
        self.atoms = np.asarray(atoms, dtype=np.int64).reshape(-1, 3)
        self.hidden = np.asarray(hidden, dtype=bool)
        self.factor_rule = np.asarray(factor_rule, dtype=np.int64)
        self.factor_body = np.asarray(factor_body, dtype=np.int64).reshape(-1, 2)
        self.factor_head = np.asarray(factor_head, dtype=np.int64)
        self.factor_weight = np.asarray(factor_weight, dtype=np.float64)
        self.dictionary = dictionary
        self.hidden_indices = np.flatnonzero(self.hidden)
        self._build_adjacency()
        self._index: dict[TripleId, int] | None = None

    def _build_adjacency(self):
        n, nf = len(self.atoms), len(self.factor_head)
        atoms = np.concatenate([self.factor_head, self.factor_body[:, 0], self.factor_body[:, 1]])
        facs = np.tile(np.arange(nf, dtype=np.int64), 3)
        keep = atoms >= 0
        keys = np.unique(atoms[keep] * max(nf, 1) + facs[keep])
        members = keys // max(nf, 1)
        self.adj_idx = (keys % max(nf, 1)).astype(np.int64)
        self.adj_ptr = np.concatenate([[0], np.cumsum(np.bincount(members, minlength=n))]).astype(np.int64)

    # -- sizes ------------------------------------------------------------------
    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_indices)

    @property
    def n_evidence(self) -> int:
        return self.n_atoms - self.n_hidden

    @property
    def n_factors(self) -> int:
        return len(self.factor_head)

    # -- views ------------------------------------------------------------------
    def atom(self, i: int) -> GroundAtom:
        return GroundAtom(tuple(int(v) for v in self.atoms[i]),
                          AtomStatus.HIDDEN if self.hidden[i] else AtomStatus.EVIDENCE)

    def factor(self, k: int) -> Factor:
        body = tuple(int(v) for v in self.factor_body[k] if v >= 0)
        return Factor(int(self.factor_rule[k]), body, int(self.factor_head[k]), float(self.factor_weight[k]))

    def factors(self) -> list[Factor]:
        return [self.factor(k) for k in range(self.n_factors)]

    def adjacency(self, i: int) -> list[int]:
        return self.adj_idx[self.adj_ptr[i]:self.adj_ptr[i + 1]].tolist()

    def index_of(self, triple: TripleId) -> int | None:
        if self._index is None:
            self._index = {tuple(t): i for i, t in enumerate(self.atoms.tolist())}
        return self._index.get(tuple(triple))

    def hidden_triples(self) -> list[TripleId]:
        return [tuple(t) for t in self.atoms[self.hidden_indices].tolist()]

    @classmethod
    def from_factors(cls, n_hidden: int, factors: Iterable[tuple[Sequence[int], int, float]],
                     n_evidence: int = 0) -> "GroundNetwork":
        """Synthetic network: atoms ``0..n_hidden-1`` hidden, the rest evidence.

        Each factor is ``(body_atoms, head_atom, weight)``.
        """
        n = n_hidden + n_evidence
        atoms = np.array([(i, 0, 0) for i in range(n)], dtype=np.int64).reshape(-1, 3)
        hidden = np.arange(n) < n_hidden
        rows = list(factors)
        body = np.full((len(rows), 2), -1, dtype=np.int64)
        for k, (b, _, _) in enumerate(rows):
            body[k, :len(b)] = list(b)
        return cls(atoms, hidden, np.zeros(len(rows), dtype=np.int64), body,
                   np.array([h for _, h, _ in rows], dtype=np.int64),
                   np.array([w for _, _, w in rows], dtype=np.float64))


def _head_instantiations(rule: HornRule, facts: _Facts, x: int, y: int) -> Iterator[tuple[TripleId, ...]]:
    """Bodies over ``facts`` that derive ``c(x, y)``."""
    cls, a, b = rule.cls, rule.a, rule.b
    if cls is RuleClass.C1:
        if facts.has(x, a, y):
            yield ((x, a, y),)
        return
    if cls is RuleClass.C2:
        if facts.has(y, a, x):
            yield ((y, a, x),)
        return
    # z candidates from atom a, then check atom b
    zs = facts.subjects(x, a) if cls in (RuleClass.C3, RuleClass.C5) else facts.objects(x, a)
    for z in zs:
        batom = _b_atom(cls, b, y, z)
        if facts.has(*batom):
            yield (_a_atom(cls, a, x, z), batom)


def build_factor_graph(graph: EncodedGraph, rules: Sequence[HornRule], hidden: Iterable[TripleId],
                       dictionary: TermDictionary | None = None) -> GroundNetwork:
    """One factor per rule instantiation touching a hidden atom."""
    hidden = set(hidden)
    hidden -= graph.triple_set
    facts = _Facts()
    for s, p, o in graph:
        facts.add(s, p, o)
    for s, p, o in hidden:
        facts.add(s, p, o)
    by_pred: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for s, p, o in sorted(hidden):
        by_pred[p].append((s, o))

    ground: set[tuple[int, tuple[TripleId, ...], TripleId]] = set()
    for rid, rule in enumerate(rules):
        for body, head in _instantiations_from(rule, facts, by_pred):
            if not facts.has(*head):
                raise ValueError(f"hidden set not closed under rule #{rid}: missing {head}")
            ground.add((rid, body, head))
        for x, y in by_pred.get(rule.c, ()):
            for body in _head_instantiations(rule, facts, x, y):
                ground.add((rid, body, (x, rule.c, y)))

    atom_list = sorted(set(graph.triple_set) | hidden)
    index = {t: i for i, t in enumerate(atom_list)}
    atoms = np.array(atom_list, dtype=np.int64).reshape(-1, 3)
    is_hidden = np.array([t in hidden for t in atom_list], dtype=bool)

    rows = sorted((rid, tuple(index[t] for t in body), index[head]) for rid, body, head in ground)
    n = len(rows)
    f_rule = np.array([r[0] for r in rows], dtype=np.int64)
    f_body = np.full((n, 2), -1, dtype=np.int64)
    for k, (_, body, _) in enumerate(rows):
        f_body[k, :len(body)] = body
    f_head = np.array([r[2] for r in rows], dtype=np.int64)
    f_weight = np.array([rules[r[0]].weight for r in rows], dtype=np.float64)
    net = GroundNetwork(atoms, is_hidden, f_rule, f_body, f_head, f_weight,
                        dictionary if dictionary is not None else graph.dictionary)
    logger.info("factor graph: %d atoms (%d hidden), %d factors", net.n_atoms, net.n_hidden, net.n_factors)
    return net


def ground(graph: EncodedGraph, rules: Sequence[HornRule], dictionary: TermDictionary | None = None,
           max_derived: int | None = None) -> GroundNetwork:
    hidden = infer_closure(graph, rules, max_derived)
    return build_factor_graph(graph, rules, hidden, dictionary)


# -- factor dump -----------------------------------------------------------------------

def _atom_text(network: GroundNetwork, i: int) -> str:
    d = network.dictionary
    return "|".join(term_to_nt(d.term(int(t))) for t in network.atoms[i])


def write_factor_dump(network: GroundNetwork, path: str | Path) -> int:
    """``ruleId<TAB>bodyAtoms<TAB>headAtom<TAB>weight``; body atoms space-separated."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k in range(network.n_factors):
            body = " ".join(_atom_text(network, int(a)) for a in network.factor_body[k] if a >= 0)
            fh.write(f"{network.factor_rule[k]}\t{body}\t{_atom_text(network, int(network.factor_head[k]))}"
                     f"\t{float(network.factor_weight[k])!r}\n")
    return network.n_factors


def _parse_atom(text: str):
    terms, pos = [], 0
    for k in range(3):
        term, pos = _read_term(text, pos)
        terms.append(term)
        if k < 2:
            if text[pos:pos + 1] != "|":
                raise ValueError(f"bad atom {text!r}")
            pos += 1
    return tuple(terms), pos


def read_factor_dump(path: str | Path) -> list[tuple[int, list[tuple], tuple, float]]:
    """Rows of ``(rule_id, body_atoms, head_atom, weight)`` with decoded terms."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns")
            body, text = [], cols[1]
            while text:
                atom, end = _parse_atom(text)
                body.append(atom)
                text = text[end:].lstrip(" ")
            head, _ = _parse_atom(cols[2])
            rows.append((int(cols[0]), body, head, float(cols[3])))
    return rows


def network_from_dump(rows, graph: EncodedGraph, hidden: Iterable[TripleId],
                      dictionary: TermDictionary | None = None) -> GroundNetwork:
    """Rebuild a network from a factor dump plus the evidence graph and hidden atoms."""
    d = dictionary if dictionary is not None else graph.dictionary
    hidden = set(hidden) - graph.triple_set
    atom_list = sorted(set(graph.triple_set) | hidden)
    index = {t: i for i, t in enumerate(atom_list)}

    def ref(atom):
        ids = tuple(d.id_of(t) for t in atom)
        if None in ids or ids not in index:
            raise ValueError(f"factor atom {atom} is neither evidence nor hidden")
        return index[ids]

    n = len(rows)
    f_body = np.full((n, 2), -1, dtype=np.int64)
    for k, (_, body, _, _) in enumerate(rows):
        f_body[k, :len(body)] = [ref(a) for a in body]
    atoms = np.array(atom_list, dtype=np.int64).reshape(-1, 3)
    is_hidden = np.array([t in hidden for t in atom_list], dtype=bool)
    return GroundNetwork(atoms, is_hidden, np.array([r[0] for r in rows], dtype=np.int64), f_body,
                         np.array([ref(r[2]) for r in rows], dtype=np.int64),
                         np.array([r[3] for r in rows], dtype=np.float64), d)


__all__ = [
    "AtomStatus", "Factor", "GroundAtom", "GroundNetwork", "GroundingLimitError", "build_factor_graph",
    "ground", "infer_closure", "network_from_dump", "read_factor_dump", "write_factor_dump",
]
