"""Horn-rule mining over six fixed body patterns.

Every rule has head ``c(x, y)`` and a body of one or two atoms:

    C1  a(x,y)            => c(x,y)
    C2  a(y,x)            => c(x,y)
    C3  a(z,x) & b(z,y)   => c(x,y)
    C4  a(x,z) & b(z,y)   => c(x,y)
    C5  a(z,x) & b(y,z)   => c(x,y)
    C6  a(x,z) & b(y,z)   => c(x,y)

Atom ``a`` always carries ``x`` and atom ``b`` always carries ``y``, so a
rule is identified by its class and predicate tuple.  Statistics follow the
AMIE conventions: support counts distinct ``(x, y)`` bindings of body and
head, head coverage divides by the head size, and PCA confidence divides
by the body bindings whose ``x`` has at least one ``c`` fact.
"""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .rdf import IRI, EncodedGraph, TermDictionary

logger = logging.getLogger(__name__)


class RuleClass(Enum):
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"
    C6 = "C6"

    @property
    def index(self) -> int:
        return int(self.value[1])

    @property
    def binary(self) -> bool:
        return self.index >= 3

    @property
    def a_args(self) -> tuple[str, str]:
        return {1: ("x", "y"), 2: ("y", "x"), 3: ("z", "x"), 4: ("x", "z"), 5: ("z", "x"), 6: ("x", "z")}[self.index]

    @property
    def b_args(self) -> tuple[str, str] | None:
        return {3: ("z", "y"), 4: ("z", "y"), 5: ("y", "z"), 6: ("y", "z")}.get(self.index)


UNARY_CLASSES = (RuleClass.C1, RuleClass.C2)
BINARY_CLASSES = (RuleClass.C3, RuleClass.C4, RuleClass.C5, RuleClass.C6)
ALL_CLASSES = UNARY_CLASSES + BINARY_CLASSES


@dataclass(frozen=True)
class HornRule:
    cls: RuleClass
    a: int
    b: int | None
    c: int
    support: int = 0
    head_coverage: float = 0.0
    pca_confidence: float = 0.0
    weight: float = 0.0

    def __post_init__(self):
        if (self.b is not None) != self.cls.binary:
            raise ValueError(f"{self.cls.value} rules {'need' if self.cls.binary else 'take no'} second body atom")

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.cls.index, self.a, -1 if self.b is None else self.b, self.c)

    @property
    def body_size(self) -> int:
        return 2 if self.cls.binary else 1

    def describe(self, dictionary: TermDictionary | None = None) -> str:
        def name(p):
            return dictionary.term(p).lexical if dictionary is not None else str(p)
        body = [f"{name(self.a)}({','.join(self.cls.a_args)})"]
        if self.b is not None:
            body.append(f"{name(self.b)}({','.join(self.cls.b_args)})")
        return f"{' ^ '.join(body)} => {name(self.c)}(x,y)"


@dataclass
class MiningConfig:
    min_head_coverage: float = 0.9
    min_support: int = 1
    max_rules: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.min_head_coverage <= 1.0:
            raise ValueError("minimum head coverage must lie in [0, 1]")
        if self.min_support < 1:
            raise ValueError("minimum support must be at least 1")


def body_bindings(graph: EncodedGraph, cls: RuleClass, a: int, b: int | None = None) -> set[tuple[int, int]]:
    """Distinct ``(x, y)`` pairs for which the rule body is satisfiable."""
    if cls is RuleClass.C1:
        return {(s, o) for s, objs in graph.pso.get(a, {}).items() for o in objs}
    if cls is RuleClass.C2:
        return {(o, s) for s, objs in graph.pso.get(a, {}).items() for o in objs}
    # map join-variable z -> x values (atom a) and z -> y values (atom b)
    a_map = (graph.pso if cls in (RuleClass.C3, RuleClass.C5) else graph.pos).get(a, {})
    b_map = (graph.pso if cls in (RuleClass.C3, RuleClass.C4) else graph.pos).get(b, {})
    if len(b_map) < len(a_map):
        out = set()
        for z, ys in b_map.items():
            xs = a_map.get(z)
            if xs:
                out.update((x, y) for x in xs for y in ys)
        return out
    out = set()
    for z, xs in a_map.items():
        ys = b_map.get(z)
        if ys:
            out.update((x, y) for x in xs for y in ys)
    return out


class RuleEvaluator:
    """Rule statistics on one graph, caching body bindings per body."""

    def __init__(self, graph: EncodedGraph):
        self.graph = graph
        self._bodies: dict[tuple, frozenset] = {}
        self._heads: dict[int, frozenset] = {}
        self._head_subjects: dict[int, frozenset] = {}

    def body(self, cls: RuleClass, a: int, b: int | None = None) -> frozenset:
        key = (cls, a, b)
        if key not in self._bodies:
            self._bodies[key] = frozenset(body_bindings(self.graph, cls, a, b))
        return self._bodies[key]

    def head(self, c: int) -> frozenset:
        if c not in self._heads:
            self._heads[c] = frozenset((s, o) for s, objs in self.graph.pso.get(c, {}).items() for o in objs)
        return self._heads[c]

    def head_subjects(self, c: int) -> frozenset:
        if c not in self._head_subjects:
            self._head_subjects[c] = frozenset(self.graph.pso.get(c, {}))
        return self._head_subjects[c]

    def support(self, rule: HornRule) -> int:
        body = self.body(rule.cls, rule.a, rule.b)
        head = self.head(rule.c)
        small, big = (body, head) if len(body) <= len(head) else (head, body)
        return sum(1 for pair in small if pair in big)

    def head_coverage(self, rule: HornRule) -> float:
        size = len(self.head(rule.c))
        if size == 0:
            raise ValueError("head predicate has no facts")
        return self.support(rule) / size

    def pca_confidence(self, rule: HornRule) -> float:
        subjects = self.head_subjects(rule.c)
        denom = sum(1 for x, _ in self.body(rule.cls, rule.a, rule.b) if x in subjects)
        return self.support(rule) / denom if denom else 0.0

    def evaluate(self, rule: HornRule) -> HornRule:
        return replace(rule, support=self.support(rule), head_coverage=self.head_coverage(rule),
                       pca_confidence=self.pca_confidence(rule))


def support(rule: HornRule, graph: EncodedGraph) -> int:
    return RuleEvaluator(graph).support(rule)


def head_coverage(rule: HornRule, graph: EncodedGraph) -> float:
    return RuleEvaluator(graph).head_coverage(rule)


def pca_confidence(rule: HornRule, graph: EncodedGraph) -> float:
    return RuleEvaluator(graph).pca_confidence(rule)


def mine_rules(graph: EncodedGraph, config: MiningConfig | None = None) -> list[HornRule]:
    """Every rule of the six classes with support >= ``min_support``.

    Bodies are enumerated once; head predicates are then read off a pair
    index, so a body that never co-occurs with any fact costs one join.
    Trivial ``a(x,y) => a(x,y)`` rules are never emitted.
    """
    config = config or MiningConfig()
    preds = graph.predicates()
    pair_preds: dict[tuple[int, int], list[int]] = defaultdict(list)
    subj_preds: dict[int, list[int]] = {}
    for s, p, o in graph:
        pair_preds[s, o].append(p)
    for p in preds:
        for s in graph.pso[p]:
            subj_preds.setdefault(s, []).append(p)
    head_size = graph.predicate_counts

    bodies: list[tuple[RuleClass, int, int | None]] = [(cls, a, None) for cls in UNARY_CLASSES for a in preds]
    bodies += [(cls, a, b) for cls in BINARY_CLASSES for a in preds for b in preds]

    rules: list[HornRule] = []
    for cls, a, b in bodies:
        body = body_bindings(graph, cls, a, b)
        if not body:
            continue
        sup: Counter = Counter()
        for pair in body:
            for c in pair_preds.get(pair, ()):
                sup[c] += 1
        if not sup:
            continue
        x_counts = Counter(x for x, _ in body)
        denom: Counter = Counter()
        for x, n in x_counts.items():
            for c in subj_preds.get(x, ()):
                denom[c] += n
        for c, s in sup.items():
            if s < config.min_support or (cls is RuleClass.C1 and a == c):
                continue
            rules.append(HornRule(cls, a, b, c, support=s, head_coverage=s / head_size[c],
                                  pca_confidence=s / denom[c]))
    rules.sort(key=lambda r: r.key)
    if config.max_rules is not None and len(rules) > config.max_rules:
        logger.warning("mined %d rules, truncating to the %d most confident", len(rules), config.max_rules)
        rules = sorted(rules, key=lambda r: (-r.pca_confidence, r.key))[:config.max_rules]
        rules.sort(key=lambda r: r.key)
    logger.info("mined %d rules over %d predicates", len(rules), len(preds))
    return rules


def filter_rules(rules: Iterable[HornRule], min_head_coverage: float) -> list[HornRule]:
    return [r for r in rules if r.head_coverage >= min_head_coverage]


CONFIDENCE_FLOOR = 0.001
CONFIDENCE_CEIL = 0.999


def rule_to_weight(rule: HornRule | float) -> float:
    """Log-odds of the clamped PCA confidence."""
    conf = rule.pca_confidence if isinstance(rule, HornRule) else float(rule)
    conf = min(max(conf, CONFIDENCE_FLOOR), CONFIDENCE_CEIL)
    return math.log(conf / (1.0 - conf))


def interpret(rules: Iterable[HornRule], min_head_coverage: float) -> list[HornRule]:
    """Filter by head coverage and attach weights."""
    return [replace(r, weight=rule_to_weight(r)) for r in filter_rules(rules, min_head_coverage)]


# -- rule files -----------------------------------------------------------------------

RULE_COLUMNS = ("class", "a", "b", "c", "support", "head_coverage", "pca_confidence", "weight")


def write_rules(rules: Sequence[HornRule], path: str | Path, dictionary: TermDictionary) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(RULE_COLUMNS) + "\n")
        for r in rules:
            b = "" if r.b is None else dictionary.term(r.b).lexical
            fh.write("\t".join([r.cls.value, dictionary.term(r.a).lexical, b, dictionary.term(r.c).lexical,
                                str(r.support), repr(r.head_coverage), repr(r.pca_confidence),
                                repr(r.weight)]) + "\n")
    return len(rules)


def _iri(text: str) -> str:
    text = text.strip()
    if text.startswith("<") and text.endswith(">"):
        text = text[1:-1]
    return text


def read_rules(path: str | Path, dictionary: TermDictionary) -> list[HornRule]:
    """Load a rule file; predicates missing from ``dictionary`` are added to it."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != RULE_COLUMNS:
            raise ValueError(f"{path}: unexpected rule file header {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != len(RULE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(RULE_COLUMNS)} columns")
            cls = RuleClass(cols[0])
            a = dictionary.add(IRI(_iri(cols[1])))
            b = dictionary.add(IRI(_iri(cols[2]))) if cols[2].strip() else None
            c = dictionary.add(IRI(_iri(cols[3])))
            rules.append(HornRule(cls, a, b, c, support=int(cols[4]), head_coverage=float(cols[5]),
                                  pca_confidence=float(cols[6]), weight=float(cols[7])))
    return rules
