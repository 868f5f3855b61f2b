import random
from collections import Counter

import numpy as np
import pytest

from conftest import graph_of, iri, random_graph
from mandolin.grounding import (
    GroundingLimitError,
    GroundNetwork,
    build_factor_graph,
    ground,
    infer_closure,
    network_from_dump,
    read_factor_dump,
    write_factor_dump,
)
from mandolin.mining import HornRule, RuleClass


def instantiations(rule, facts):
    """Every (body, head) of ``rule`` over the triple set ``facts``, by scanning."""
    k, a, b, c = rule.cls.index, rule.a, rule.b, rule.c
    for t1 in facts:
        s1, p1, o1 = t1
        if p1 != a:
            continue
        if k == 1:
            yield (t1,), (s1, c, o1)
            continue
        if k == 2:
            yield (t1,), (o1, c, s1)
            continue
        for t2 in facts:
            s2, p2, o2 = t2
            if p2 != b:
                continue
            if k == 3 and s1 == s2:
                yield (t1, t2), (o1, c, o2)
            elif k == 4 and o1 == s2:
                yield (t1, t2), (s1, c, o2)
            elif k == 5 and s1 == o2:
                yield (t1, t2), (o1, c, s2)
            elif k == 6 and o1 == o2:
                yield (t1, t2), (s1, c, s2)


def naive_closure(graph, rules):
    facts = set(graph.triples)
    while True:
        new = {h for r in rules for _, h in instantiations(r, facts)} - facts
        if not new:
            return facts - set(graph.triples)
        facts |= new


def random_rules(rng, preds, n):
    rules = []
    for _ in range(n):
        cls = rng.choice([RuleClass.C1, RuleClass.C2, RuleClass.C3, RuleClass.C4, RuleClass.C5, RuleClass.C6])
        a, c = rng.choice(preds), rng.choice(preds)
        b = rng.choice(preds) if cls.binary else None
        rules.append(HornRule(cls, a, b, c, weight=round(rng.uniform(-3, 3), 3)))
    return rules


def test_empty_rules_no_hidden():
    g = graph_of("a p b")
    assert infer_closure(g, []) == set()


def test_single_application():
    g = graph_of("a p b")
    p, q = g.id_of(iri("p")), g.dictionary.add(iri("q"))
    hidden = infer_closure(g, [HornRule(RuleClass.C1, p, None, q, weight=1.5)])
    assert hidden == {(g.id_of(iri("a")), q, g.id_of(iri("b")))}
    net = build_factor_graph(g, [HornRule(RuleClass.C1, p, None, q, weight=1.5)], hidden)
    assert net.n_factors == 1
    f = net.factor(0)
    assert f.weight == 1.5
    assert net.atom(f.head).triple == (g.id_of(iri("a")), q, g.id_of(iri("b")))


def test_chained_rules_need_two_rounds():
    g = graph_of("a p b")
    d = g.dictionary
    p, q, r = d.id_of(iri("p")), d.add(iri("q")), d.add(iri("r"))
    a, b = d.id_of(iri("a")), d.id_of(iri("b"))
    rules = [HornRule(RuleClass.C1, p, None, q), HornRule(RuleClass.C1, q, None, r)]
    assert infer_closure(g, rules) == {(a, q, b), (a, r, b)}


@pytest.mark.parametrize("seed", range(12))
def test_semi_naive_equals_naive(seed):
    rng = random.Random(seed)
    g = random_graph(rng, n_nodes=10, n_preds=4, n_triples=30)
    rules = random_rules(rng, g.predicates(), 4)
    try:
        got = infer_closure(g, rules, max_derived=5000)
    except GroundingLimitError:
        pytest.skip("closure exceeded cap")
    assert got == naive_closure(g, rules)


@pytest.mark.parametrize("seed", range(12))
def test_factors_equal_brute_force(seed):
    rng = random.Random(50 + seed)
    g = random_graph(rng, n_nodes=8, n_preds=3, n_triples=20)
    rules = random_rules(rng, g.predicates(), 3)
    hidden = infer_closure(g, rules, max_derived=5000)
    net = build_factor_graph(g, rules, hidden)
    atoms = set(g.triples) | hidden
    expect = Counter()
    for rid, r in enumerate(rules):
        for body, head in set(instantiations(r, atoms)):
            if any(t in hidden for t in body + (head,)):
                expect[(rid, body, head)] += 1
    got = Counter()
    for f in net.factors():
        got[(f.rule_id, tuple(net.atom(i).triple for i in f.body), net.atom(f.head).triple)] += 1
    assert got == expect


def test_network_invariants(rng):
    g = random_graph(rng, n_nodes=10, n_preds=3, n_triples=30)
    rules = random_rules(rng, g.predicates(), 4)
    net = ground(g, rules, max_derived=10_000)
    assert net.n_atoms == len(g) + net.n_hidden
    assert set(net.hidden_triples()).isdisjoint(g.triple_set)
    order = [tuple(t) for t in net.atoms.tolist()]
    assert order == sorted(order)
    # adjacency is the exact inverse of membership
    member = {i: set() for i in range(net.n_atoms)}
    for k, f in enumerate(net.factors()):
        for a in f.body + (f.head,):
            member[a].add(k)
    for i in range(net.n_atoms):
        assert net.adjacency(i) == sorted(member[i])
    heads = {f.head for f in net.factors()}
    assert all(i in heads for i in net.hidden_indices)
    assert all(any(net.hidden[a] for a in f.body + (f.head,)) for f in net.factors())


def test_no_hidden_no_factors():
    g = graph_of("a p b", "a q b")
    p, q = g.id_of(iri("p")), g.id_of(iri("q"))
    net = ground(g, [HornRule(RuleClass.C1, p, None, q)])
    assert net.n_hidden == 0 and net.n_factors == 0


def test_evidence_head_factor_kept():
    # p(a,b) hidden via r; rule p => q with q(a,b) already evidence
    g = graph_of("a r b", "a q b")
    d = g.dictionary
    r, q, p = d.id_of(iri("r")), d.id_of(iri("q")), d.add(iri("p"))
    rules = [HornRule(RuleClass.C1, r, None, p), HornRule(RuleClass.C1, p, None, q)]
    net = ground(g, rules)
    rule_ids = sorted(f.rule_id for f in net.factors())
    assert rule_ids == [0, 1]


def test_cap_reports_rule():
    g = graph_of(*[f"n{i} p n{i + 1}" for i in range(30)])
    p = g.id_of(iri("p"))
    rules = [HornRule(RuleClass.C4, p, p, p)]
    with pytest.raises(GroundingLimitError, match="#0"):
        infer_closure(g, rules, max_derived=20)


def test_factor_dump_round_trip(tmp_path, rng):
    g = random_graph(rng, n_nodes=8, n_preds=3, n_triples=25)
    rules = random_rules(rng, g.predicates(), 3)
    net = ground(g, rules, max_derived=10_000)
    path = tmp_path / "factors.tsv"
    assert write_factor_dump(net, path) == net.n_factors
    rows = read_factor_dump(path)
    back = network_from_dump(rows, g, net.hidden_triples())
    assert np.array_equal(back.factor_body, net.factor_body)
    assert np.array_equal(back.factor_head, net.factor_head)
    assert np.array_equal(back.factor_weight, net.factor_weight)
    assert np.array_equal(back.atoms, net.atoms)


def test_dump_format(tmp_path):
    g = graph_of("a p b")
    p, q = g.id_of(iri("p")), g.dictionary.add(iri("q"))
    net = ground(g, [HornRule(RuleClass.C1, p, None, q, weight=0.25)])
    write_factor_dump(net, tmp_path / "f.tsv")
    ex = "http://example.org/"
    assert (tmp_path / "f.tsv").read_text() == f"0\t<{ex}a>|<{ex}p>|<{ex}b>\t<{ex}a>|<{ex}q>|<{ex}b>\t0.25\n"


def test_synthetic_network_builder():
    net = GroundNetwork.from_factors(2, [((2,), 0, 1.0), ((0,), 1, -1.0)], n_evidence=1)
    assert net.n_hidden == 2 and net.n_evidence == 1
    assert net.adjacency(0) == [0, 1]
    assert net.adjacency(2) == [0]
    assert list(net.hidden_indices) == [0, 1]
