import random

import pytest

from mandolin.rdf import IRI, Literal, encode

EX = "http://example.org/"


def iri(name):
    return IRI(EX + name)


def triples(*specs):
    """``"a p b"`` strings to raw triples; a quoted object becomes a literal."""
    out = []
    for spec in specs:
        s, p, o = spec.split(" ", 2)
        obj = Literal(o[1:-1]) if o.startswith('"') else iri(o)
        out.append((iri(s), iri(p), obj))
    return out


def graph_of(*specs):
    return encode(triples(*specs))


def random_graph(rng: random.Random, n_nodes=30, n_preds=5, n_triples=200):
    raw = set()
    while len(raw) < n_triples:
        raw.add((iri(f"n{rng.randrange(n_nodes)}"), iri(f"p{rng.randrange(n_preds)}"),
                 iri(f"n{rng.randrange(n_nodes)}")))
    return encode(sorted(raw, key=lambda t: (t[0].lexical, t[1].lexical, t[2].lexical)))


@pytest.fixture
def rng():
    return random.Random(12345)


def random_network(rng: random.Random, max_hidden=12, max_factors=25, n_evidence=3, wmax=3.0):
    """Random clause network: atoms 0..H-1 hidden, the next ``n_evidence`` clamped true."""
    from mandolin.grounding import GroundNetwork

    h = rng.randint(2, max_hidden)
    n = h + n_evidence
    factors = []
    for _ in range(rng.randint(1, max_factors)):
        head = rng.randrange(h) if rng.random() < 0.8 else rng.randrange(n)
        body = rng.sample([i for i in range(n) if i != head], rng.choice([1, 2]))
        factors.append((body, head, rng.uniform(-wmax, wmax)))
    return GroundNetwork.from_factors(h, factors, n_evidence=n_evidence)


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
