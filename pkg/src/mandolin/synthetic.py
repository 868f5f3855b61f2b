"""Synthetic family graphs with planted Horn rules, for end-to-end checks.

Base facts are ``parent`` edges plus one direction of each marriage.  The
planted rules then generate consequences:

    parent(y,x)               => child(x,y)        (C2)
    spouse(y,x)               => spouse(x,y)       (C2)
    parent(x,z) & parent(z,y) => grandparent(x,y)  (C4)

A fraction of the consequences is withheld and split between validation
and test; random ``knows`` edges add unrelated noise.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .mining import RuleClass
from .rdf import IRI, RawTriple, write_ntriples

EX = "http://example.org/family/"
PARENT, CHILD, SPOUSE, GRANDPARENT, KNOWS = (IRI(EX + n) for n in ("parent", "child", "spouse", "grandparent",
                                                                     "knows"))

# (class, a, b, c) over predicate IRIs
PLANTED_RULES = (
    (RuleClass.C2, PARENT.lexical, None, CHILD.lexical),
    (RuleClass.C2, SPOUSE.lexical, None, SPOUSE.lexical),
    (RuleClass.C4, PARENT.lexical, PARENT.lexical, GRANDPARENT.lexical),
)


@dataclass
class FamilyGraph:
    train: list[RawTriple] = field(default_factory=list)
    valid: list[RawTriple] = field(default_factory=list)
    test: list[RawTriple] = field(default_factory=list)

    def __len__(self):
        return len(self.train) + len(self.valid) + len(self.test)

    def write(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in ("train", "valid", "test"):
            write_ntriples(getattr(self, name), directory / f"{name}.nt")
        return directory


def family_graph(target: int = 5000, withheld: float = 0.1, noise: float = 0.05, seed: int = 0,
                 founders: int = 40) -> FamilyGraph:
    """About ``target`` triples; ``withheld`` of the consequences go to valid/test."""
    rng = random.Random(seed)
    count = 0

    def person():
        nonlocal count
        count += 1
        return IRI(f"{EX}p{count}")

    parents_of: dict[IRI, tuple[IRI, IRI]] = {}
    couples: list[tuple[IRI, IRI]] = []
    generation = [(person(), person()) for _ in range(founders)]

    def size_estimate():
        n = 2 * len(couples) + 4 * len(parents_of)
        n += sum(2 for a, b in parents_of.values() for par in (a, b) if par in parents_of)
        return int(n * (1 + noise))

    while True:
        couples.extend(generation)
        families = []
        for a, b in generation:
            if size_estimate() >= target:
                break
            kids = [person() for _ in range(rng.randint(1, 3))]
            for k in kids:
                parents_of[k] = (a, b)
            families.append(kids)
        if size_estimate() >= target:
            break
        pool = [k for kids in families for k in kids]
        rng.shuffle(pool)
        married: set[IRI] = set()
        generation = []
        for k in pool:
            if k in married or rng.random() > 0.8:
                continue
            married.add(k)
            mate = next((m for m in pool if m not in married and parents_of[m] != parents_of[k]), None)
            if mate is None or rng.random() < 0.5:
                mate = person()
            married.add(mate)
            generation.append((k, mate))
        if not generation:
            generation = [(person(), person()) for _ in range(founders)]

    base: list[RawTriple] = []
    consequences: list[list[RawTriple]] = []  # groups share a withholding budget of one
    for kid, (a, b) in sorted(parents_of.items(), key=lambda kv: kv[0].lexical):
        for par in (a, b):
            base.append((par, PARENT, kid))
            consequences.append([(kid, CHILD, par)])
            if par in parents_of:
                for g in parents_of[par]:
                    consequences.append([(g, GRANDPARENT, kid)])
    for a, b in couples:
        consequences.append([(a, SPOUSE, b), (b, SPOUSE, a)])

    people = sorted({t[0] for t in base} | {t[2] for t in base} | {p for c in couples for p in c},
                    key=lambda t: t.lexical)
    n_noise = int(noise * (len(base) + sum(len(g) for g in consequences)))
    noise_facts = {(rng.choice(people), KNOWS, rng.choice(people)) for _ in range(n_noise)}

    out = FamilyGraph()
    train_set: set[RawTriple] = set(base) | noise_facts
    held: list[RawTriple] = []
    for group in consequences:
        if rng.random() < withheld:
            h = rng.choice(group)
            held.append(h)
            train_set.update(t for t in group if t != h)
        else:
            train_set.update(group)
    held = [t for t in dict.fromkeys(held) if t not in train_set]
    rng.shuffle(held)
    half = len(held) // 2
    out.valid, out.test = held[:half], held[half:]
    out.train = sorted(train_set, key=lambda t: (t[0].lexical, t[1].lexical, t[2].lexical))
    return out
