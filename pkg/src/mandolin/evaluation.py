"""Link-prediction evaluation: object corruption, filtered ranks, MRR, Hits@k.

Every test triple ``(s, p, o)`` is ranked against the corruptions
``(s, p, o')`` for every node ``o'`` of the model graph.  Candidates that
are known facts are removed first and ties share the average position.
"""
from __future__ import annotations

import csv
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Collection, Hashable, Iterable, Mapping, Sequence

from .rdf import EncodedGraph, TermDictionary, TripleId, load_ntriples, term_to_nt

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 3, 10)
SPLIT_FILES = {"train": "train.nt", "valid": "valid.nt", "test": "test.nt"}


@dataclass
class Split:
    dictionary: TermDictionary
    train: frozenset
    valid: frozenset
    test: frozenset

    def __post_init__(self):
        if self.train & self.valid or self.train & self.test or self.valid & self.test:
            raise ValueError("train, valid and test splits overlap")

    @property
    def known(self) -> frozenset:
        return self.train | self.valid | self.test

    def model_graph(self) -> EncodedGraph:
        """Train plus valid, the graph the final model is built from."""
        return EncodedGraph(self.dictionary, self.train | self.valid)

    def nodes(self) -> list[int]:
        return sorted(self.model_graph().nodes())


def split_paths(directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    return {name: directory / fname for name, fname in SPLIT_FILES.items()}


def load_split(train: str | Path, valid: str | Path, test: str | Path,
               dictionary: TermDictionary | None = None) -> Split:
    """Encode three N-Triples files through one dictionary.

    A triple listed in more than one file is kept in the earliest split only.
    """
    d = dictionary if dictionary is not None else TermDictionary()
    parts = []
    for path in (train, valid, test):
        parts.append({d.encode_triple(t) for t in load_ntriples(path)})
    tr, va, te = parts
    va -= tr
    te -= tr | va
    return Split(d, frozenset(tr), frozenset(va), frozenset(te))


def load_split_dir(directory: str | Path, dictionary: TermDictionary | None = None) -> Split:
    p = split_paths(directory)
    return load_split(p["train"], p["valid"], p["test"], dictionary)


# -- scores -------------------------------------------------------------------------

class Scorer:
    """Scores for ranking: hidden atoms by table, evidence fixed at 1, anything else 0."""

    def __init__(self, hidden_scores: Mapping[TripleId, float], evidence: Collection[TripleId] = ()):
        self.hidden = dict(hidden_scores)
        self.evidence = frozenset(evidence)
        self._by_sp: dict[tuple[int, int], dict[int, float]] | None = None

    def __call__(self, triple: TripleId) -> float:
        return score_of(triple, self.hidden, self.evidence)

    def by_sp(self) -> dict[tuple[int, int], dict[int, float]]:
        """``(s, p) -> {o: score}`` for every triple with an explicit score."""
        if self._by_sp is None:
            idx: dict[tuple[int, int], dict[int, float]] = defaultdict(dict)
            for s, p, o in self.evidence:
                idx[s, p][o] = 1.0
            for (s, p, o), v in self.hidden.items():
                if (s, p, o) not in self.evidence:
                    idx[s, p][o] = v
            self._by_sp = dict(idx)
        return self._by_sp


def score_of(triple: TripleId, hidden_scores: Mapping[TripleId, float], evidence: Collection[TripleId]) -> float:
    if triple in evidence:
        return 1.0
    return float(hidden_scores.get(triple, 0.0))


def corrupt_objects(triple: TripleId, nodes: Iterable[int]) -> list[TripleId]:
    """``(s, p, o')`` for every node ``o' != o``, by node id."""
    s, p, o = triple
    return [(s, p, n) for n in sorted(nodes) if n != o]


# -- ranks --------------------------------------------------------------------------

@dataclass(frozen=True)
class RankResult:
    triple: TripleId
    rank: float

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")

    @property
    def reciprocal(self) -> float:
        return 1.0 / self.rank


def _rank(test_score: float, scores: Iterable[float]) -> float:
    greater = equal = 0
    for v in scores:
        if v > test_score:
            greater += 1
        elif v == test_score:
            equal += 1
    return 1.0 + greater + equal / 2.0


def filtered_rank(triple: TripleId, candidates: Iterable[TripleId],
                  scores: Mapping[TripleId, float] | Callable[[TripleId], float],
                  known: Collection[TripleId]) -> RankResult:
    """Rank of ``triple`` after dropping candidates that are known facts.

    ``scores`` is a callable or a mapping where missing triples score 0.
    """
    fn = scores if callable(scores) else (lambda t: float(scores.get(t, 0.0)))
    kept = [fn(c) for c in candidates if c != triple and c not in known]
    return RankResult(triple, _rank(fn(triple), kept))


class Ranker:
    """Ranks test triples without materializing the zero-score candidates.

    Only triples ``(s, p, *)`` with an explicit score are visited; every
    other surviving corruption scores 0 and is counted in bulk.
    """

    def __init__(self, scorer: Scorer, nodes: Iterable[int], known: Collection[TripleId], filtered: bool = True):
        self.scorer = scorer
        self.nodes = frozenset(nodes)
        self.filtered = filtered
        self.known_by_sp: dict[tuple[int, int], set[int]] = defaultdict(set)
        if filtered:
            for s, p, o in known:
                self.known_by_sp[s, p].add(o)

    def rank(self, triple: TripleId) -> RankResult:
        s, p, o = triple
        test_score = self.scorer(triple)
        known = self.known_by_sp.get((s, p), set())
        nodes = self.nodes
        n_surviving = len(nodes) - (o in nodes)
        if self.filtered:
            n_surviving -= sum(1 for x in known if x != o and x in nodes)
        greater = equal = explicit = 0
        for x, v in self.scorer.by_sp().get((s, p), {}).items():
            if x == o or x not in nodes or (self.filtered and x in known):
                continue
            explicit += 1
            if v > test_score:
                greater += 1
            elif v == test_score:
                equal += 1
        if test_score == 0.0:
            equal += n_surviving - explicit
        return RankResult(triple, 1.0 + greater + equal / 2.0)


# -- report -------------------------------------------------------------------------

@dataclass
class EvalReport:
    mrr: float
    hits: dict[int, float]
    n_test: int

    @property
    def hits_at_1(self) -> float:
        return self.hits.get(1, float("nan"))

    @property
    def hits_at_3(self) -> float:
        return self.hits.get(3, float("nan"))

    @property
    def hits_at_10(self) -> float:
        return self.hits.get(10, float("nan"))

    def rows(self) -> list[tuple[str, float]]:
        return [("mrr", self.mrr)] + [(f"hits_at_{k}", v) for k, v in sorted(self.hits.items())] + \
               [("n_test", self.n_test)]


def compute_report(results: Sequence[RankResult] | Sequence[float], ks: Sequence[int] = DEFAULT_KS) -> EvalReport:
    ranks = [r.rank if isinstance(r, RankResult) else float(r) for r in results]
    if not ranks:
        raise ValueError("no rank results to report")
    n = len(ranks)
    mrr = sum(1.0 / r for r in ranks) / n
    hits = {k: 100.0 * sum(1 for r in ranks if r <= k) / n for k in sorted(ks)}
    return EvalReport(mrr, hits, n)


def evaluate(split: Split, scorer: Scorer, filtered: bool = True,
             ks: Sequence[int] = DEFAULT_KS) -> tuple[EvalReport, list[RankResult]]:
    """Rank every test triple of ``split``; test triples are processed in id order."""
    ranker = Ranker(scorer, split.nodes(), split.known, filtered)
    results = [ranker.rank(t) for t in sorted(split.test)]
    return compute_report(results, ks), results


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for name, value in report.rows():
            w.writerow([name, repr(value) if isinstance(value, float) else value])


def read_report(path: str | Path) -> dict[str, float]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["metric", "value"]:
        raise ValueError(f"{path}: expected header metric,value")
    return {k: float(v) for k, v in rows[1:]}


def write_ranks(results: Sequence[RankResult], path: str | Path, dictionary: TermDictionary) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s\tp\to\trank\n")
        for r in results:
            cols = [term_to_nt(dictionary.term(x)) for x in r.triple]
            fh.write("\t".join(cols) + f"\t{r.rank!r}\n")
    return len(results)


# -- sameAs holdout -----------------------------------------------------------------

Pair = tuple[Hashable, Hashable]


def holdout_folds(mapping: Iterable[Pair], fold: float = 0.9, seed: int = 0) -> tuple[list[Pair], list[Pair]]:
    pairs = sorted(set(mapping), key=repr)
    if len(pairs) < 10:
        raise ValueError(f"mapping has {len(pairs)} pairs; need at least 10 for a holdout split")
    if not 0.0 < fold < 1.0:
        raise ValueError("fold fraction must lie in (0, 1)")
    random.Random(seed).shuffle(pairs)
    cut = int(round(fold * len(pairs)))
    cut = min(max(cut, 1), len(pairs) - 1)
    return pairs[:cut], pairs[cut:]


def sameas_holdout_eval(mapping: Iterable[Pair], predictor: Callable[[list[Pair]], Collection[Pair]],
                        fold: float = 0.9, seed: int = 0) -> float:
    """Recall of held-out equivalences among the links predicted from the training fold.

    ``predictor`` receives the training pairs and returns predicted pairs;
    a held-out pair counts as found in either direction.
    """
    train, held = holdout_folds(mapping, fold, seed)
    predicted = set(predictor(train))
    found = sum(1 for a, b in held if (a, b) in predicted or (b, a) in predicted)
    logger.info("sameAs holdout: %d/%d held-out pairs predicted", found, len(held))
    return found / len(held)


__all__ = [
    "DEFAULT_KS", "EvalReport", "RankResult", "Ranker", "Scorer", "Split", "compute_report",
    "corrupt_objects", "evaluate", "filtered_rank", "holdout_folds", "load_split", "load_split_dir",
    "read_report", "sameas_holdout_eval", "score_of", "split_paths", "write_ranks", "write_report",
]
