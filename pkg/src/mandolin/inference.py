"""Marginal inference on ground networks.

A ground network defines ``P(x) ~ exp(sum_f w_f * sat_f(x))`` over the
hidden atoms, with evidence atoms clamped true.  Marginals are estimated
by single-site Gibbs sampling in round-robin order; an exhaustive
enumeration is available for small networks.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .grounding import GroundNetwork
from .rdf import TermDictionary, TripleId, parse_term, term_to_nt

logger = logging.getLogger(__name__)

EXACT_MAX_HIDDEN = 20


@dataclass
class InferenceConfig:
    gamma: int | None = None  # None -> 100 * |E|
    burn_in: float = 0.1
    tau: float = 0.5
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.gamma is not None and self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn-in fraction must lie in [0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.chains < 1:
            raise ValueError("need at least one chain")

    def iterations(self, n_evidence: int) -> int:
        return self.gamma if self.gamma is not None else max(100 * n_evidence, 1)


@dataclass
class MarginalTable:
    triples: np.ndarray          # (H, 3) hidden atoms
    raw: np.ndarray              # sample frequencies
    normalized: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.raw)

    def scores(self) -> dict[TripleId, float]:
        values = self.normalized if self.normalized is not None else self.raw
        return {tuple(t): float(v) for t, v in zip(self.triples.tolist(), values.tolist())}


def worker_count() -> int:
    env = os.environ.get("MANDOLIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer MANDOLIN_THREADS=%r", env)
    return os.cpu_count() or 1


# -- conditional ----------------------------------------------------------------------

def _satisfied(network: GroundNetwork, f: int, state: np.ndarray) -> bool:
    for b in network.factor_body[f]:
        if b >= 0 and not state[b]:
            return True
    return bool(state[network.factor_head[f]])


def conditional_probability(atom: int, state: np.ndarray, network: GroundNetwork) -> float:
    """P(atom = 1 | all other atoms) for a hidden atom index.

    ``state`` is a boolean vector over all atoms; evidence entries are
    ignored and treated as true.
    """
    full = np.asarray(state, dtype=bool).copy()
    full[~network.hidden] = True
    delta = 0.0
    for f in network.adjacency(atom):
        full[atom] = True
        s1 = _satisfied(network, f, full)
        full[atom] = False
        s0 = _satisfied(network, f, full)
        delta += network.factor_weight[f] * (int(s1) - int(s0))
    return 1.0 / (1.0 + math.exp(-delta))


# -- Gibbs ------------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _factor_sat(state, f, body, head):
    b = body[f, 0]
    if b >= 0 and state[b] == 0:
        return 1
    b = body[f, 1]
    if b >= 0 and state[b] == 0:
        return 1
    return 1 if state[head[f]] == 1 else 0


@numba.njit(cache=True, nogil=True)
def _gibbs_chain(seed, n_atoms, hidden_idx, adj_ptr, adj_idx, body, head, weight, n_updates, burn_in):
    np.random.seed(seed)
    state = np.ones(n_atoms, dtype=np.uint8)
    n_hidden = hidden_idx.shape[0]
    for k in range(n_hidden):
        state[hidden_idx[k]] = 1 if np.random.random() < 0.5 else 0
    counts = np.zeros(n_hidden, dtype=np.int64)
    visits = np.zeros(n_hidden, dtype=np.int64)
    k = 0
    for t in range(n_updates):
        a = hidden_idx[k]
        delta = 0.0
        for e in range(adj_ptr[a], adj_ptr[a + 1]):
            f = adj_idx[e]
            state[a] = 1
            s1 = _factor_sat(state, f, body, head)
            state[a] = 0
            s0 = _factor_sat(state, f, body, head)
            delta += weight[f] * (s1 - s0)
        p = 1.0 / (1.0 + np.exp(-delta))
        v = 1 if np.random.random() < p else 0
        state[a] = v
        if t >= burn_in:
            counts[k] += v
            visits[k] += 1
        k += 1
        if k == n_hidden:
            k = 0
    return counts, visits


def chain_seeds(seed: int, chains: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]


def gibbs_marginals(network: GroundNetwork, n_updates: int, seed: int, burn_in: float = 0.1) -> np.ndarray:
    """Raw marginals from one chain of ``n_updates`` single-atom updates."""
    hidden = network.hidden_indices.astype(np.int64)
    if len(hidden) == 0:
        return np.zeros(0)
    counts, visits = _gibbs_chain(np.uint32(seed), network.n_atoms, hidden, network.adj_ptr, network.adj_idx,
                                  network.factor_body, network.factor_head, network.factor_weight,
                                  int(n_updates), int(math.floor(burn_in * n_updates)))
    out = np.full(len(hidden), 0.5)
    seen = visits > 0
    out[seen] = counts[seen] / visits[seen]
    return out


def gibbs_sample(network: GroundNetwork, config: InferenceConfig | None = None) -> MarginalTable:
    config = config or InferenceConfig()
    triples = network.atoms[network.hidden_indices]
    if network.n_hidden == 0:
        return MarginalTable(triples.reshape(0, 3), np.zeros(0))
    n_updates = config.iterations(network.n_evidence)
    seeds = chain_seeds(config.seed, config.chains)
    if config.chains == 1:
        estimates = [gibbs_marginals(network, n_updates, seeds[0], config.burn_in)]
    else:
        workers = min(config.chains, worker_count())
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(lambda s: gibbs_marginals(network, n_updates, s, config.burn_in), seeds))
    raw = np.mean(estimates, axis=0)
    logger.info("gibbs: %d updates x %d chains over %d hidden atoms", n_updates, config.chains, network.n_hidden)
    return MarginalTable(triples, raw)


def warm_up() -> None:
    """Compile the sampling kernel ahead of timed runs."""
    net = GroundNetwork.from_factors(1, [((), 0, 1.0)])
    gibbs_marginals(net, 2, 0)


# -- exact ------------------------------------------------------------------------------

def exact_marginals(network: GroundNetwork) -> MarginalTable:
    """Marginals by enumerating every joint state of the hidden atoms."""
    h = network.n_hidden
    if h > EXACT_MAX_HIDDEN:
        raise ValueError(f"exact enumeration refused for {h} hidden atoms (cap {EXACT_MAX_HIDDEN})")
    triples = network.atoms[network.hidden_indices]
    if h == 0:
        return MarginalTable(triples.reshape(0, 3), np.zeros(0))
    states = ((np.arange(2 ** h)[:, None] >> np.arange(h)[None, :]) & 1).astype(bool)
    pos = np.full(network.n_atoms, -1)
    pos[network.hidden_indices] = np.arange(h)

    def value(atom):
        return states[:, pos[atom]] if pos[atom] >= 0 else np.ones(len(states), dtype=bool)

    logw = np.zeros(len(states))
    for f in range(network.n_factors):
        sat = value(network.factor_head[f]).copy()
        for b in network.factor_body[f]:
            if b >= 0:
                sat |= ~value(b)
        logw += network.factor_weight[f] * sat
    probs = np.exp(logw - logw.max())
    probs /= probs.sum()
    return MarginalTable(triples, probs @ states)


# -- scores & predictions --------------------------------------------------------------

def normalize_scores(table: MarginalTable) -> MarginalTable:
    """Min-max rescale raw marginals; equal raw values all map to 1."""
    raw = np.asarray(table.raw, dtype=np.float64)
    if len(raw) == 0:
        raise ValueError("cannot normalize an empty marginal table")
    lo, hi = raw.min(), raw.max()
    norm = np.ones_like(raw) if hi == lo else (raw - lo) / (hi - lo)
    return MarginalTable(table.triples, raw, norm)


@dataclass
class PredictionSet:
    links: list[tuple[TripleId, float]]

    def __len__(self):
        return len(self.links)

    def triples(self) -> set[TripleId]:
        return {t for t, _ in self.links}


def ranked_order(table: MarginalTable) -> np.ndarray:
    """Indices by score descending, ties by (s, p, o)."""
    t = table.triples
    scores = table.normalized if table.normalized is not None else table.raw
    return np.lexsort((t[:, 2], t[:, 1], t[:, 0], -scores)) if len(t) else np.zeros(0, dtype=np.int64)


def predict(table: MarginalTable, tau: float) -> PredictionSet:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    scores = table.normalized if table.normalized is not None else table.raw
    links = [(tuple(int(v) for v in table.triples[i]), float(scores[i]))
             for i in ranked_order(table) if scores[i] > tau]
    return PredictionSet(links)


def infer(network: GroundNetwork, config: InferenceConfig | None = None) -> MarginalTable:
    """Gibbs marginals followed by normalization (empty table if nothing is hidden)."""
    table = gibbs_sample(network, config)
    return normalize_scores(table) if len(table) else MarginalTable(table.triples, table.raw, table.raw.copy())


# -- files ----------------------------------------------------------------------------

def _triple_cols(dictionary: TermDictionary, triple) -> str:
    return "\t".join(term_to_nt(dictionary.term(int(x))) for x in triple)


def write_scores(table: MarginalTable, path: str | Path, dictionary: TermDictionary) -> int:
    """Every hidden atom with raw and normalized score, in ranked order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s\tp\to\traw\tscore\n")
        for i in ranked_order(table):
            fh.write(f"{_triple_cols(dictionary, table.triples[i])}\t{float(table.raw[i])!r}\t{float(table.normalized[i])!r}\n")
    return len(table)


def write_predictions(predictions: PredictionSet, path: str | Path, dictionary: TermDictionary) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s\tp\to\tscore\n")
        for triple, score in predictions.links:
            fh.write(f"{_triple_cols(dictionary, triple)}\t{score!r}\n")
    return len(predictions)


def read_scored_triples(path: str | Path) -> list[tuple[tuple, float]]:
    """Decoded ``((s, p, o), score)`` rows from a scores or predictions file."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:3] != ["s", "p", "o"] or "score" not in header:
            raise ValueError(f"{path}: expected header with s, p, o and score columns")
        col = header.index("score")
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            if len(cols) < len(header):
                continue
            rows.append(((parse_term(cols[0]), parse_term(cols[1]), parse_term(cols[2])), float(cols[col])))
    return rows

