import itertools
import math
import random

import numpy as np
import pytest

from conftest import random_network
from mandolin.grounding import GroundNetwork
from mandolin.inference import (
    InferenceConfig,
    MarginalTable,
    conditional_probability,
    exact_marginals,
    gibbs_marginals,
    gibbs_sample,
    infer,
    normalize_scores,
    predict,
    read_scored_triples,
    write_predictions,
    write_scores,
)
from mandolin.rdf import IRI, TermDictionary


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def brute_marginals(net):
    """Sum over every hidden assignment with plain Python loops."""
    h = net.n_hidden
    totals, z = [0.0] * h, 0.0
    for bits in itertools.product([0, 1], repeat=h):
        state = [True] * net.n_atoms
        for k, i in enumerate(net.hidden_indices):
            state[i] = bool(bits[k])
        score = 0.0
        for f in net.factors():
            sat = (not all(state[b] for b in f.body)) or state[f.head]
            score += f.weight * sat
        w = math.exp(score)
        z += w
        for k in range(h):
            totals[k] += w * bits[k]
    return [t / z for t in totals]


def test_conditional_isolated_atom():
    net = GroundNetwork.from_factors(1, [])
    assert conditional_probability(0, np.zeros(1, bool), net) == 0.5


def test_conditional_head_with_true_body():
    net = GroundNetwork.from_factors(1, [((1,), 0, 2.0)], n_evidence=1)
    assert conditional_probability(0, np.zeros(2, bool), net) == pytest.approx(0.8808, abs=1e-4)


def test_conditional_head_with_false_body():
    net = GroundNetwork.from_factors(2, [((1,), 0, 2.0)])
    state = np.array([False, False])
    assert conditional_probability(0, state, net) == 0.5


def test_conditional_matches_exact_ratio():
    rng = random.Random(4)
    net = random_network(rng, max_hidden=6)
    for _ in range(20):
        state = np.array([rng.random() < 0.5 for _ in range(net.n_atoms)])
        i = int(rng.choice(list(net.hidden_indices)))

        def score(v):
            s = state.copy()
            s[~net.hidden] = True
            s[i] = v
            return sum(f.weight * ((not all(s[b] for b in f.body)) or s[f.head]) for f in net.factors())
        expect = sigmoid(score(True) - score(False))
        assert conditional_probability(i, state, net) == pytest.approx(expect, abs=1e-12)


def test_exact_no_factors_and_zero_weights():
    assert list(exact_marginals(GroundNetwork.from_factors(3, [])).raw) == [0.5, 0.5, 0.5]
    net = GroundNetwork.from_factors(3, [((0,), 1, 0.0), ((1, 2), 0, 0.0)])
    assert np.allclose(exact_marginals(net).raw, 0.5)


def test_exact_four_states_by_hand():
    # clause ~b | h with both hidden, weight w; violated only at b=1, h=0
    w = 1.3
    net = GroundNetwork.from_factors(2, [((0,), 1, w)])
    e = math.exp(w)
    z = 3 * e + 1
    b, h = exact_marginals(net).raw
    assert b == pytest.approx((1 + e) / z)
    assert h == pytest.approx(2 * e / z)


@pytest.mark.parametrize("seed", range(10))
def test_exact_matches_brute_force(seed):
    net = random_network(random.Random(seed), max_hidden=8)
    assert np.allclose(exact_marginals(net).raw, brute_marginals(net), atol=1e-12)


def test_exact_refuses_large():
    with pytest.raises(ValueError):
        exact_marginals(GroundNetwork.from_factors(21, []))


def test_gibbs_isolated_atom():
    raw = gibbs_marginals(GroundNetwork.from_factors(1, []), 100_000, seed=1)
    assert raw[0] == pytest.approx(0.5, abs=0.01)


def test_gibbs_single_factor_sigmoid():
    net = GroundNetwork.from_factors(1, [((1,), 0, 2.0)], n_evidence=1)
    raw = gibbs_marginals(net, 1_000_000, seed=2)
    assert raw[0] == pytest.approx(sigmoid(2.0), abs=0.01)


@pytest.mark.parametrize("seed", range(3))
def test_gibbs_close_to_exact(seed):
    net = random_network(random.Random(seed))
    raw = gibbs_sample(net, InferenceConfig(gamma=1_000_000, seed=seed)).raw
    assert np.max(np.abs(raw - exact_marginals(net).raw)) <= 0.02


def test_two_seeds_agree():
    net = random_network(random.Random(9))
    a = gibbs_marginals(net, 1_000_000, seed=1)
    b = gibbs_marginals(net, 1_000_000, seed=2)
    assert np.max(np.abs(a - b)) <= 0.03


def test_seed_determinism_bitwise():
    net = random_network(random.Random(11))
    cfg = InferenceConfig(gamma=50_000, seed=5)
    assert np.array_equal(gibbs_sample(net, cfg).raw, gibbs_sample(net, cfg).raw)
    multi = InferenceConfig(gamma=50_000, seed=5, chains=3)
    assert np.array_equal(gibbs_sample(net, multi).raw, gibbs_sample(net, multi).raw)


def test_multiple_chains_average_single_chains():
    from mandolin.inference import chain_seeds
    net = random_network(random.Random(12))
    cfg = InferenceConfig(gamma=20_000, seed=7, chains=4)
    single = [gibbs_marginals(net, 20_000, s) for s in chain_seeds(7, 4)]
    assert np.allclose(gibbs_sample(net, cfg).raw, np.mean(single, axis=0))


def test_short_run_unvisited_atoms_default():
    # fewer updates than hidden atoms: unvisited atoms keep the uniform estimate
    net = GroundNetwork.from_factors(5, [])
    raw = gibbs_marginals(net, 3, seed=0, burn_in=0.0)
    assert list(raw[3:]) == [0.5, 0.5]


def test_zero_hidden_gives_empty_table():
    net = GroundNetwork.from_factors(0, [], n_evidence=2)
    assert len(gibbs_sample(net, InferenceConfig(gamma=10))) == 0


def test_default_gamma_is_hundred_times_evidence():
    assert InferenceConfig().iterations(37) == 3700
    with pytest.raises(ValueError):
        InferenceConfig(gamma=0)
    with pytest.raises(ValueError):
        InferenceConfig(burn_in=1.0)


def _table(raw):
    raw = np.asarray(raw, dtype=float)
    return MarginalTable(np.array([(i, 0, 0) for i in range(len(raw))], dtype=np.int64).reshape(-1, 3), raw)


def test_normalize_hand_example():
    assert list(normalize_scores(_table([0.2, 0.5, 0.8])).normalized) == pytest.approx([0, 0.5, 1])
    assert list(normalize_scores(_table([0.3])).normalized) == [1.0]
    assert list(normalize_scores(_table([0.4, 0.4])).normalized) == [1.0, 1.0]
    with pytest.raises(ValueError):
        normalize_scores(_table([]))


def test_normalize_monotone():
    rng = np.random.default_rng(0)
    for _ in range(20):
        raw = rng.random(30)
        norm = normalize_scores(_table(raw)).normalized
        assert np.array_equal(np.argsort(raw, kind="stable"), np.argsort(norm, kind="stable"))
        assert norm.min() == 0.0 and norm.max() == 1.0


def test_predict_threshold_and_order():
    t = normalize_scores(_table([0.2, 0.8, 0.5, 0.8]))
    assert len(predict(t, 1.0)) == 0
    links = predict(t, 0.0).links
    assert [s for _, s in links] == pytest.approx([1.0, 1.0, 0.5])
    assert [tr[0] for tr, _ in links] == [1, 3, 2]
    assert predict(t, 0.5).triples() == {(1, 0, 0), (3, 0, 0)}


def test_predictions_are_prefix_of_ranking():
    t = normalize_scores(_table(np.random.default_rng(1).random(40)))
    full = predict(t, 0.0).links
    for tau in (0.1, 0.5, 0.9):
        part = predict(t, tau).links
        assert part == full[:len(part)]


def test_score_files_round_trip(tmp_path):
    d = TermDictionary()
    ids = [d.add(IRI(f"http://example.org/{x}")) for x in "abpq"]
    table = MarginalTable(np.array([(ids[0], ids[2], ids[1]), (ids[1], ids[3], ids[0])]), np.array([0.25, 0.75]))
    table = normalize_scores(table)
    write_scores(table, tmp_path / "scores.tsv", d)
    write_predictions(predict(table, 0.5), tmp_path / "pred.tsv", d)
    scores = read_scored_triples(tmp_path / "scores.tsv")
    assert [v for _, v in scores] == [1.0, 0.0]
    assert read_scored_triples(tmp_path / "pred.tsv") == [(d.decode_triple((ids[1], ids[3], ids[0])), 1.0)]
    header = (tmp_path / "pred.tsv").read_text().splitlines()[0]
    assert header == "s\tp\to\tscore"


def test_infer_normalizes():
    net = GroundNetwork.from_factors(2, [((2,), 0, 3.0)], n_evidence=1)
    t = infer(net, InferenceConfig(gamma=20_000, seed=0))
    assert t.normalized.max() == 1.0 and t.normalized.min() == 0.0
