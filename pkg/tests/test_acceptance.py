"""Acceptance checks, one test per criterion.

Each test appends a ``[criterion N] PASS/FAIL: ...`` line that the terminal
summary prints.  Benchmark checks read their data from directories named by
MANDOLIN_WN18_DIR, MANDOLIN_FB15K_DIR and MANDOLIN_DBLP_ACM_DIR; without the
data they fail as BLOCKED.

Run alone with ``pytest -m acceptance -s`` or ``python tests/test_acceptance.py``.
"""
import os
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, random_graph, random_network
from mandolin.datasets import convert_tsv_split, load_dblp_acm, subsample_predicates
from mandolin.enrichment import forward_chain
from mandolin.enrichment.similarity import numeric_pairs, similar_string_pairs
from mandolin.evaluation import Ranker, Scorer, compute_report, filtered_rank, sameas_holdout_eval
from mandolin.inference import exact_marginals, gibbs_marginals, warm_up
from mandolin.mining import ALL_CLASSES, HornRule, RuleEvaluator, filter_rules, mine_rules
from mandolin.pipeline import PipelineConfig, RunManifest, read_report, run_pipeline, sameas_predictor, sweep_gamma
from mandolin.rdf import encode, load_ntriples, write_ntriples
from mandolin.synthetic import PLANTED_RULES, family_graph
from test_closure import FIXTURES, naive_fixpoint
from test_closure import closed as semi_naive_closed

pytestmark = pytest.mark.acceptance


def record(n, ok, detail):
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    assert ok, line


def blocked(n, what, var):
    line = f"[criterion {n}] FAIL (BLOCKED): {what} not available; set {var} to the dataset directory"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    pytest.fail(line)


# -- 1. Gibbs vs exact enumeration -----------------------------------------------------

def test_c1_gibbs_matches_exact():
    rng = random.Random(2024)
    warm_up()
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        net = random_network(rng, max_hidden=12, max_factors=25, wmax=3.0)
        exact = exact_marginals(net).raw
        approx = gibbs_marginals(net, 10 ** 6, seed=i)
        worst = max(worst, float(np.abs(exact - approx).max()))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 0.02 and elapsed < 120,
           f"max |gibbs - exact| = {worst:.4f} (<= 0.02) over 20 networks in {elapsed:.1f}s (< 120s)")


# -- 2. rule statistics vs nested loops ------------------------------------------------

def nested_loop_stats(graph):
    """(cls, a, b, c) -> (support, head coverage, pca) by scanning triple pairs."""
    by_pred = {}
    for t in graph:
        by_pred.setdefault(t[1], []).append(t)
    preds = sorted(by_pred)
    heads = {c: {(s, o) for s, _, o in by_pred[c]} for c in preds}
    subjects = {c: {s for s, _ in heads[c]} for c in preds}
    out = {}
    for cls in ALL_CLASSES:
        k = cls.index
        for a in preds:
            for b in (preds if cls.binary else [None]):
                body = set()
                for s1, _, o1 in by_pred[a]:
                    if k == 1:
                        body.add((s1, o1))
                    elif k == 2:
                        body.add((o1, s1))
                    else:
                        for s2, _, o2 in by_pred[b]:
                            if k == 3 and s1 == s2:
                                body.add((o1, o2))
                            elif k == 4 and o1 == s2:
                                body.add((s1, o2))
                            elif k == 5 and s1 == o2:
                                body.add((o1, s2))
                            elif k == 6 and o1 == o2:
                                body.add((s1, s2))
                for c in preds:
                    sup = len(body & heads[c])
                    denom = sum(1 for x, _ in body if x in subjects[c])
                    out[cls, a, b, c] = (sup, sup / len(heads[c]), sup / denom if denom else 0.0)
    return out


def test_c2_rule_statistics_exact():
    rng = random.Random(77)
    impl_seconds, checked, mismatches = 0.0, 0, 0
    for _ in range(50):
        g = random_graph(rng, n_nodes=rng.randint(10, 80), n_preds=rng.randint(2, 10),
                         n_triples=rng.randint(50, 500))
        expect = nested_loop_stats(g)
        t0 = time.perf_counter()
        ev = RuleEvaluator(g)
        got = {}
        for cls, a, b, c in expect:
            r = ev.evaluate(HornRule(cls, a, b, c))
            got[cls, a, b, c] = (r.support, r.head_coverage, r.pca_confidence)
        mine_rules(g)
        impl_seconds += time.perf_counter() - t0
        checked += len(expect)
        mismatches += sum(1 for key in expect if got[key] != expect[key])
    record(2, mismatches == 0 and impl_seconds < 60,
           f"{mismatches} mismatches over {checked} candidate rules on 50 graphs; "
           f"implementation {impl_seconds:.1f}s (< 60s)")


# -- 3. similarity joins ----------------------------------------------------------------

def trigram_set(s):
    if len(s) < 3:
        s = "\x02\x02" + s + "\x03\x03"
    return {s[i:i + 3] for i in range(len(s) - 2)}


def naive_join(strings, theta):
    grams = [trigram_set(s) for s in strings]
    out = []
    for i in range(len(strings)):
        gi = grams[i]
        for j in range(i + 1, len(strings)):
            sim = len(gi & grams[j]) / len(gi | grams[j])
            if sim >= theta:
                out.append((i, j, sim))
    return out


def mutated_strings(rng, n):
    alphabet = "abcdefghij klmno"
    bases = ["".join(rng.choice(alphabet) for _ in range(rng.randint(3, 40))) for _ in range(n // 4)]
    out = []
    while len(out) < n:
        s = list(rng.choice(bases))
        for _ in range(rng.randint(0, 4)):
            op, pos = rng.random(), rng.randrange(len(s) + 1)
            if op < 0.4 and len(s) < 40:
                s.insert(pos, rng.choice(alphabet))
            elif op < 0.7 and len(s) > 3 and pos < len(s):
                del s[pos]
            elif pos < len(s):
                s[pos] = rng.choice(alphabet)
        out.append("".join(s))
    return out


def test_c3_similarity_join_lossless():
    rng = random.Random(5)
    strings = mutated_strings(rng, 1000)
    assert all(3 <= len(s) <= 40 for s in strings)
    impl, ok, sizes = 0.0, True, []
    for theta in (0.4, 0.6, 0.8):
        t0 = time.perf_counter()
        got = similar_string_pairs(strings, theta)
        impl += time.perf_counter() - t0
        expect = naive_join(strings, theta)
        ok &= got == expect
        sizes.append(len(expect))
    values = [rng.uniform(0, 1000) for _ in range(1000)] + [rng.choice([1.0, 2.5, 7.0]) for _ in range(100)]
    bound = 0.5
    t0 = time.perf_counter()
    num = numeric_pairs(values, bound)
    impl += time.perf_counter() - t0
    expect_num = [(i, j) for i in range(len(values)) for j in range(i + 1, len(values))
                  if abs(values[i] - values[j]) < bound]
    num_ok = [(i, j) for i, j, _ in num] == expect_num
    record(3, ok and num_ok and impl < 30,
           f"string joins equal naive at theta 0.4/0.6/0.8 ({'/'.join(map(str, sizes))} pairs): {ok}; "
           f"numeric join equals all-pairs ({len(expect_num)} pairs): {num_ok}; {impl:.1f}s (< 30s)")


# -- 4. closure fixpoint -----------------------------------------------------------

def test_c4_closure_fixpoint():
    bad = []
    for name, raw in sorted(FIXTURES.items()):
        once = forward_chain(encode(raw))
        if semi_naive_closed(raw) != naive_fixpoint(raw) or forward_chain(once).decoded() != once.decoded():
            bad.append(name)
    record(4, not bad, f"{len(FIXTURES) - len(bad)}/{len(FIXTURES)} fixtures equal the naive fixpoint "
                       f"and are idempotent" + (f"; failing: {bad}" if bad else ""))


# -- 5. ranking protocol -----------------------------------------------------------

def sort_and_scan_rank(test, test_score, pool):
    """Average 1-based position of ``test`` within its tie block after sorting."""
    ordered = sorted(pool + [(test, test_score)], key=lambda x: -x[1])
    positions = [i + 1 for i, (_, v) in enumerate(ordered) if v == test_score]
    return (positions[0] + positions[-1]) / 2


def test_c5_ranking_protocol():
    rng = random.Random(99)
    bad = 0
    for _ in range(100):
        n = rng.randint(3, 40)
        levels = [0.0, 0.25, 0.5, 0.75, 1.0, rng.random()]
        hidden = {}
        for s in range(3):
            for o in range(n):
                if rng.random() < 0.5:
                    hidden[s, 0, o] = rng.choice(levels)
        evidence = {(s, 0, o) for s in range(3) for o in range(n) if rng.random() < 0.15}
        tests = sorted({(rng.randrange(3), 0, rng.randrange(n)) for _ in range(6)} - evidence)
        if not tests:
            continue
        known = evidence | set(tests)
        scorer = Scorer(hidden, evidence)
        ranker = Ranker(scorer, range(n), known)
        got, expect = [], []
        for t in tests:
            s, p, o = t
            pool = [((s, p, x), scorer((s, p, x))) for x in range(n) if x != o and (s, p, x) not in known]
            oracle = sort_and_scan_rank(t, scorer(t), pool)
            cands = [(s, p, x) for x in range(n)]
            a, b = ranker.rank(t).rank, filtered_rank(t, cands, scorer, known).rank
            bad += (a != oracle) + (b != oracle)
            got.append(a)
            expect.append(oracle)
        rep = compute_report(got)
        m = sum(1 / r for r in expect) / len(expect)
        h10 = 100 * sum(r <= 10 for r in expect) / len(expect)
        bad += (abs(rep.mrr - m) > 1e-12) + (rep.hits_at_10 != h10)
    hand = compute_report([1, 2, 4]).mrr
    hand_ok = abs(hand - 7 / 12) <= 1e-9 and round(hand, 4) == 0.5833
    record(5, bad == 0 and hand_ok,
           f"{bad} disagreements with sort-and-scan on 100 tables; MRR(1,2,4) = {hand:.10f} (7/12 within 1e-9)")


# -- 6, 9, 10. synthetic family graph ------------------------------------------------

@pytest.fixture(scope="module")
def family(tmp_path_factory):
    root = tmp_path_factory.mktemp("family")
    fam = family_graph(target=5000, noise=0.1, seed=0)
    fam.write(root / "split")
    return root, fam


def family_config(root, out, seed=11):
    split = root / "split"
    return PipelineConfig(train=split / "train.nt", valid=split / "valid.nt", test=split / "test.nt",
                          out=root / out, eta_bar=0.9, seed=seed).validate()


def test_c6_planted_rule_recovery(family):
    root, fam = family
    t0 = time.perf_counter()
    g = encode(fam.train)
    rules = filter_rules(mine_rules(g), 0.5)
    index = {(r.cls, g.term(r.a).lexical, g.term(r.b).lexical if r.b is not None else None,
              g.term(r.c).lexical): r for r in rules}
    recovered = [index.get(p) for p in PLANTED_RULES]
    mining_ok = all(r is not None and r.pca_confidence >= 0.8 for r in recovered)
    pcas = ", ".join("missing" if r is None else f"{r.pca_confidence:.3f}" for r in recovered)
    run_pipeline(family_config(root, "c6"))
    report = read_report(root / "c6" / "report.csv")
    elapsed = time.perf_counter() - t0
    record(6, mining_ok and report["hits_at_10"] >= 90 and elapsed < 300,
           f"{len(fam)} triples; planted rules at eta 0.5 PCA [{pcas}] (>= 0.8); "
           f"pipeline Hits@10 {report['hits_at_10']:.1f} (>= 90), MRR {report['mrr']:.3f}; {elapsed:.1f}s (< 300s)")


def test_c9_determinism(family):
    root, _ = family
    names = ("rules.tsv", "predictions.tsv", "report.csv")
    runs = []
    for out in ("c9a", "c9b"):
        run_pipeline(family_config(root, out, seed=3))
        runs.append([(root / out / n).read_bytes() for n in names])
    same = [n for n, a, b in zip(names, *runs) if a == b]
    record(9, len(same) == len(names), f"byte-identical across two seeded runs: {', '.join(same) or 'none'}")


def r_squared(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    return 1 - (resid ** 2).sum() / ((y - y.mean()) ** 2).sum(), a, b


def test_c10_runtime_linear_in_gamma(family):
    root, _ = family
    cfg = family_config(root, "c10")
    rows = sweep_gamma(cfg, [100_000, 200_000, 500_000, 1_000_000], repeats=5, csv_path=root / "sweep.csv")
    r2, a, b = r_squared([r.gamma for r in rows], [r.seconds for r in rows])
    times = ", ".join(f"{r.gamma:.0e}:{r.seconds:.3f}s" for r in rows)
    record(10, r2 >= 0.99, f"seconds = {a:.3f} + {b * 1e6:.3f}e-6*gamma, R^2 = {r2:.4f} (>= 0.99); {times}")


# -- 7. benchmark link prediction ------------------------------------------------------

# MANDOLIN_BENCH_GAMMA only exists for quick smoke runs on toy dumps
BENCH_GAMMA = int(float(os.environ.get("MANDOLIN_BENCH_GAMMA", 1e7)))


def _dataset_dir(var):
    value = os.environ.get(var)
    return Path(value) if value and Path(value).is_dir() else None


def test_c7a_wn18(tmp_path):
    src = _dataset_dir("MANDOLIN_WN18_DIR")
    if src is None:
        blocked("7a", "WN18", "MANDOLIN_WN18_DIR")
    split = convert_tsv_split(src, tmp_path / "split")
    cfg = PipelineConfig(train=split / "train.nt", valid=split / "valid.nt", test=split / "test.nt",
                         out=tmp_path / "out", eta_bar=0.9, gamma=BENCH_GAMMA,
                         chains=os.cpu_count() or 1).validate()
    t0 = time.perf_counter()
    run_pipeline(cfg)
    elapsed = time.perf_counter() - t0
    rep = read_report(tmp_path / "out" / "report.csv")
    record("7a", rep["hits_at_10"] >= 85 and rep["mrr"] >= 0.80 and elapsed <= 4 * 3600,
           f"WN18 filtered Hits@10 {rep['hits_at_10']:.1f} (>= 85), MRR {rep['mrr']:.3f} (>= 0.80), "
           f"{elapsed:.0f}s (<= 14400s)")


FB15K_GAMMAS = (1, 2, 3, 5, 10, 50, 100)   # x 1e6 at full scale


def test_c7b_fb15k_stabilizes(tmp_path):
    src = _dataset_dir("MANDOLIN_FB15K_DIR")
    if src is None:
        blocked("7b", "FB15k", "MANDOLIN_FB15K_DIR")
    full = convert_tsv_split(src, tmp_path / "full")
    split = {n: load_ntriples(full / f"{n}.nt") for n in ("train", "valid", "test")}
    sub = subsample_predicates(split, 0.1, seed=0)
    scale = sum(map(len, sub.values())) / sum(map(len, split.values()))
    for n, triples in sub.items():
        write_ntriples(triples, tmp_path / f"{n}.nt")
    cfg = PipelineConfig(train=tmp_path / "train.nt", valid=tmp_path / "valid.nt", test=tmp_path / "test.nt",
                         out=tmp_path / "out", eta_bar=0.9).validate()
    gammas = [max(1, int(g * 1e6 * scale)) for g in FB15K_GAMMAS]
    rows = sweep_gamma(cfg, gammas, csv_path=tmp_path / "sweep.csv")
    hits = [r.hits_at_10 for r in rows]
    deltas = [abs(b - a) for g, a, b in zip(FB15K_GAMMAS, hits, hits[1:]) if g >= 5]
    record("7b", all(d < 1.0 for d in deltas),
           f"FB15k 10% predicates (scale {scale:.3f}); Hits@10 {['%.2f' % h for h in hits]}; "
           f"deltas beyond 5e6-equivalent {['%.2f' % d for d in deltas]} (< 1)")


# -- 8. DBLP-ACM linking ---------------------------------------------------------------

def test_c8_dblp_acm(tmp_path):
    src = _dataset_dir("MANDOLIN_DBLP_ACM_DIR")
    if src is None:
        blocked(8, "DBLP-ACM", "MANDOLIN_DBLP_ACM_DIR")
    triples, mapping = load_dblp_acm(src)
    write_ntriples(triples, tmp_path / "graph.nt")
    cfg = PipelineConfig(graph=tmp_path / "graph.nt", out=tmp_path / "out", similarity=True, eta_bar=0.9,
                         gamma=BENCH_GAMMA, chains=os.cpu_count() or 1).validate()
    t0 = time.perf_counter()
    recall = sameas_holdout_eval(mapping, sameas_predictor(cfg), fold=0.9, seed=0)
    elapsed = time.perf_counter() - t0
    counts = RunManifest.read(tmp_path / "out" / "manifest.json").counts
    n_rules, n_pred = counts.get("rules", 0), counts.get("predictions", 0)
    within = lambda v, ref: ref / 3 <= v <= ref * 3
    record(8, recall >= 0.60 and within(n_rules, 1500) and within(n_pred, 4730) and elapsed <= 5400,
           f"holdout recall {recall:.3f} (>= 0.60), rules {n_rules} (500..4500), predictions {n_pred} "
           f"(1577..14190), {elapsed:.0f}s (<= 5400s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s", "-p", "no:cacheprovider"]))
