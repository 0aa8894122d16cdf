"""Acceptance suite: one test, and one PASS/FAIL line, per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

import json
import math
import random
import time
from collections import deque
from itertools import combinations

import numpy as np
from sklearn.metrics import adjusted_rand_score

from blognet import synth
from blognet.cli import main
from blognet.cluster import brute_force_best_partition, greedy_cluster, iter_set_partitions, modularity
from blognet.corpus import VocabularyPolicy, build_corpus, index, select_vocabulary
from blognet.hrg import (
    HrgChain,
    SimpleGraph,
    balanced_dendrogram,
    dendrogram_from_nested,
    fit,
    log_likelihood,
    mcmc_step,
    node_statistics,
    random_balanced_dendrogram,
)
from blognet.simnet import (
    SimilarityGraph,
    SimilarityHistogram,
    build_graph,
    detect_duplicates,
    detect_outliers,
    fit_power_law,
    histogram,
    histogram_values,
    log_bin_edges,
)

RESULTS: list[str] = []

# 1000 blogs whose survivor count under the default filters is known exactly
E2E_SPEC = {"n_topics": 4, "blogs_per_topic": 250, "shared_vocab_size": 20000, "topic_vocab_size": 12000,
            "zipf_exponent": 0.6, "words_per_blog": 2000, "topic_purity": 0.6, "seed": 1}
SMALL_POLICY = VocabularyPolicy(min_count=3, keep_percentile=20)


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


# -- independent oracles ------------------------------------------------------

def all_pairs_jaccard(word_sets, threshold):
    out = {}
    for a, b in combinations(sorted(word_sets), 2):
        wa, wb = word_sets[a], word_sets[b]
        if not wa or not wb:
            continue
        s = len(wa & wb) / len(wa | wb)
        if s >= threshold:
            out[(a, b)] = s
    return out


def matrix_modularity(vertices, edges, labels):
    """Q from the adjacency matrix: fraction of weight inside clusters minus
    the expected fraction under random rewiring with the same strengths."""
    pos = {v: k for k, v in enumerate(vertices)}
    A = np.zeros((len(vertices), len(vertices)))
    for i, j, w in edges:
        A[pos[i], pos[j]] = A[pos[j], pos[i]] = w
    two_m = A.sum()
    k = A.sum(axis=1)
    q = 0.0
    for c in set(labels.values()):
        idx = [pos[v] for v in vertices if labels[v] == c]
        q += A[np.ix_(idx, idx)].sum() / two_m - (k[idx].sum() / two_m) ** 2
    return q


def bell_numbers(n):
    row, out = [1], [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
        out.append(row[0])
    return out


def double_factorial(k):
    return 1 if k <= 1 else k * double_factorial(k - 2)


def random_weighted_graph(rnd, n, p):
    verts = [f"v{i}" for i in range(n)]
    edges = [(a, b, rnd.uniform(0.03, 1.0)) for a, b in combinations(verts, 2) if rnd.random() < p]
    return SimilarityGraph.from_edges(edges, verts)


def small_corpus(seed, n_docs):
    topics = 2 + seed % 3
    spec = synth.TopicModelSpec(n_topics=topics, blogs_per_topic=max(1, n_docs // topics), shared_vocab_size=1500,
                                topic_vocab_size=1500, zipf_exponent=0.8, words_per_blog=300, topic_purity=0.5,
                                seed=seed)
    return synth.generate_corpus(spec)


def word_sets_of(docs, policy=SMALL_POLICY, min_wordset_size=10):
    vocab = select_vocabulary(index(docs), policy)
    return build_corpus(docs, vocab, min_wordset_size)


# -- criteria ---------------------------------------------------------------

def test_criterion_1_similarity_matches_all_pairs():
    rnd = random.Random(1)
    start = time.perf_counter()
    worst, mismatched = 0.0, []
    for seed in range(20):
        docs, _ = small_corpus(seed, rnd.randint(50, 300))
        corpus = word_sets_of(docs)
        graph = build_graph(corpus, 0.025)
        oracle = all_pairs_jaccard(dict(corpus.word_sets), 0.025)
        got = {(i, j): s for i, j, s in graph.edges}
        if got.keys() != oracle.keys():
            mismatched.append(seed)
            continue
        worst = max([worst] + [abs(got[k] - oracle[k]) for k in oracle])
    elapsed = time.perf_counter() - start
    ok = not mismatched and worst <= 1e-12 and elapsed < 30
    report(1, ok, f"20 corpora, edge sets identical={not mismatched}, max |dw|={worst:.1e}, {elapsed:.1f}s")


def test_criterion_2_modularity_exact():
    rnd = random.Random(2)
    worst = 0.0
    for _ in range(100):
        g = random_weighted_graph(rnd, rnd.randint(2, 14), rnd.uniform(0.2, 0.9))
        if not g.edges:
            g = SimilarityGraph.from_edges([("v0", "v1", 0.5)], g.vertices)
        labels = {v: rnd.randrange(4) for v in g.vertices}
        worst = max(worst, abs(modularity(g, labels) - matrix_modularity(g.vertices, g.edges, labels)))
    single = random_weighted_graph(rnd, 8, 0.6)
    q_single = modularity(single, {v: 0 for v in single.vertices})
    tri = SimilarityGraph.from_edges([(a, b, 1.0) for grp in ("abc", "xyz") for a, b in combinations(grp, 2)])
    q_tri = modularity(tri, {v: int(v in "xyz") for v in tri.vertices})
    ok = worst <= 1e-12 and q_single == 0.0 and q_tri == 0.5
    report(2, ok, f"100 pairs max |dQ|={worst:.1e}; single cluster Q={q_single!r}; two triangles Q={q_tri!r}")


def test_criterion_3_clustering_oracle():
    start = time.perf_counter()
    bell = bell_numbers(8)
    counts_ok = all(sum(1 for _ in iter_set_partitions(n)) == bell[n] for n in range(1, 9))
    rnd = random.Random(3)
    # the oracle's optimum equals the best Q over every enumerated labelling
    oracle_ok = True
    for _ in range(10):
        g = random_weighted_graph(rnd, rnd.randint(3, 8), 0.5)
        if not g.edges:
            continue
        best = brute_force_best_partition(g)
        top = max(matrix_modularity(g.vertices, g.edges, dict(zip(g.vertices, lab)))
                  for lab in iter_set_partitions(len(g.vertices)))
        oracle_ok &= abs(best.q - top) <= 1e-12
    # disjoint cliques with random weights, optionally joined by a weak bridge
    clique_ok, n_cliques = True, 0
    for sa in range(2, 5):
        for sb in range(2, 5):
            for bridge in (False, True):
                left = [f"a{i}" for i in range(sa)]
                right = [f"b{i}" for i in range(sb)]
                edges = [(u, v, rnd.uniform(0.5, 1.0)) for grp in (left, right) for u, v in combinations(grp, 2)]
                if bridge:
                    edges.append((left[0], right[0], 0.03))
                g = SimilarityGraph.from_edges(edges)
                greedy, best = greedy_cluster(g), brute_force_best_partition(g)
                clique_ok &= greedy.assignment == best.assignment and abs(greedy.q - best.q) <= 1e-12
                n_cliques += 1
    aris = []
    for seed in range(10):
        g, truth = synth.generate_planted_partition_graph([16] * 4, 0.9, 0.02, seed=seed)
        part = greedy_cluster(g)
        aris.append(adjusted_rand_score([truth.topic_of[v] for v in g.vertices],
                                        [part.assignment.get(v, -1) for v in g.vertices]))
    elapsed = time.perf_counter() - start
    planted_ok = all(a == 1.0 for a in aris)
    ok = counts_ok and oracle_ok and clique_ok and planted_ok and elapsed < 60
    report(3, ok, f"partition counts match Bell numbers={counts_ok}, oracle optimal={oracle_ok}, "
                  f"greedy==oracle on {n_cliques} clique graphs={clique_ok}, "
                  f"planted ARI=1.0 in {sum(a == 1.0 for a in aris)}/10, {elapsed:.1f}s")


def test_criterion_4_power_law_fit():
    bins = log_bin_edges(0.025, 50)
    width = np.diff(bins)
    centers = np.sqrt(bins[:-1] * bins[1:])
    exact = SimilarityHistogram(bins, 1e-3 * centers ** -4.0 * width)
    slope = fit_power_law(exact).slope
    exact_ok = abs(slope + 4.0) <= 1e-9
    slopes = []
    for seed in range(10):
        values = synth.pareto_similarities(20000, exponent=3.0, seed=seed)
        slopes.append(fit_power_law(histogram_values(values, 0.025, 50)).slope)
    pareto_ok = all(abs(s + 3.0) <= 0.15 for s in slopes)
    report(4, exact_ok and pareto_ok, f"exact line slope error={abs(slope + 4.0):.1e}; Pareto slopes "
                                      f"{min(slopes):.3f}..{max(slopes):.3f} (target -3.0 +/- 0.15)")


def test_criterion_5_anomaly_detection():
    # planted exact duplicates
    dup_ok, n_groups = True, 0
    for seed in range(5):
        docs, truth = small_corpus(100 + seed, 200)
        docs, truth = synth.inject_duplicates(docs, [2, 3, 4], 0.0, seed=seed, truth=truth)
        corpus = word_sets_of(docs, VocabularyPolicy(min_count=3, keep_percentile=60))
        survivors = set(corpus.word_sets)
        planted = [g for g in ([m for m in grp if m in survivors] for grp in truth.planted_duplicates) if len(g) > 1]
        found = [list(g) for g in detect_duplicates(build_graph(corpus), 0.8).duplicate_groups]
        dup_ok &= sorted(found) == sorted(planted) and len(planted) > 0
        n_groups += len(planted)
    # near-duplicate clique on a power-law background
    flagged = 0
    for seed in range(10):
        g, truth = synth.generate_anomaly_graph(seed=seed)
        hist = histogram(g)
        report_ = detect_outliers(g, fit_power_law(hist), hist=hist)
        flagged += set(truth.planted_splogs) <= set(report_.outlier_vertices)
    # clean corpora produce no duplicate groups
    false_groups = 0
    for seed in range(5):
        docs, _ = small_corpus(200 + seed, 200)
        false_groups += len(detect_duplicates(build_graph(word_sets_of(docs)), 0.8).duplicate_groups)
    ok = dup_ok and flagged == 10 and false_groups == 0
    report(5, ok, f"{n_groups} planted duplicate groups recovered exactly={dup_ok}; clique flagged in {flagged}/10; "
                  f"false duplicate groups={false_groups}")


def test_criterion_6_hrg_correctness():
    two = SimpleGraph.from_pairs([("a", "b")])
    empty_two = SimpleGraph(("a", "b"), ())
    tri = SimpleGraph.from_pairs([("a", "b"), ("b", "c"), ("a", "c")])
    cyc = SimpleGraph.from_pairs([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")])
    hand_ok = (log_likelihood(two, dendrogram_from_nested(("a", "b"))) == 0.0
               and log_likelihood(empty_two, dendrogram_from_nested(("a", "b"))) == 0.0
               and all(log_likelihood(tri, dendrogram_from_nested(t)) == 0.0
                       for t in ((("a", "b"), "c"), (("a", "c"), "b"), (("b", "c"), "a")))
               and abs(log_likelihood(cyc, dendrogram_from_nested((("a", "b"), ("c", "d")))) - 4 * math.log(0.5))
               <= 1e-9)
    rnd = random.Random(6)
    graphs = [tri, cyc]
    for n in (4, 5, 6):
        for _ in range(5):
            verts = [f"v{i}" for i in range(n)]
            graphs.append(SimpleGraph.from_pairs([p for p in combinations(verts, 2) if rnd.random() < 0.5], verts))
    sum_ok = incr_ok = True
    for g in graphs:
        chain = HrgChain(g, random_balanced_dendrogram(g.vertices, rnd))
        for _ in range(300):
            chain, _ = mcmc_step(chain, rnd)
            E, _, _ = node_statistics(g, chain.dendrogram())
            sum_ok &= sum(E) == len(g.edges)
            incr_ok &= E == chain.E[chain.n:] and abs(chain.loglik - chain.exact_loglik()) <= 1e-9
    reach = {}
    for n in range(3, 6):
        labels = [f"x{i}" for i in range(n)]
        start = HrgChain(SimpleGraph.from_pairs(list(zip(labels, labels[1:]))), balanced_dendrogram(labels))
        seen, queue = {start.dendrogram().topology()}, deque([start])
        while queue:
            chain = queue.popleft()
            for r in chain.movable:
                for variant in (0, 1):
                    nxt = chain.copy()
                    _, er, ep = nxt.propose(r, variant)
                    nxt.apply(r, variant, er, ep)
                    topo = nxt.dendrogram().topology()
                    if topo not in seen:
                        seen.add(topo)
                        queue.append(nxt)
        reach[n] = (len(seen), double_factorial(2 * n - 3))
    reach_ok = all(a == b for a, b in reach.values())
    ok = hand_ok and sum_ok and incr_ok and reach_ok
    report(6, ok, f"hand cases={hand_ok}; sum E_r == edges={sum_ok}; incremental == recomputed on "
                  f"{len(graphs)} graphs={incr_ok}; reachable topologies {reach}")


def test_criterion_7_hrg_recovers_planted_split():
    hits, slowest = 0, 0.0
    for seed in range(10):
        g, truth = synth.generate_planted_hierarchy_graph(synth.HierarchySpec(), seed=seed)
        start = time.perf_counter()
        res = fit(g, seed=seed)
        slowest = max(slowest, time.perf_counter() - start)
        hits += res.best_dendrogram.root_split() == truth.planted_hierarchy.root_split()
    ok = hits >= 9 and slowest < 60
    report(7, ok, f"root split recovered in {hits}/10 seeds, slowest run {slowest:.1f}s")


def _pipeline(root, spec_path):
    out = root / "run"
    steps = [["synth", spec_path], ["index", out / "corpus.jsonl"], ["graph", out / "corpus.jsonl"],
             ["cluster"], ["hierarchy", "--cluster-id", "0", "--hrg-steps", "200000", "--hrg-burn-in", "20000"]]
    start = time.perf_counter()
    for argv in steps:
        assert main([str(a) for a in argv] + ["-o", str(out)]) == 0, argv
    elapsed = time.perf_counter() - start
    return out, elapsed


def test_criterion_8_end_to_end(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(E2E_SPEC))
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    out_a, t_a = _pipeline(tmp_path / "a", spec_path)
    out_b, t_b = _pipeline(tmp_path / "b", spec_path)
    capsys.readouterr()
    files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
    different = [str(p) for p in files_a if not p.name.startswith("manifest-")
                 and (out_a / p).read_bytes() != (out_b / p).read_bytes()]
    # manifests hold wall-clock timings; the artifact digests they record must agree
    for p in files_a:
        if p.name.startswith("manifest-"):
            da = {k: v["sha256"] for k, v in json.loads((out_a / p).read_text())["artifacts"].items()}
            db = {k: v["sha256"] for k, v in json.loads((out_b / p).read_text())["artifacts"].items()}
            if da != db:
                different.append(str(p))
    truth = synth.GroundTruth.from_json((out_a / "ground_truth.json").read_text())
    survivors = json.loads((out_a / "graph.json").read_text())["vertices"]
    count_ok = len(survivors) == len(truth.expected_survivors) and survivors == truth.expected_survivors
    ok = files_a == files_b and not different and count_ok and max(t_a, t_b) < 60
    report(8, ok, f"{len(files_a)} artifacts byte-identical={not different and files_a == files_b}; "
                  f"survivors {len(survivors)} vs expected {len(truth.expected_survivors)}; "
                  f"runs {t_a:.1f}s and {t_b:.1f}s")
