from itertools import combinations

import numpy as np
import pytest

from blognet import synth
from blognet.cluster import greedy_cluster
from blognet.corpus import index, tokenize
from blognet.hrg import log_likelihood
from blognet.simnet import jaccard


def word_sets(docs):
    return {d.id: frozenset(d.text.split()) for d in docs}


def mean_similarity(sets, truth, same):
    vals = [jaccard(sets[a], sets[b]) for a, b in combinations(sorted(sets), 2)
            if (truth.topic_of[a] == truth.topic_of[b]) == same]
    return float(np.mean(vals))


SMALL = synth.TopicModelSpec(n_topics=3, blogs_per_topic=15, shared_vocab_size=300, topic_vocab_size=300,
                             words_per_blog=150, topic_purity=0.5, seed=11)


class TestCorpusGenerator:
    def test_deterministic(self):
        assert synth.generate_corpus(SMALL) == synth.generate_corpus(SMALL)

    def test_seed_matters(self):
        other = synth.TopicModelSpec(**{**SMALL.__dict__, "seed": 12})
        assert synth.generate_corpus(SMALL)[0] != synth.generate_corpus(other)[0]

    def test_ids_sorted_by_topic(self):
        docs, truth = synth.generate_corpus(SMALL)
        ids = [d.id for d in docs]
        assert ids == sorted(ids)
        assert [truth.topic_of[i] for i in ids] == sorted(truth.topic_of[i] for i in ids)

    def test_tokens_survive_tokenizer(self):
        docs, _ = synth.generate_corpus(SMALL)
        assert all(tokenize(d.text) == d.text.split() for d in docs[:5])

    def test_words_per_blog(self):
        docs, _ = synth.generate_corpus(SMALL)
        assert all(len(d.text.split()) == SMALL.words_per_blog for d in docs)

    def test_zero_purity_topics_indistinguishable(self):
        spec = synth.TopicModelSpec(**{**SMALL.__dict__, "topic_purity": 0.0})
        docs, truth = synth.generate_corpus(spec)
        sets = word_sets(docs)
        within, across = mean_similarity(sets, truth, True), mean_similarity(sets, truth, False)
        assert within == pytest.approx(across, rel=0.05)

    def test_full_purity_no_cross_topic_overlap(self):
        spec = synth.TopicModelSpec(**{**SMALL.__dict__, "topic_purity": 1.0})
        docs, truth = synth.generate_corpus(spec)
        sets = word_sets(docs)
        assert mean_similarity(sets, truth, False) == 0.0
        assert mean_similarity(sets, truth, True) > 0.0

    def test_zipf_slope(self):
        spec = synth.TopicModelSpec(n_topics=1, blogs_per_topic=100, shared_vocab_size=1, topic_vocab_size=1000,
                                    zipf_exponent=1.0, words_per_blog=100, topic_purity=1.0, seed=2)
        docs, _ = synth.generate_corpus(spec)
        table = index(docs)
        assert table.total_tokens == 10_000
        assert synth.rank_frequency_slope(table.counts, max_rank=100) == pytest.approx(-1.0, abs=0.15)

    def test_coverage(self):
        docs, truth = synth.generate_corpus(SMALL)
        assert truth.vocabulary_coverage == len(index(docs).counts)

    @pytest.mark.parametrize("field,value", [("n_topics", 0), ("words_per_blog", -1), ("topic_purity", 1.5),
                                             ("zipf_exponent", 0.0)])
    def test_invalid_spec(self, field, value):
        with pytest.raises(ValueError, match=field):
            synth.TopicModelSpec(**{field: value})

    def test_unknown_spec_field(self):
        with pytest.raises(ValueError, match="n_blogs"):
            synth.TopicModelSpec.from_dict({"n_blogs": 3})

    def test_ground_truth_json_round_trip(self):
        _, truth = synth.generate_corpus(SMALL)
        assert synth.GroundTruth.from_json(truth.to_json()) == truth


class TestDuplicates:
    def test_exact_copies(self):
        docs, truth = synth.generate_corpus(SMALL)
        out, truth = synth.inject_duplicates(docs, [3, 2], 0.0, seed=1, truth=truth)
        assert len(out) == len(docs) + 3
        sets = word_sets(out)
        for group in truth.planted_duplicates:
            for a, b in combinations(group, 2):
                assert jaccard(sets[a], sets[b]) == 1.0
        members = [m for g in truth.planted_duplicates for m in g]
        assert len(members) == len(set(members))
        assert set(members) <= set(sets)

    def test_mutated_copies(self):
        docs, truth = synth.generate_corpus(SMALL)
        out, truth = synth.inject_duplicates(docs, [4], 0.5, seed=2, truth=truth)
        sets = word_sets(out)
        group = truth.planted_duplicates[0]
        within = [jaccard(sets[a], sets[b]) for a, b in combinations(group, 2)]
        baseline = np.mean([jaccard(sets[a], sets[b]) for a, b in combinations([d.id for d in docs], 2)])
        assert all(baseline < s < 1.0 for s in within)

    def test_no_groups(self):
        docs, truth = synth.generate_corpus(SMALL)
        out, truth2 = synth.inject_duplicates(docs, [], 0.3, truth=truth)
        assert out == docs
        assert truth2 == truth

    def test_invalid_rate(self):
        docs, _ = synth.generate_corpus(SMALL)
        with pytest.raises(ValueError):
            synth.inject_duplicates(docs, [2], 1.0)


class TestGraphGenerators:
    def test_disjoint_cliques(self):
        g, truth = synth.generate_planted_partition_graph([4, 5], 1.0, 0.0, seed=0)
        assert g.n_edges == 6 + 10
        assert all(truth.topic_of[i] == truth.topic_of[j] for i, j, _ in g.edges)
        assert all(s == 1.0 for *_, s in g.edges)

    def test_no_structure_low_modularity(self):
        g, _ = synth.generate_planted_partition_graph([16] * 4, 0.9, 0.9, seed=0)
        assert greedy_cluster(g).q < 0.05

    def test_invalid_probabilities(self):
        with pytest.raises(ValueError):
            synth.generate_planted_partition_graph([3], 0.1, 0.5)

    def test_hierarchy_one_level_is_partition(self):
        g, truth = synth.generate_planted_hierarchy_graph(synth.HierarchySpec((3,), 5, (1.0, 0.0)), seed=0)
        assert len(g.components()) == 3
        assert sorted(len(c) for c in g.components()) == [5, 5, 5]
        assert set(truth.planted_hierarchy.leaves) == set(g.vertices)

    def test_hierarchy_levels(self):
        g, truth = synth.generate_planted_hierarchy_graph(seed=0)
        assert len(g.vertices) == 32
        split = truth.planted_hierarchy.root_split()
        assert sorted(len(s) for s in split) == [16, 16]
        assert {frozenset(truth.topic_of[v] for v in s) for s in split} == {frozenset([0]), frozenset([1])}
        assert log_likelihood(g, truth.planted_hierarchy) <= 0

    def test_hierarchy_rejects_increasing_probabilities(self):
        with pytest.raises(ValueError):
            synth.HierarchySpec((2,), 4, (0.1, 0.5))

    def test_pareto_bounds(self):
        x = synth.pareto_similarities(10_000, 4.0, seed=1)
        assert x.min() >= 0.025 and x.max() <= 1.0
        # P(s > 0.05) = (0.05^-3 - 1) / (0.025^-3 - 1) for density s^-4 on [0.025, 1]
        expected = (0.05 ** -3 - 1) / (0.025 ** -3 - 1)
        assert np.mean(x > 0.05) == pytest.approx(expected, abs=0.01)

    def test_anomaly_graph(self):
        g, truth = synth.generate_anomaly_graph(n_vertices=300, n_edges=1000, seed=3)
        assert g.n_edges == 1000 + 45
        assert len(truth.planted_splogs) == 10
        assert all(0.58 <= s <= 0.62 for i, j, s in g.edges if i.startswith("splog"))

    def test_expected_survivors_brute_force(self):
        tokens = {"a": ["x"] * 3 + ["y"], "b": ["y", "z"], "c": ["z"]}
        assert synth.expected_survivors(tokens, min_count=1, keep_percentile=100, min_wordset_size=2) == ["a", "b"]
