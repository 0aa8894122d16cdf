"""Synthetic corpora and graphs with known ground truth.

Everything here is a pure function of its parameters and seed, so the
generators double as oracles for the rest of the package.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import RawDocument
from .hrg import Dendrogram, SimpleGraph, dendrogram_from_nested
from .simnet import SimilarityGraph


@dataclass(frozen=True)
class TopicModelSpec:
    n_topics: int = 4
    blogs_per_topic: int = 25
    shared_vocab_size: int = 2000
    topic_vocab_size: int = 2000
    zipf_exponent: float = 1.0
    words_per_blog: int = 400
    topic_purity: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_topics", "blogs_per_topic", "shared_vocab_size", "topic_vocab_size", "words_per_blog"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.zipf_exponent > 0:
            raise ValueError(f"zipf_exponent must be > 0, got {self.zipf_exponent!r}")
        if not 0 <= self.topic_purity <= 1:
            raise ValueError(f"topic_purity must lie in [0, 1], got {self.topic_purity!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "TopicModelSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown spec field: {unknown[0]}")
        return cls(**dict(data))


@dataclass
class GroundTruth:
    topic_of: dict[str, int] = field(default_factory=dict)
    planted_duplicates: list[list[str]] = field(default_factory=list)
    planted_splogs: list[str] = field(default_factory=list)
    planted_hierarchy: Dendrogram | None = None
    vocabulary_coverage: int = 0
    expected_survivors: list[str] = field(default_factory=list)
    survivor_policy: dict = field(default_factory=dict)

    def to_json(self) -> str:
        data = asdict(self)
        data["planted_hierarchy"] = None
        if self.planted_hierarchy is not None:
            from .hrg import export_newick
            data["planted_hierarchy"] = export_newick(self.planted_hierarchy)
        return json.dumps(data, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        data = json.loads(text)
        tree = data.pop("planted_hierarchy", None)
        gt = cls(**data)
        if tree:
            from .hrg import parse_newick
            gt.planted_hierarchy = parse_newick(tree)
        return gt


def word_label(index: int, length: int) -> str:
    """Lowercase letter string of fixed ``length`` encoding ``index``."""
    letters = []
    for _ in range(length):
        letters.append(chr(ord("a") + index % 26))
        index //= 26
    return "".join(reversed(letters))


def zipf_probabilities(size: int, exponent: float) -> np.ndarray:
    p = 1.0 / np.arange(1, size + 1, dtype=float) ** exponent
    return p / p.sum()


def pool_words(spec: TopicModelSpec) -> tuple[list[str], list[list[str]]]:
    """Word labels for the shared pool and each topic pool, in rank order.

    Labels are a seeded random permutation of fixed-length letter strings,
    so alphabetical order carries no information about pool or rank.
    """
    rng = np.random.default_rng([spec.seed, 1])
    total = spec.shared_vocab_size + spec.n_topics * spec.topic_vocab_size
    length = max(3, math.ceil(math.log(total * 4, 26)))
    codes = rng.choice(26 ** length, size=total, replace=False)
    labels = [word_label(int(c), length) for c in codes]
    shared = labels[:spec.shared_vocab_size]
    topics = [labels[spec.shared_vocab_size + t * spec.topic_vocab_size:
                     spec.shared_vocab_size + (t + 1) * spec.topic_vocab_size] for t in range(spec.n_topics)]
    return shared, topics


def expected_survivors(token_lists: Mapping[str, Sequence[str]], min_count: int = 10,
                       keep_percentile: float = 5.0, min_wordset_size: int = 25) -> list[str]:
    """Documents that pass vocabulary and word-set filtering, computed
    directly from generated token lists."""
    counts = Counter(tok for toks in token_lists.values() for tok in toks)
    ranked = sorted((c, w) for w, c in counts.items() if c >= min_count)
    n_keep = max(1, int(np.ceil(round(keep_percentile * len(ranked) / 100.0, 9))))
    kept = {w for _, w in ranked[:n_keep]} if ranked else set()
    return sorted(d for d, toks in token_lists.items() if len(kept.intersection(toks)) >= min_wordset_size)


def generate_token_lists(spec: TopicModelSpec) -> tuple[dict[str, list[str]], dict[str, int]]:
    rng = np.random.default_rng(spec.seed)
    shared_cdf = np.cumsum(zipf_probabilities(spec.shared_vocab_size, spec.zipf_exponent))
    topic_cdf = np.cumsum(zipf_probabilities(spec.topic_vocab_size, spec.zipf_exponent))
    shared_words, topic_words = pool_words(spec)
    n_topic = int(round(spec.topic_purity * spec.words_per_blog))
    n_shared = spec.words_per_blog - n_topic
    width = max(4, len(str(spec.blogs_per_topic - 1)))
    tokens: dict[str, list[str]] = {}
    topic_of: dict[str, int] = {}
    for t in range(spec.n_topics):
        for b in range(spec.blogs_per_topic):
            doc_id = f"t{t:02d}-{b:0{width}d}"
            ti = np.searchsorted(topic_cdf, rng.random(n_topic) * topic_cdf[-1], side="right")
            si = np.searchsorted(shared_cdf, rng.random(n_shared) * shared_cdf[-1], side="right")
            ti = np.minimum(ti, spec.topic_vocab_size - 1)
            si = np.minimum(si, spec.shared_vocab_size - 1)
            toks = [topic_words[t][k] for k in ti] + [shared_words[k] for k in si]
            order = rng.permutation(len(toks))
            tokens[doc_id] = [toks[k] for k in order]
            topic_of[doc_id] = t
    return tokens, topic_of


def generate_corpus(spec: TopicModelSpec) -> tuple[list[RawDocument], GroundTruth]:
    """Blogs that mix Zipf-distributed words from a topic pool and a shared pool."""
    tokens, topic_of = generate_token_lists(spec)
    docs = [RawDocument(d, " ".join(toks)) for d, toks in tokens.items()]
    truth = _truth_for(tokens, topic_of)
    return docs, truth


def _truth_for(tokens: Mapping[str, Sequence[str]], topic_of: Mapping[str, int]) -> GroundTruth:
    policy = {"min_count": 10, "keep_percentile": 5.0, "min_wordset_size": 25}
    return GroundTruth(
        topic_of=dict(topic_of),
        vocabulary_coverage=len({w for toks in tokens.values() for w in toks}),
        expected_survivors=expected_survivors(tokens, **policy),
        survivor_policy=policy,
    )


def inject_duplicates(docs: Sequence[RawDocument], group_sizes: Sequence[int], mutation_rate: float = 0.0,
                      seed: int = 0, truth: GroundTruth | None = None) -> tuple[list[RawDocument], GroundTruth]:
    """Append near-copies of randomly chosen documents.

    Each group is a source document plus ``size - 1`` copies in which a
    ``mutation_rate`` fraction of the token positions is redrawn from the
    corpus-wide token pool.
    """
    if not 0 <= mutation_rate < 1:
        raise ValueError("mutation_rate must lie in [0, 1)")
    if any(g < 2 for g in group_sizes):
        raise ValueError("duplicate groups need at least two members")
    if len(group_sizes) > len(docs):
        raise ValueError("more duplicate groups than documents")
    truth = GroundTruth() if truth is None else GroundTruth(**{f.name: getattr(truth, f.name) for f in fields(truth)})
    out = list(docs)
    if not group_sizes:
        return out, truth
    rng = np.random.default_rng(seed)
    split = [d.text.split() for d in docs]
    pool = [tok for toks in split for tok in toks]
    sources = rng.choice(len(docs), size=len(group_sizes), replace=False)
    groups = []
    for src, size in zip(sorted(int(s) for s in sources), group_sizes):
        base = docs[src]
        group = [base.id]
        for k in range(1, size):
            toks = list(split[src])
            n_mut = int(round(mutation_rate * len(toks)))
            if n_mut:
                where = rng.choice(len(toks), size=n_mut, replace=False)
                for w, new in zip(where, rng.integers(0, len(pool), size=n_mut)):
                    toks[w] = pool[new]
            copy_id = f"{base.id}-dup{k}"
            out.append(RawDocument(copy_id, " ".join(toks)))
            group.append(copy_id)
            if base.id in truth.topic_of:
                truth.topic_of[copy_id] = truth.topic_of[base.id]
        groups.append(sorted(group))
    truth.planted_duplicates = list(truth.planted_duplicates) + groups
    tokens = {d.id: d.text.split() for d in out}
    truth.vocabulary_coverage = len({w for toks in tokens.values() for w in toks})
    truth.expected_survivors = expected_survivors(tokens, **(truth.survivor_policy or {}))
    return out, truth


def write_corpus_jsonl(docs: Sequence[RawDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.text}, ensure_ascii=False) + "\n")


# -- graphs -----------------------------------------------------------------

def _vertex_ids(prefix: str, count: int) -> list[str]:
    width = max(3, len(str(count - 1)))
    return [f"{prefix}{k:0{width}d}" for k in range(count)]


def generate_planted_partition_graph(blocks: Sequence[int], p_in: float, p_out: float,
                                     seed: int = 0) -> tuple[SimilarityGraph, GroundTruth]:
    """Unit-weight graph with edge probability ``p_in`` inside blocks and
    ``p_out`` across them."""
    if not 0 <= p_out <= p_in <= 1:
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    rng = np.random.default_rng(seed)
    verts, topic = [], {}
    for b, size in enumerate(blocks):
        for v in _vertex_ids(f"b{b:02d}-", size):
            verts.append(v)
            topic[v] = b
    edges = []
    for u, v in combinations(verts, 2):
        p = p_in if topic[u] == topic[v] else p_out
        if rng.random() < p:
            edges.append((u, v, 1.0))
    return SimilarityGraph.from_edges(edges, verts), GroundTruth(topic_of=topic)


@dataclass(frozen=True)
class HierarchySpec:
    """Nested block model: ``branching[0]`` top-level groups, each split into
    ``branching[1]`` subgroups and so on, down to leaf groups of
    ``group_size`` vertices. ``probabilities[0]`` applies within a leaf group,
    ``probabilities[-1]`` across top-level groups."""

    branching: tuple[int, ...] = (2, 2)
    group_size: int = 8
    probabilities: tuple[float, ...] = (0.9, 0.3, 0.05)

    def __post_init__(self):
        if len(self.probabilities) != len(self.branching) + 1:
            raise ValueError("need one probability per level plus one for leaf groups")
        if any(a < b for a, b in zip(self.probabilities, self.probabilities[1:])):
            raise ValueError("probabilities must not increase with level")
        if self.group_size < 1 or any(b < 1 for b in self.branching):
            raise ValueError("sizes must be >= 1")


def _binary_nested(items: list):
    if len(items) == 1:
        return items[0]
    mid = (len(items) + 1) // 2
    return (_binary_nested(items[:mid]), _binary_nested(items[mid:]))


def generate_planted_hierarchy_graph(spec: HierarchySpec = HierarchySpec(),
                                     seed: int = 0) -> tuple[SimpleGraph, GroundTruth]:
    """Graph from a nested block model, with the planted dendrogram.

    Vertex ids encode their path, e.g. ``g1.0-003`` is vertex 3 in subgroup 0
    of top-level group 1. Two vertices connect with the probability of the
    deepest level whose group they share.
    """
    rng = np.random.default_rng(seed)
    paths: list[tuple[int, ...]] = [()]
    for b in spec.branching:
        paths = [p + (k,) for p in paths for k in range(b)]
    verts, path_of = [], {}
    groups = []
    for p in paths:
        ids = _vertex_ids("g" + ".".join(map(str, p)) + "-" if p else "g-", spec.group_size)
        groups.append(ids)
        for v in ids:
            verts.append(v)
            path_of[v] = p
    depth = len(spec.branching)
    edges = []
    for u, v in combinations(verts, 2):
        pu, pv = path_of[u], path_of[v]
        shared = 0
        while shared < depth and pu[shared] == pv[shared]:
            shared += 1
        # shared == depth -> same leaf group -> probabilities[0]
        if rng.random() < spec.probabilities[depth - shared]:
            edges.append((u, v))

    def nest(prefix: tuple[int, ...], level: int):
        if level == depth:
            return _binary_nested(groups[paths.index(prefix)])
        return _binary_nested([nest(prefix + (k,), level + 1) for k in range(spec.branching[level])])

    tree = dendrogram_from_nested(nest((), 0))
    top = {v: path_of[v][0] if depth else 0 for v in verts}
    return SimpleGraph.from_pairs(edges, verts), GroundTruth(topic_of=top, planted_hierarchy=tree)


def pareto_similarities(n: int, exponent: float = 3.0, lo: float = 0.025, hi: float = 1.0,
                        seed: int = 0) -> np.ndarray:
    """Samples on ``[lo, hi]`` with density proportional to ``s ** -exponent``.

    Drawn by inverting the truncated power-law CDF.
    """
    if exponent <= 1:
        raise ValueError("exponent must exceed 1")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    a = 1.0 - exponent
    return (lo ** a + u * (hi ** a - lo ** a)) ** (1.0 / a)


def generate_anomaly_graph(n_vertices: int = 2000, n_edges: int = 20000, exponent: float = 4.0,
                           clique_size: int = 10, clique_similarity: float = 0.6, jitter: float = 0.02,
                           store_threshold: float = 0.025, seed: int = 0) -> tuple[SimilarityGraph, GroundTruth]:
    """Power-law background similarities plus a planted near-duplicate clique.

    Background edges join random vertex pairs with weights drawn from a
    power law of the given exponent. The clique's vertices are new
    (``splog-*``) and their mutual weights are uniform on
    ``clique_similarity +/- jitter``.
    """
    rng = np.random.default_rng(seed)
    verts = _vertex_ids("v", n_vertices)
    weights = pareto_similarities(n_edges, exponent, store_threshold, 1.0, seed=int(rng.integers(2**31)))
    pairs: set[tuple[int, int]] = set()
    while len(pairs) < n_edges:
        a, b = rng.integers(0, n_vertices, size=2)
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = [(verts[a], verts[b], float(w)) for (a, b), w in zip(sorted(pairs), weights)]
    splogs = _vertex_ids("splog-", clique_size)
    for u, v in combinations(splogs, 2):
        edges.append((u, v, float(rng.uniform(clique_similarity - jitter, clique_similarity + jitter))))
    graph = SimilarityGraph.from_edges(edges, verts + splogs, store_threshold)
    return graph, GroundTruth(planted_splogs=splogs)


def rank_frequency_slope(counts: Mapping[str, int] | Sequence[int], max_rank: int | None = None) -> float:
    """Least-squares slope of log frequency against log rank."""
    values = sorted(counts.values() if isinstance(counts, Mapping) else counts, reverse=True)
    if max_rank:
        values = values[:max_rank]
    ranks = np.arange(1, len(values) + 1, dtype=float)
    slope, _ = np.polyfit(np.log10(ranks), np.log10(np.asarray(values, dtype=float)), 1)
    return float(slope)


def expected_count(rank: int, size: int, exponent: float, total: int) -> float:
    """Expected occurrences of the word at ``rank`` among ``total`` draws."""
    norm = math.fsum(1.0 / k ** exponent for k in range(1, size + 1))
    return total / (rank ** exponent * norm)
