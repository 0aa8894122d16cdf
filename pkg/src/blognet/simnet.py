"""Word-overlap similarity network over documents.

Pairwise similarity is the Jaccard index of two word sets. Pairs are found
through an inverted index, so two documents that share no word are never
looked at. The module also analyses the similarity distribution: a log-log
histogram, a power-law fit over its body, and two kinds of anomalies in its
tail (spam outliers and near-duplicate groups).
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import AbstractSet, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .corpus import Corpus

Edge = tuple[str, str, float]


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected weighted graph with canonical ``(i, j, s)`` edges, ``i < j``.

    ``vertices`` is sorted. ``edges`` is sorted by ``(i, j)``; every weight
    lies in ``[store_threshold, 1]``.
    """

    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    store_threshold: float = 0.025

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str, float]], vertices: Iterable[str] = (),
                   store_threshold: float = 0.025) -> "SimilarityGraph":
        canon = {}
        verts = set(vertices)
        for i, j, s in edges:
            if i == j:
                raise ValueError(f"self-loop on {i!r}")
            if i > j:
                i, j = j, i
            if (i, j) in canon:
                raise ValueError(f"duplicate edge {i!r}-{j!r}")
            canon[(i, j)] = float(s)
            verts.update((i, j))
        return cls(tuple(sorted(verts)),
                   tuple((i, j, s) for (i, j), s in sorted(canon.items())),
                   float(store_threshold))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def weights(self) -> np.ndarray:
        return np.fromiter((s for _, _, s in self.edges), dtype=float, count=len(self.edges))

    def adjacency(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {v: {} for v in self.vertices}
        for i, j, s in self.edges:
            adj[i][j] = s
            adj[j][i] = s
        return adj

    def subgraph(self, vertices: AbstractSet[str]) -> "SimilarityGraph":
        """Induced subgraph on ``vertices``."""
        keep = set(vertices) & set(self.vertices)
        edges = tuple(e for e in self.edges if e[0] in keep and e[1] in keep)
        return SimilarityGraph(tuple(sorted(keep)), edges, self.store_threshold)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_weighted_edges_from(self.edges, weight="s")
        return g


@dataclass(frozen=True)
class SimilarityHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        """Geometric bin centres (midpoints on a log axis)."""
        return np.sqrt(self.bin_edges[:-1] * self.bin_edges[1:])

    @property
    def density(self) -> np.ndarray:
        return self.counts / self.widths


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    fit_region: tuple[float, float]
    r_squared: float
    residual_std: float = 0.0
    n_points: int = 0

    def log_density(self, x) -> np.ndarray:
        """Fitted log10 density at similarity ``x``."""
        return self.intercept + self.slope * np.log10(x)


@dataclass(frozen=True)
class OutlierPolicy:
    k: float = 2.0
    n_bins: int = 50


@dataclass(frozen=True)
class AnomalyReport:
    outlier_edges: tuple[Edge, ...] = ()
    outlier_vertices: Mapping[str, int] = field(default_factory=dict)
    duplicate_groups: tuple[tuple[str, ...], ...] = ()


def jaccard(a: AbstractSet[str], b: AbstractSet[str]) -> float:
    """Shared words over all words of two sets."""
    if not a and not b:
        raise ValueError("undefined similarity: both word sets are empty")
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def build_inverted_index(word_sets: Mapping[str, AbstractSet[str]]) -> dict[str, list[str]]:
    """Map each word to the sorted list of documents containing it."""
    postings: dict[str, list[str]] = defaultdict(list)
    for doc in sorted(word_sets):
        for word in word_sets[doc]:
            postings[word].append(doc)
    return postings


def similarity_edges(word_sets: Mapping[str, AbstractSet[str]], store_threshold: float = 0.025) -> list[Edge]:
    """All pairs with Jaccard similarity >= ``store_threshold``.

    Intersections are accumulated pair by pair while walking posting lists;
    the union size then follows from the two set sizes.
    """
    if not 0 < store_threshold <= 1:
        raise ValueError(f"store_threshold must lie in (0, 1], got {store_threshold}")
    shared: dict[tuple[str, str], int] = defaultdict(int)
    for docs in build_inverted_index(word_sets).values():
        # posting lists are sorted, so every pair comes out canonical
        for pair in combinations(docs, 2):
            shared[pair] += 1
    edges = []
    for (i, j), inter in shared.items():
        s = inter / (len(word_sets[i]) + len(word_sets[j]) - inter)
        if s >= store_threshold:
            edges.append((i, j, s))
    edges.sort()
    return edges


def build_graph(corpus: Corpus | Mapping[str, AbstractSet[str]], store_threshold: float = 0.025) -> SimilarityGraph:
    word_sets = corpus.word_sets if isinstance(corpus, Corpus) else corpus
    edges = similarity_edges(word_sets, store_threshold)
    return SimilarityGraph(tuple(sorted(word_sets)), tuple(edges), float(store_threshold))


def brute_force_graph(word_sets: Mapping[str, AbstractSet[str]], store_threshold: float = 0.025) -> SimilarityGraph:
    """Reference all-pairs computation; quadratic, for checking only."""
    ids = sorted(word_sets)
    edges = []
    for a, b in combinations(ids, 2):
        s = len(word_sets[a] & word_sets[b]) / len(word_sets[a] | word_sets[b])
        if s >= store_threshold:
            edges.append((a, b, s))
    return SimilarityGraph(tuple(ids), tuple(edges), float(store_threshold))


# -- distribution analysis --------------------------------------------------

def log_bin_edges(lo: float, n_bins: int, hi: float = 1.0) -> np.ndarray:
    edges = np.geomspace(lo, hi, n_bins + 1)
    edges[0], edges[-1] = lo, hi
    return edges


def histogram_values(values: Sequence[float] | np.ndarray, lo: float, n_bins: int = 50,
                     hi: float = 1.0) -> SimilarityHistogram:
    """Log-spaced histogram over ``[lo, hi]``.

    Bins are left-closed and right-open except the last, which also holds
    ``hi``. Values outside ``[lo, hi]`` are rejected.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no edges to bin")
    if values.min() < lo or values.max() > hi:
        raise ValueError(f"values outside [{lo}, {hi}]")
    edges = log_bin_edges(lo, n_bins, hi)
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.minimum(idx, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    return SimilarityHistogram(edges, counts)


def histogram(graph: SimilarityGraph, n_bins: int = 50) -> SimilarityHistogram:
    if not graph.edges:
        raise ValueError("no edges to bin")
    return histogram_values(graph.weights, graph.store_threshold, n_bins)


def fit_power_law(hist: SimilarityHistogram, region: tuple[float, float] = (0.025, 0.2)) -> PowerLawFit:
    """Least-squares line through (log10 centre, log10 density).

    Only bins with a nonzero count whose centre lies inside ``region`` are
    used.
    """
    lo, hi = region
    centers = hist.centers
    mask = (hist.counts > 0) & (centers >= lo) & (centers <= hi)
    if mask.sum() < 3:
        raise ValueError("insufficient support for fit")
    x = np.log10(centers[mask])
    y = np.log10(hist.density[mask])
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(slope, intercept, (float(lo), float(hi)), r2,
                       float(np.std(resid)), int(mask.sum()))


def outlier_bins(hist: SimilarityHistogram, fit: PowerLawFit, k: float = 2.0) -> np.ndarray:
    """Boolean mask of bins above the fit region that sit unusually high.

    A bin is flagged when its log10 density exceeds the fitted line by more
    than ``k`` residual standard deviations of the fit, and its count exceeds
    the fitted expectation by more than ``k`` Poisson standard deviations.
    The second condition keeps single stray edges in the sparse tail from
    being flagged.
    """
    if math.isinf(k):
        return np.zeros(len(hist.counts), dtype=bool)
    centers = hist.centers
    above = hist.bin_edges[:-1] >= fit.fit_region[1]
    occupied = hist.counts > 0
    with np.errstate(divide="ignore"):
        observed = np.log10(hist.density)
    predicted = fit.log_density(centers)
    expected = 10.0 ** predicted * hist.widths
    residual_ok = observed - predicted > k * fit.residual_std + 1e-9
    count_ok = hist.counts - expected > k * np.sqrt(np.maximum(expected, 1.0))
    return above & occupied & residual_ok & count_ok


def detect_outliers(graph: SimilarityGraph, fit: PowerLawFit, policy: OutlierPolicy = OutlierPolicy(),
                    hist: SimilarityHistogram | None = None) -> AnomalyReport:
    """Flag edges that fall in outlier bins, and count them per vertex."""
    if not graph.edges:
        return AnomalyReport()
    if hist is None:
        hist = histogram(graph, policy.n_bins)
    flagged = outlier_bins(hist, fit, policy.k)
    if not flagged.any():
        return AnomalyReport()
    w = graph.weights
    idx = np.minimum(np.searchsorted(hist.bin_edges, w, side="right") - 1, len(hist.counts) - 1)
    edges = tuple(e for e, b in zip(graph.edges, idx) if flagged[b])
    per_vertex: dict[str, int] = defaultdict(int)
    for i, j, _ in edges:
        per_vertex[i] += 1
        per_vertex[j] += 1
    return AnomalyReport(outlier_edges=edges, outlier_vertices=dict(sorted(per_vertex.items())))


def connected_components(vertices: Iterable[str], pairs: Iterable[tuple[str, str]]) -> list[tuple[str, ...]]:
    """Components as sorted tuples, ordered by their smallest member."""
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            parent[rb] = ra
    groups: dict[str, list[str]] = defaultdict(list)
    for v in parent:
        groups[find(v)].append(v)
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0])


def detect_duplicates(graph: SimilarityGraph, dup_threshold: float = 0.8) -> AnomalyReport:
    """Groups of documents linked by chains of edges with s >= ``dup_threshold``.

    The first id in each group is its representative (the smallest id).
    """
    if not 0 < dup_threshold <= 1:
        raise ValueError(f"dup_threshold must lie in (0, 1], got {dup_threshold}")
    strong = [(i, j) for i, j, s in graph.edges if s >= dup_threshold]
    members = {v for pair in strong for v in pair}
    groups = [g for g in connected_components(members, strong) if len(g) >= 2]
    return AnomalyReport(duplicate_groups=tuple(groups))


def threshold_view(graph: SimilarityGraph, gamma: float) -> SimilarityGraph:
    """Edges with s >= ``gamma`` and the vertices they touch."""
    if gamma < graph.store_threshold:
        raise ValueError(f"view below stored resolution: gamma={gamma} < {graph.store_threshold}")
    edges = tuple(e for e in graph.edges if e[2] >= gamma)
    verts = {v for i, j, _ in edges for v in (i, j)}
    return SimilarityGraph(tuple(sorted(verts)), edges, graph.store_threshold)


# -- file formats -----------------------------------------------------------

def write_edges_tsv(graph: SimilarityGraph, path: str | Path) -> None:
    """``i<TAB>j<TAB>s`` rows sorted by (i, j), weights to 6 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, s in graph.edges:
            fh.write(f"{i}\t{j}\t{s:.6g}\n")


def read_edges_tsv(path: str | Path, vertices: Iterable[str] = (), store_threshold: float = 0.025) -> SimilarityGraph:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected i<TAB>j<TAB>s")
            edges.append((parts[0], parts[1], float(parts[2])))
    return SimilarityGraph.from_edges(edges, vertices, store_threshold)


def write_graphml(graph: SimilarityGraph, path: str | Path) -> None:
    nx.write_graphml(graph.to_networkx(), str(path))


def read_graphml(path: str | Path, store_threshold: float = 0.025) -> SimilarityGraph:
    g = nx.read_graphml(str(path))
    return SimilarityGraph.from_edges(((str(a), str(b), float(d["s"])) for a, b, d in g.edges(data=True)),
                                      (str(v) for v in g.nodes), store_threshold)


def write_histogram_csv(hist: SimilarityHistogram, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count", "density"])
        for lo, hi, c, d in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts, hist.density):
            writer.writerow([f"{lo:.10g}", f"{hi:.10g}", int(c), f"{d:.10g}"])


def read_histogram_csv(path: str | Path) -> SimilarityHistogram:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    edges = [float(r["bin_lo"]) for r in rows] + [float(rows[-1]["bin_hi"])]
    return SimilarityHistogram(np.array(edges), np.array([float(r["count"]) for r in rows]))


def write_anomalies_jsonl(report: AnomalyReport, path: str | Path) -> None:
    """One record per outlier vertex, then one per duplicate group."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v, n in report.outlier_vertices.items():
            fh.write(json.dumps({"kind": "outlier", "id": v, "flagged_edges": n}, sort_keys=True) + "\n")
        for group in report.duplicate_groups:
            fh.write(json.dumps({"kind": "duplicate_group", "representative": group[0],
                                 "members": list(group)}, sort_keys=True) + "\n")


def read_anomalies_jsonl(path: str | Path) -> AnomalyReport:
    vertices, groups = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["kind"] == "outlier":
                vertices[rec["id"]] = rec["flagged_edges"]
            else:
                groups.append(tuple(rec["members"]))
    return AnomalyReport(outlier_vertices=vertices, duplicate_groups=tuple(groups))
