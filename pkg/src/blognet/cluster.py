"""Weighted modularity and greedy agglomerative cluster inference."""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .simnet import SimilarityGraph


@dataclass(frozen=True)
class Partition:
    """Cluster labels 0..n_clusters-1 for the non-isolated vertices of a graph.

    Labels are assigned in order of each cluster's smallest member id.
    Vertices without edges are listed in ``unclustered``.
    """

    assignment: Mapping[str, int]
    n_clusters: int
    q: float
    unclustered: tuple[str, ...] = field(default=())

    def clusters(self) -> list[list[str]]:
        groups: list[list[str]] = [[] for _ in range(self.n_clusters)]
        for v, c in sorted(self.assignment.items()):
            groups[c].append(v)
        return groups

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters()]


@dataclass(frozen=True)
class ClusterStats:
    """Per-cluster internal weight fraction ``r`` and incident weight fraction ``s``."""

    r: tuple[float, ...]
    s: tuple[float, ...]


def canonical_labels(groups) -> dict[str, int]:
    """Dense labels ordered by smallest member."""
    ordered = sorted((sorted(g) for g in groups if g), key=lambda g: g[0])
    return {v: c for c, g in enumerate(ordered) for v in g}


def _check_cover(graph: SimilarityGraph, assignment: Mapping[str, int]) -> None:
    known = set(graph.vertices)
    extra = [v for v in assignment if v not in known]
    if extra:
        raise ValueError(f"partition assigns unknown vertex {extra[0]!r}")
    for i, j, _ in graph.edges:
        for v in (i, j):
            if v not in assignment:
                raise ValueError(f"vertex {v!r} is not covered by the partition")


def cluster_stats(graph: SimilarityGraph, assignment: Mapping[str, int]) -> ClusterStats:
    if not graph.edges:
        raise ValueError("modularity undefined: graph has no edges")
    _check_cover(graph, assignment)
    labels = sorted(set(assignment.values()))
    pos = {c: k for k, c in enumerate(labels)}
    internal = [[] for _ in labels]
    incident = [[] for _ in labels]
    for i, j, w in graph.edges:
        ci, cj = pos[assignment[i]], pos[assignment[j]]
        if ci == cj:
            internal[ci].append(w)
        incident[ci].append(w)
        incident[cj].append(w)
    total = math.fsum(w for _, _, w in graph.edges)
    r = tuple(math.fsum(x) / total for x in internal)
    s = tuple(math.fsum(x) / (2.0 * total) for x in incident)
    return ClusterStats(r, s)


def modularity(graph: SimilarityGraph, partition: Partition | Mapping[str, int]) -> float:
    """Sum over clusters of internal weight fraction minus squared incident fraction."""
    assignment = partition.assignment if isinstance(partition, Partition) else partition
    stats = cluster_stats(graph, assignment)
    return math.fsum(r - s * s for r, s in zip(stats.r, stats.s))


def make_partition(graph: SimilarityGraph, groups) -> Partition:
    assignment = canonical_labels(groups)
    covered = set(assignment)
    unclustered = tuple(v for v in graph.vertices if v not in covered)
    return Partition(assignment, len(set(assignment.values())), modularity(graph, assignment), unclustered)


def _non_isolated(graph: SimilarityGraph) -> list[str]:
    touched = {v for i, j, _ in graph.edges for v in (i, j)}
    return [v for v in graph.vertices if v in touched]


def greedy_cluster(graph: SimilarityGraph) -> Partition:
    """Agglomerative modularity maximisation.

    Starts from singletons and keeps merging the pair of connected clusters
    with the largest modularity gain until no merge gains anything. Gains
    live in a heap with lazy invalidation; ties go to the pair with the
    smaller labels.
    """
    if not graph.edges:
        raise ValueError("modularity undefined: graph has no edges")
    verts = _non_isolated(graph)
    label = {v: k for k, v in enumerate(verts)}
    total = math.fsum(w for _, _, w in graph.edges)
    two_m = 2.0 * total

    a = [0.0] * len(verts)
    between: list[dict[int, float]] = [defaultdict(float) for _ in verts]
    for i, j, w in graph.edges:
        li, lj = label[i], label[j]
        a[li] += w / two_m
        a[lj] += w / two_m
        between[li][lj] += w / two_m
        between[lj][li] += w / two_m

    # dq[i][j] = gain of merging clusters i and j
    dq: list[dict[int, float]] = [
        {j: 2.0 * (e - a[i] * a[j]) for j, e in between[i].items()} for i in range(len(verts))
    ]
    heap = [(-g, i, j) for i in range(len(verts)) for j, g in dq[i].items() if i < j]
    heapq.heapify(heap)
    members = {i: [v] for v, i in label.items()}

    while heap:
        neg, i, j = heapq.heappop(heap)
        if i not in members or j not in members or dq[i].get(j) != -neg:
            continue
        if -neg <= 0.0:
            break
        # j is absorbed into i (i < j always holds for heap entries)
        di, dj = dq[i], dq[j]
        for k in set(di) | set(dj):
            if k in (i, j):
                continue
            if k in di and k in dj:
                g = di[k] + dj[k]
            elif k in di:
                g = di[k] - 2.0 * a[j] * a[k]
            else:
                g = dj[k] - 2.0 * a[i] * a[k]
            di[k] = g
            dq[k][i] = g
            dq[k].pop(j, None)
            lo, hi = (i, k) if i < k else (k, i)
            heapq.heappush(heap, (-g, lo, hi))
        di.pop(j, None)
        dq[j] = {}
        a[i] += a[j]
        a[j] = 0.0
        members[i].extend(members.pop(j))

    return make_partition(graph, members.values())


def iter_set_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """All set partitions of ``n`` items as restricted growth strings, in
    lexicographic order."""
    if n == 0:
        yield ()
        return
    rgs = [0] * n

    def rec(pos: int, top: int):
        if pos == n:
            yield tuple(rgs)
            return
        for c in range(top + 2):
            rgs[pos] = c
            yield from rec(pos + 1, max(top, c))

    rgs[0] = 0
    yield from rec(1, 0)


ORACLE_LIMIT = 10


def brute_force_best_partition(graph: SimilarityGraph, tol: float = 1e-12) -> Partition:
    """Exhaustive modularity maximisation over all set partitions.

    Ties (within ``tol``) go to fewer clusters, then to the lexicographically
    smallest labelling. Isolated vertices are left unclustered.
    """
    if not graph.edges:
        raise ValueError("modularity undefined: graph has no edges")
    verts = _non_isolated(graph)
    n = len(verts)
    if n > ORACLE_LIMIT:
        raise ValueError(f"oracle limit: {n} vertices > {ORACLE_LIMIT}")
    pos = {v: k for k, v in enumerate(verts)}
    total = math.fsum(w for _, _, w in graph.edges)
    edges = [(pos[i], pos[j], w / total) for i, j, w in graph.edges]
    deg = [0.0] * n
    for i, j, w in edges:
        deg[i] += w / 2.0
        deg[j] += w / 2.0

    best_key, best = None, None
    for rgs in iter_set_partitions(n):
        k = max(rgs) + 1
        r = [0.0] * k
        s = [0.0] * k
        for i, j, w in edges:
            if rgs[i] == rgs[j]:
                r[rgs[i]] += w
        for v in range(n):
            s[rgs[v]] += deg[v]
        q = math.fsum(r) - math.fsum(x * x for x in s)
        if best_key is None or q > best_key[0] + tol or (abs(q - best_key[0]) <= tol and k < best_key[1]):
            best_key, best = (q, k), rgs
    groups = defaultdict(list)
    for v, c in zip(verts, best):
        groups[c].append(v)
    return make_partition(graph, groups.values())
