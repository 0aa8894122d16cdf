"""Hierarchical random graphs fitted by Markov chain Monte Carlo.

A dendrogram is a rooted binary tree whose leaves are the graph's vertices.
Each internal node ``r`` gives every pair of vertices whose lowest common
ancestor is ``r`` the same connection probability ``theta_r``. With ``L_r``
and ``R_r`` leaves below its two children and ``E_r`` edges across them, the
maximum-likelihood choice is ``theta_r = E_r / (L_r * R_r)`` and

    log L(D) = sum_r  E_r log theta_r + (L_r R_r - E_r) log(1 - theta_r)

with ``0 log 0 = 0``. Dendrograms are sampled with a Metropolis chain whose
moves rearrange the three subtrees around an internal node.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .simnet import SimilarityGraph, connected_components, threshold_view


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected, unweighted, loop-free graph with sorted vertices."""

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], vertices: Iterable[str] = ()) -> "SimpleGraph":
        canon = set()
        verts = set(vertices)
        for a, b in pairs:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            canon.add((a, b) if a < b else (b, a))
            verts.update((a, b))
        return cls(tuple(sorted(verts)), tuple(sorted(canon)))

    def components(self) -> list[tuple[str, ...]]:
        return connected_components(self.vertices, self.edges)

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def subgraph(self, vertices: Iterable[str]) -> "SimpleGraph":
        keep = set(vertices)
        return SimpleGraph(tuple(v for v in self.vertices if v in keep),
                           tuple(e for e in self.edges if e[0] in keep and e[1] in keep))


def binarize(graph: SimilarityGraph, gamma: float) -> SimpleGraph:
    """Unweighted graph of the edges with s >= ``gamma``; isolates dropped."""
    view = threshold_view(graph, gamma)
    return SimpleGraph(view.vertices, tuple((i, j) for i, j, _ in view.edges))


def _as_simple(graph) -> SimpleGraph:
    if isinstance(graph, SimpleGraph):
        return graph
    if isinstance(graph, SimilarityGraph):
        return SimpleGraph(graph.vertices, tuple((i, j) for i, j, _ in graph.edges))
    raise TypeError(f"expected a SimpleGraph, got {type(graph).__name__}")


# -- dendrograms ------------------------------------------------------------

@dataclass(frozen=True)
class Dendrogram:
    """Full binary tree over ``n`` labelled leaves.

    Node ids ``0..n-1`` are the leaves (in ``leaves`` order) and
    ``n..2n-2`` the internal nodes; ``children[k]`` holds the two children
    of internal node ``n + k`` and ``theta[k]`` its connection probability.
    """

    leaves: tuple[str, ...]
    children: tuple[tuple[int, int], ...]
    root: int
    theta: tuple[float, ...] = field(default=())

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def parents(self) -> list[int]:
        parent = [-1] * (2 * self.n_leaves - 1)
        for k, (a, b) in enumerate(self.children):
            parent[a] = parent[b] = self.n_leaves + k
        return parent

    def leaf_sets(self) -> dict[int, frozenset[str]]:
        """Leaf labels below every node."""
        n = self.n_leaves
        out: dict[int, frozenset[str]] = {i: frozenset([self.leaves[i]]) for i in range(n)}

        def visit(node: int) -> frozenset[str]:
            stack = [node]
            order = []
            while stack:
                x = stack.pop()
                order.append(x)
                if x >= n:
                    stack.extend(self.children[x - n])
            for x in reversed(order):
                if x >= n:
                    a, b = self.children[x - n]
                    out[x] = out[a] | out[b]
            return out[node]

        visit(self.root)
        return out

    def root_split(self) -> frozenset[frozenset[str]]:
        sets = self.leaf_sets()
        a, b = self.children[self.root - self.n_leaves]
        return frozenset([sets[a], sets[b]])

    def topology(self):
        """Nested frozensets; equal for dendrograms with the same shape and labels."""
        n = self.n_leaves

        def rec(node):
            if node < n:
                return self.leaves[node]
            a, b = self.children[node - n]
            return frozenset([rec(a), rec(b)])

        return rec(self.root)

    def validate(self) -> None:
        n = self.n_leaves
        if n < 1 or len(self.children) != n - 1:
            raise ValueError("a dendrogram over n leaves needs n - 1 internal nodes")
        if len(set(self.leaves)) != n:
            raise ValueError("leaf labels must be unique")
        seen = [0] * (2 * n - 1)
        for a, b in self.children:
            seen[a] += 1
            seen[b] += 1
        if seen[self.root] != 0 or any(c != 1 for k, c in enumerate(seen) if k != self.root):
            raise ValueError("children do not form a rooted tree")
        if n > 1 and len(self.leaf_sets()[self.root]) != n:
            raise ValueError("tree is not connected")


def balanced_dendrogram(leaves: Sequence[str]) -> Dendrogram:
    """Balanced tree over ``leaves`` in the given order."""
    leaves = tuple(leaves)
    n = len(leaves)
    if n < 1:
        raise ValueError("need at least one leaf")
    children: list[tuple[int, int]] = []

    def build(lo: int, hi: int) -> int:
        if hi - lo == 1:
            return lo
        mid = (lo + hi + 1) // 2
        a, b = build(lo, mid), build(mid, hi)
        children.append((a, b))
        return n + len(children) - 1

    root = build(0, n)
    return Dendrogram(leaves, tuple(children), root)


def dendrogram_from_nested(tree) -> Dendrogram:
    """Build from nested 2-tuples of leaf labels, e.g. ``(("a", "b"), "c")``."""
    labels: list[str] = []

    def collect(t):
        if isinstance(t, str):
            labels.append(t)
        else:
            if len(t) != 2:
                raise ValueError("internal nodes must have exactly two children")
            collect(t[0])
            collect(t[1])

    collect(tree)
    index = {v: k for k, v in enumerate(labels)}
    n = len(labels)
    children: list[tuple[int, int]] = []

    def build(t) -> int:
        if isinstance(t, str):
            return index[t]
        a, b = build(t[0]), build(t[1])
        children.append((a, b))
        return n + len(children) - 1

    root = build(tree)
    d = Dendrogram(tuple(labels), tuple(children), root)
    d.validate()
    return d


def _term(e: int, pairs: int) -> float:
    if e == 0 or e == pairs:
        return 0.0
    p = e / pairs
    return e * math.log(p) + (pairs - e) * math.log1p(-p)


def node_statistics(graph, d: Dendrogram) -> tuple[list[int], list[int], list[int]]:
    """``(E, L, R)`` per internal node, computed from scratch via LCAs."""
    g = _as_simple(graph)
    if set(g.vertices) != set(d.leaves):
        raise ValueError("dendrogram leaves do not match graph vertices")
    n = d.n_leaves
    parent = d.parents()
    pos = {v: k for k, v in enumerate(d.leaves)}
    size = [1] * n + [0] * (n - 1)
    # internal nodes in bottom-up order
    order = []
    stack = [d.root] if n > 1 else []
    while stack:
        x = stack.pop()
        order.append(x)
        stack.extend(c for c in d.children[x - n] if c >= n)
    for x in reversed(order):
        a, b = d.children[x - n]
        size[x] = size[a] + size[b]
    E = [0] * (n - 1)
    for u, v in g.edges:
        anc = set()
        x = pos[u]
        while x != -1:
            anc.add(x)
            x = parent[x]
        x = pos[v]
        while x not in anc:
            x = parent[x]
        E[x - n] += 1
    L = [size[a] for a, _ in d.children]
    R = [size[b] for _, b in d.children]
    return E, L, R


def log_likelihood(graph, d: Dendrogram) -> float:
    E, L, R = node_statistics(graph, d)
    return math.fsum(_term(e, l * r) for e, l, r in zip(E, L, R))


def with_mle_theta(graph, d: Dendrogram) -> Dendrogram:
    E, L, R = node_statistics(graph, d)
    theta = tuple(e / (l * r) for e, l, r in zip(E, L, R))
    return Dendrogram(d.leaves, d.children, d.root, theta)


# -- Markov chain -----------------------------------------------------------

class HrgChain:
    """Mutable dendrogram bound to a graph, with per-node edge counts kept
    up to date under subtree rearrangements."""

    def __init__(self, graph, dendrogram: Dendrogram):
        g = _as_simple(graph)
        dendrogram.validate()
        E, _, _ = node_statistics(g, dendrogram)
        n = dendrogram.n_leaves
        self.graph = g
        self.n = n
        self.labels = dendrogram.leaves
        pos = {v: k for k, v in enumerate(self.labels)}
        self.adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in g.edges:
            self.adj[pos[u]].append(pos[v])
            self.adj[pos[v]].append(pos[u])
        self.left = [-1] * (2 * n - 1)
        self.right = [-1] * (2 * n - 1)
        for k, (a, b) in enumerate(dendrogram.children):
            self.left[n + k], self.right[n + k] = a, b
        self.parent = dendrogram.parents()
        self.root = dendrogram.root
        self.size = [1] * (2 * n - 1)
        self._recount_sizes()
        self.E = [0] * n + E  # indexed by node id; leaf slots unused
        self.terms = [0.0] * (2 * n - 1)
        for r in range(n, 2 * n - 1):
            self.terms[r] = _term(self.E[r], self.size[self.left[r]] * self.size[self.right[r]])
        self.loglik = math.fsum(self.terms)
        self.movable = [r for r in range(n, 2 * n - 1) if r != self.root]

    def _recount_sizes(self) -> None:
        n = self.n
        order = []
        stack = [self.root] if n > 1 else []
        while stack:
            x = stack.pop()
            order.append(x)
            stack.extend(c for c in (self.left[x], self.right[x]) if c >= n)
        for x in reversed(order):
            self.size[x] = self.size[self.left[x]] + self.size[self.right[x]]

    def copy(self) -> "HrgChain":
        new = object.__new__(HrgChain)
        new.__dict__.update(self.__dict__)
        for name in ("left", "right", "parent", "size", "E", "terms"):
            setattr(new, name, list(getattr(self, name)))
        return new

    def _leaves_below(self, node: int) -> list[int]:
        n = self.n
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.append(self.left[x])
                stack.append(self.right[x])
        return out

    def _edges_between(self, x: int, y: int) -> int:
        lx, ly = self._leaves_below(x), self._leaves_below(y)
        if len(lx) > len(ly):
            lx, ly = ly, lx
        other = set(ly)
        return sum(1 for u in lx for w in self.adj[u] if w in other)

    def _sibling(self, r: int) -> int:
        p = self.parent[r]
        return self.right[p] if self.left[p] == r else self.left[p]

    def propose(self, r: int, variant: int) -> tuple[float, int, int]:
        """Log-likelihood change of swapping one child of ``r`` with its
        sibling: ``variant`` 0 swaps the right child, 1 the left child.

        Returns ``(delta, new E_r, new E_parent)`` without changing state.
        """
        p = self.parent[r]
        u = self._sibling(r)
        keep = self.left[r] if variant == 0 else self.right[r]
        moved = self.right[r] if variant == 0 else self.left[r]
        er = self._edges_between(keep, u)
        ep = self.E[r] + self.E[p] - er
        nr = self.size[keep] * self.size[u]
        np_ = (self.size[keep] + self.size[u]) * self.size[moved]
        delta = _term(er, nr) + _term(ep, np_) - self.terms[r] - self.terms[p]
        return delta, er, ep

    def apply(self, r: int, variant: int, er: int, ep: int) -> None:
        p = self.parent[r]
        u = self._sibling(r)
        if variant == 0:
            moved = self.right[r]
            self.right[r] = u
        else:
            moved = self.left[r]
            self.left[r] = u
        if self.left[p] == u:
            self.left[p] = moved
        else:
            self.right[p] = moved
        self.parent[u] = r
        self.parent[moved] = p
        self.size[r] = self.size[self.left[r]] + self.size[self.right[r]]
        self.E[r], self.E[p] = er, ep
        old = self.terms[r] + self.terms[p]
        self.terms[r] = _term(er, self.size[self.left[r]] * self.size[self.right[r]])
        self.terms[p] = _term(ep, self.size[self.left[p]] * self.size[self.right[p]])
        self.loglik += self.terms[r] + self.terms[p] - old

    def dendrogram(self) -> Dendrogram:
        n = self.n
        children = tuple((self.left[r], self.right[r]) for r in range(n, 2 * n - 1))
        theta = tuple(self.E[r] / (self.size[self.left[r]] * self.size[self.right[r]])
                      for r in range(n, 2 * n - 1))
        return Dendrogram(self.labels, children, self.root, theta)

    def exact_loglik(self) -> float:
        return math.fsum(self.terms)


def mcmc_step(chain: HrgChain, rng: random.Random) -> tuple[HrgChain, bool]:
    """One Metropolis transition, applied in place."""
    if not chain.movable:
        return chain, False
    r = chain.movable[rng.randrange(len(chain.movable))]
    variant = rng.randrange(2)
    delta, er, ep = chain.propose(r, variant)
    if delta >= 0 or rng.random() < math.exp(delta):
        chain.apply(r, variant, er, ep)
        return chain, True
    return chain, False


@dataclass(frozen=True)
class HrgFitResult:
    best_dendrogram: Dendrogram
    best_loglik: float
    trace: tuple[tuple[int, float], ...]
    seed: int
    steps: int
    burn_in: int
    acceptance_rate: float


def default_budgets(n: int) -> tuple[int, int]:
    """``(burn_in, steps)`` scaled with the squared vertex count."""
    return 10 * n * n, 100 * n * n


def random_balanced_dendrogram(vertices: Sequence[str], rng: random.Random) -> Dendrogram:
    order = list(vertices)
    rng.shuffle(order)
    d = balanced_dendrogram(order)
    # relabel so leaf ids follow sorted vertex order
    ranks = sorted(range(len(order)), key=lambda k: order[k])
    new_id = {old: new for new, old in enumerate(ranks)}
    n = len(order)
    remap = lambda x: new_id[x] if x < n else x  # noqa: E731
    children = tuple((remap(a), remap(b)) for a, b in d.children)
    return Dendrogram(tuple(sorted(order)), children, d.root)


def fit(graph, steps: int | None = None, burn_in: int | None = None, seed: int = 0,
        thin: int | None = None) -> HrgFitResult:
    """Sample dendrograms and keep the most likely one seen.

    The chain starts from a random balanced tree and runs ``burn_in + steps``
    transitions. ``trace`` holds the log-likelihood every ``thin`` steps.
    """
    g = _as_simple(graph)
    n = len(g.vertices)
    if n < 2:
        raise ValueError("need at least two vertices")
    if not g.is_connected():
        raise ValueError(f"graph has {len(g.components())} connected components; "
                         "fit each component separately")
    default_burn, default_steps = default_budgets(n)
    burn_in = default_burn if burn_in is None else burn_in
    steps = default_steps if steps is None else steps
    if steps < 0 or burn_in < 0:
        raise ValueError("budgets must be non-negative")
    total = burn_in + steps
    thin = thin or max(1, total // 1000)

    rng = random.Random(seed)
    chain = HrgChain(g, random_balanced_dendrogram(g.vertices, rng))
    best = chain.dendrogram()
    best_ll = chain.loglik
    trace = [(0, chain.loglik)]
    accepted = 0
    for step in range(1, total + 1):
        _, ok = mcmc_step(chain, rng)
        if ok:
            accepted += 1
            if chain.loglik > best_ll + 1e-12:
                best, best_ll = chain.dendrogram(), chain.loglik
        if step % thin == 0:
            trace.append((step, chain.loglik))
    return HrgFitResult(best, log_likelihood(g, best), tuple(trace), seed, steps, burn_in,
                        accepted / total if total else 0.0)


def fit_components(graph, min_size: int = 2, **kwargs) -> list[HrgFitResult]:
    """Fit every connected component with at least ``min_size`` vertices."""
    g = _as_simple(graph)
    return [fit(g.subgraph(comp), **kwargs) for comp in g.components() if len(comp) >= min_size]


# -- Newick -----------------------------------------------------------------

_PLAIN = set("()[]':;, \t\n\r")


def _quote(label: str) -> str:
    if label and not any(c in _PLAIN for c in label):
        return label
    return "'" + label.replace("'", "''") + "'"


def export_newick(d: Dendrogram) -> str:
    """Newick text with ``theta`` as internal node labels.

    Within each node the child holding the smallest leaf label comes first.
    """
    n = d.n_leaves
    theta = d.theta or (None,) * (n - 1)
    sets = d.leaf_sets()
    least = {k: min(s) for k, s in sets.items()}

    def rec(node: int) -> str:
        if node < n:
            return _quote(d.leaves[node])
        a, b = d.children[node - n]
        if least[b] < least[a]:
            a, b = b, a
        t = theta[node - n]
        support = "" if t is None else format(t, ".12g")
        return f"({rec(a)},{rec(b)}){support}"

    return rec(d.root) + ";"


def parse_newick(text: str) -> Dendrogram:
    """Inverse of :func:`export_newick` (binary trees, optional node labels)."""
    s = text.strip()
    if not s.endswith(";"):
        raise ValueError("Newick text must end with ';'")
    s = s[:-1]
    pos = 0

    def label() -> str:
        nonlocal pos
        if pos < len(s) and s[pos] == "'":
            pos += 1
            out = []
            while True:
                if pos >= len(s):
                    raise ValueError("unterminated quoted label")
                if s[pos] == "'":
                    if pos + 1 < len(s) and s[pos + 1] == "'":
                        out.append("'")
                        pos += 2
                        continue
                    pos += 1
                    return "".join(out)
                out.append(s[pos])
                pos += 1
        start = pos
        while pos < len(s) and s[pos] not in "(),:;":
            pos += 1
        return s[start:pos].strip()

    def skip_length():
        nonlocal pos
        if pos < len(s) and s[pos] == ":":
            pos += 1
            while pos < len(s) and s[pos] not in "(),;":
                pos += 1

    def node():
        nonlocal pos
        if s[pos] == "(":
            pos += 1
            kids = [node()]
            while s[pos] == ",":
                pos += 1
                kids.append(node())
            if s[pos] != ")":
                raise ValueError(f"expected ')' at {pos}")
            pos += 1
            if len(kids) != 2:
                raise ValueError("only binary trees are supported")
            lab = label()
            skip_length()
            return (kids[0], kids[1], float(lab) if lab else None)
        lab = label()
        skip_length()
        if not lab:
            raise ValueError(f"empty leaf label at {pos}")
        return lab

    tree = node()
    if pos != len(s):
        raise ValueError(f"trailing text at {pos}")

    thetas: dict[int, float | None] = {}
    nested_ids: list = []

    def strip(t):
        if isinstance(t, str):
            return t
        a, b, th = t
        res = (strip(a), strip(b))
        nested_ids.append(th)
        return res

    nested = strip(tree)
    d = dendrogram_from_nested(nested)
    # dendrogram_from_nested numbers internal nodes in the same post-order
    thetas = dict(enumerate(nested_ids))
    theta = () if any(v is None for v in thetas.values()) else tuple(thetas[k] for k in range(len(thetas)))
    return Dendrogram(d.leaves, d.children, d.root, theta)
