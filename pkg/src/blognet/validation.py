"""Input coercion shared by the estimators."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import RawDocument, aggregate_records
from .simnet import SimilarityGraph


def check_documents(X: Any, ids: Sequence[str] | None = None) -> list[RawDocument]:
    """Coerce ``X`` into a list of documents.

    Accepts RawDocument objects, ``(id, text)`` pairs, a mapping of id to
    text, or plain strings (ids then come from ``ids`` or the row number).
    Pairs that repeat an id are concatenated as posts of the same document.
    """
    if isinstance(X, Mapping):
        return [RawDocument(str(k), v) for k, v in X.items()]
    if isinstance(X, (str, bytes)):
        raise TypeError("expected a collection of documents, got a single string")
    items = list(X)
    if not items:
        raise ValueError("no input documents")
    if all(isinstance(x, RawDocument) for x in items):
        return items
    if all(isinstance(x, str) for x in items):
        names = [str(i) for i in range(len(items))] if ids is None else list(ids)
        if len(names) != len(items):
            raise ValueError(f"got {len(names)} ids for {len(items)} documents")
        if len(set(names)) != len(names):
            raise ValueError("document ids must be unique")
        return [RawDocument(i, t) for i, t in zip(names, items)]
    if all(isinstance(x, tuple) and len(x) == 2 for x in items):
        return aggregate_records((str(i), t) for i, t in items)
    raise TypeError("documents must be strings, (id, text) pairs or RawDocument objects")


def check_word_sets(X: Any, ids: Sequence[str] | None = None) -> dict[str, frozenset[str]]:
    """Coerce ``X`` into a mapping of document id to word set."""
    if isinstance(X, Mapping):
        return {str(k): frozenset(v) for k, v in X.items()}
    items = list(X)
    names = [str(i) for i in range(len(items))] if ids is None else [str(i) for i in ids]
    if len(names) != len(items):
        raise ValueError(f"got {len(names)} ids for {len(items)} word sets")
    if len(set(names)) != len(names):
        raise ValueError("document ids must be unique")
    out = {}
    for name, words in zip(names, items):
        if isinstance(words, str):
            raise TypeError("word sets must be collections of words, not strings")
        out[name] = frozenset(words)
    return out


def check_graph(X: Any, ids: Sequence[str] | None = None, store_threshold: float = 0.025) -> SimilarityGraph:
    """Accept a SimilarityGraph or a square symmetric similarity matrix."""
    if isinstance(X, SimilarityGraph):
        return X
    if hasattr(X, "edges") and hasattr(X, "nodes"):  # networkx graph
        edges = [(str(a), str(b), float(d.get("s", d.get("weight", 1.0)))) for a, b, d in X.edges(data=True)]
        return SimilarityGraph.from_edges(edges, (str(v) for v in X.nodes), store_threshold)
    m = sp.coo_matrix(X) if sp.issparse(X) else sp.coo_matrix(np.asarray(X, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {m.shape}")
    n = m.shape[0]
    names = [str(i) for i in range(n)] if ids is None else [str(i) for i in ids]
    if len(names) != n:
        raise ValueError(f"got {len(names)} ids for a {n}x{n} matrix")
    edges = {}
    for i, j, w in zip(m.row, m.col, m.data):
        if i == j or w == 0:
            continue
        a, b = (i, j) if names[i] < names[j] else (j, i)
        key = (names[a], names[b])
        if key in edges and edges[key] != w:
            raise ValueError("similarity matrix must be symmetric")
        edges[key] = float(w)
    return SimilarityGraph.from_edges(((a, b, w) for (a, b), w in edges.items()), names, store_threshold)
