"""scikit-learn style front end.

The estimators chain into a regular :class:`sklearn.pipeline.Pipeline`::

    Pipeline([
        ("vocab", VocabularyFilter()),
        ("net", SimilarityNetwork()),
        ("clusters", ModularityClustering(gamma=0.05)),
    ]).fit_predict(texts)
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import cluster, hrg, simnet
from .corpus import VocabularyPolicy, index, select_vocabulary, tokenize
from .validation import check_documents, check_graph, check_word_sets

logger = logging.getLogger(__name__)


class VocabularyFilter(TransformerMixin, BaseEstimator):
    """Learn a rare-but-not-too-rare vocabulary and map texts to word sets.

    Parameters
    ----------
    min_count : int, default=10
        Words seen fewer times in the training texts are discarded.
    keep_percentile : float, default=5
        Percentage of the remaining distinct words to keep, rarest first.
    """

    def __init__(self, min_count=10, keep_percentile=5.0):
        self.min_count = min_count
        self.keep_percentile = keep_percentile

    def fit(self, X, y=None, ids=None):
        docs = check_documents(X, ids)
        self.frequencies_ = index(docs)
        self.vocabulary_ = select_vocabulary(self.frequencies_, VocabularyPolicy(self.min_count, self.keep_percentile))
        self.n_documents_ = len(docs)
        return self

    def transform(self, X, ids=None):
        """Word set of every document, in input order."""
        check_is_fitted(self, "vocabulary_")
        docs = check_documents(X, ids)
        vocab = self.vocabulary_
        return [frozenset(t for t in tokenize(d.text) if t in vocab) for d in docs]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.array([w for w, _ in self.vocabulary_.sorted_items()], dtype=object)


class SimilarityNetwork(TransformerMixin, BaseEstimator):
    """Jaccard similarity network over word sets.

    ``fit`` builds the graph and analyses its similarity distribution;
    ``transform`` returns sparse similarities of new word sets against the
    fitted documents, so ``fit_transform`` yields the square similarity
    matrix. Documents with fewer than ``min_wordset_size`` words stay in
    the matrix but get no edges.
    """

    def __init__(self, store_threshold=0.025, min_wordset_size=25, n_bins=50, fit_region=(0.025, 0.2),
                 outlier_k=2.0, dup_threshold=0.8):
        self.store_threshold = store_threshold
        self.min_wordset_size = min_wordset_size
        self.n_bins = n_bins
        self.fit_region = fit_region
        self.outlier_k = outlier_k
        self.dup_threshold = dup_threshold

    def fit(self, X, y=None, ids=None):
        sets = check_word_sets(X, ids)
        self.ids_ = list(sets)
        kept = {k: v for k, v in sets.items() if len(v) >= max(self.min_wordset_size, 1)}
        self.dropped_ = sorted(set(sets) - set(kept))
        self.word_sets_ = kept
        edges = simnet.similarity_edges(kept, self.store_threshold)
        self.graph_ = simnet.SimilarityGraph(tuple(sorted(sets)), tuple(edges), float(self.store_threshold))
        self.histogram_ = self.power_law_ = None
        outliers = simnet.AnomalyReport()
        if edges:
            self.histogram_ = simnet.histogram(self.graph_, self.n_bins)
            try:
                self.power_law_ = simnet.fit_power_law(self.histogram_, tuple(self.fit_region))
            except ValueError as exc:
                logger.warning("power-law fit skipped: %s", exc)
            if self.power_law_ is not None:
                outliers = simnet.detect_outliers(self.graph_, self.power_law_,
                                                  simnet.OutlierPolicy(self.outlier_k, self.n_bins), self.histogram_)
        dups = simnet.detect_duplicates(self.graph_, self.dup_threshold)
        self.anomalies_ = simnet.AnomalyReport(outliers.outlier_edges, outliers.outlier_vertices,
                                               dups.duplicate_groups)
        return self

    def _matrix(self, pairs, n_rows, row_pos):
        col_pos = {k: i for i, k in enumerate(self.ids_)}
        rows, cols, vals = [], [], []
        for a, b, s in pairs:
            rows.append(row_pos[a])
            cols.append(col_pos[b])
            vals.append(s)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, len(self.ids_)))

    def fit_transform(self, X, y=None, ids=None):
        self.fit(X, y, ids)
        pos = {k: i for i, k in enumerate(self.ids_)}
        both = [(i, j, s) for i, j, s in self.graph_.edges] + [(j, i, s) for i, j, s in self.graph_.edges]
        return self._matrix(both, len(self.ids_), pos)

    def transform(self, X, ids=None):
        check_is_fitted(self, "graph_")
        sets = check_word_sets(X, ids)
        postings = simnet.build_inverted_index(self.word_sets_)
        pairs = []
        for name, words in sets.items():
            shared: dict[str, int] = {}
            for w in words:
                for doc in postings.get(w, ()):
                    shared[doc] = shared.get(doc, 0) + 1
            for doc, inter in shared.items():
                s = inter / (len(words) + len(self.word_sets_[doc]) - inter)
                if s >= self.store_threshold:
                    pairs.append((name, doc, s))
        return self._matrix(pairs, len(sets), {k: i for i, k in enumerate(sets)})


class ModularityClustering(ClusterMixin, BaseEstimator):
    """Greedy modularity clustering of a similarity graph.

    Accepts a :class:`~blognet.simnet.SimilarityGraph`, a networkx graph or
    a square similarity matrix. Only edges with similarity >= ``gamma`` are
    used (``None`` keeps them all); vertices left without edges get label -1.
    """

    def __init__(self, gamma=0.05, store_threshold=0.025):
        self.gamma = gamma
        self.store_threshold = store_threshold

    def fit(self, X, y=None, ids=None):
        graph = check_graph(X, ids, self.store_threshold)
        view = graph if self.gamma is None else simnet.threshold_view(graph, self.gamma)
        if not view.edges:
            raise ValueError("view edgeless: no similarities at or above gamma")
        self.partition_ = cluster.greedy_cluster(view)
        self.modularity_ = self.partition_.q
        self.n_clusters_ = self.partition_.n_clusters
        order = graph.vertices if isinstance(X, simnet.SimilarityGraph) else self._input_order(X, ids, graph)
        self.vertices_ = list(order)
        self.labels_ = np.array([self.partition_.assignment.get(v, -1) for v in order], dtype=int)
        return self

    @staticmethod
    def _input_order(X, ids, graph):
        if hasattr(X, "nodes"):
            return [str(v) for v in X.nodes]
        if ids is not None:
            return [str(i) for i in ids]
        return [str(i) for i in range(len(graph.vertices))]


class HierarchicalRandomGraph(BaseEstimator):
    """Most likely dendrogram found by MCMC over hierarchical random graphs.

    The weighted input is binarised at ``gamma`` first. ``steps`` and
    ``burn_in`` default to 100 n^2 and 10 n^2 transitions.
    """

    def __init__(self, gamma=0.05, steps=None, burn_in=None, random_state=0, store_threshold=0.025):
        self.gamma = gamma
        self.steps = steps
        self.burn_in = burn_in
        self.random_state = random_state
        self.store_threshold = store_threshold

    def fit(self, X, y=None, ids=None):
        if isinstance(X, hrg.SimpleGraph):
            g = X
        else:
            graph = check_graph(X, ids, self.store_threshold)
            g = hrg.binarize(graph, self.gamma)
        self.result_ = hrg.fit(g, steps=self.steps, burn_in=self.burn_in, seed=self.random_state)
        self.dendrogram_ = self.result_.best_dendrogram
        self.log_likelihood_ = self.result_.best_loglik
        self.trace_ = np.array(self.result_.trace, dtype=float)
        return self

    def to_newick(self) -> str:
        check_is_fitted(self, "dendrogram_")
        return hrg.export_newick(self.dendrogram_)
