"""Word-overlap similarity networks of blogs: vocabulary filtering, Jaccard
graphs, spam and duplicate detection, modularity clustering and
hierarchical random graph dendrograms."""

__version__ = "0.1.0"

from .cluster import Partition, brute_force_best_partition, greedy_cluster, modularity  # noqa: E402
from .corpus import (  # noqa: E402
    Corpus,
    FrequencyTable,
    RawDocument,
    Vocabulary,
    VocabularyPolicy,
    build_corpus,
    index,
    select_vocabulary,
    tokenize,
)
from .estimators import (  # noqa: E402
    HierarchicalRandomGraph,
    ModularityClustering,
    SimilarityNetwork,
    VocabularyFilter,
)
from .hrg import Dendrogram, HrgFitResult, binarize, export_newick, log_likelihood, parse_newick  # noqa: E402
from .simnet import (  # noqa: E402
    SimilarityGraph,
    build_graph,
    detect_duplicates,
    detect_outliers,
    fit_power_law,
    histogram,
    jaccard,
    threshold_view,
)
