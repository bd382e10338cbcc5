"""Quality measurements for hierarchical taxonomies."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ConstructCounts,
    Dimension,
    Edge,
    InvalidTaxonomyError,
    LeafGroup,
    Node,
    Taxonomy,
    build_forest,
    counts,
    leaf_groups,
)
from .metrics import (  # noqa: E402
    GroupRobustness,
    MemoryHeuristicResult,
    MetricError,
    ReleaseHistory,
    RobustnessReport,
    conciseness,
    dimension_robustness_summary,
    memory_heuristic,
    rate_of_change,
    robustness,
    robustness_detail,
)
from .similarity import LookupBackend, TrigramBackend, WordVectorBackend  # noqa: E402

__all__ = [
    "ConstructCounts", "Dimension", "Edge", "InvalidTaxonomyError", "LeafGroup", "Node", "Taxonomy",
    "build_forest", "counts", "leaf_groups",
    "GroupRobustness", "MemoryHeuristicResult", "MetricError", "ReleaseHistory", "RobustnessReport",
    "conciseness", "dimension_robustness_summary", "memory_heuristic", "rate_of_change",
    "robustness", "robustness_detail",
    "LookupBackend", "TrigramBackend", "WordVectorBackend",
]
