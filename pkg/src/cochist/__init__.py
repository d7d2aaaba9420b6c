"""Differentially private count-of-counts histograms over a region hierarchy."""

from .consistency import (
    ConsistentResult,
    bottom_up,
    check_consistency,
    independent,
    match_groups,
    merge_estimates,
    top_down,
)
from .data import (
    Dataset,
    HierarchyTree,
    SynthParams,
    build_histograms,
    dataset_stats,
    gen_synthetic_housing,
    load_tables,
    tree_from_sizes,
)
from .estimators import EstimatorKind, estimate, estimate_hc, estimate_hg, estimate_naive
from .histogram import emd, from_cumulative, from_unattributed, to_cumulative, to_unattributed
from .isotonic import isotonic_constrained, isotonic_l1, isotonic_l2
from .privacy import SeededRng, estimate_size_bound, sample_double_geometric

__version__ = "0.1.0"

__all__ = [
    "ConsistentResult",
    "Dataset",
    "EstimatorKind",
    "HierarchyTree",
    "SeededRng",
    "SynthParams",
    "bottom_up",
    "build_histograms",
    "check_consistency",
    "dataset_stats",
    "emd",
    "estimate",
    "estimate_hc",
    "estimate_hg",
    "estimate_naive",
    "estimate_size_bound",
    "from_cumulative",
    "from_unattributed",
    "gen_synthetic_housing",
    "independent",
    "isotonic_constrained",
    "isotonic_l1",
    "isotonic_l2",
    "load_tables",
    "match_groups",
    "merge_estimates",
    "sample_double_geometric",
    "to_cumulative",
    "to_unattributed",
    "top_down",
    "tree_from_sizes",
]
