"""Pruned Galton-Watson trees and the tree-valued processes they generate.

Offspring laws and their scalar functions live in :mod:`gwprune.offspring`,
trees in :mod:`gwprune.tree`, samplers in :mod:`gwprune.prune`,
:mod:`gwprune.kesten` and :mod:`gwprune.ascension`, exact laws in
:mod:`gwprune.oracle` and the statistical harness in :mod:`gwprune.stats`.
"""
from ._accel import JIT_ENABLED, backend_name
from .ascension import (
    INF,
    AscensionBatch,
    AscensionPath,
    representation_samplers,
    sample_ascension_time,
    sample_ascension_times,
    sample_gw_conditioned_finite,
    sample_pre_ascension_tree,
    simulate_ascension_path,
    simulate_ascension_paths,
)
from .batch import TreeBatch
from .errors import (
    DegenerateError,
    DomainError,
    GWPruneError,
    NumericError,
    ParseError,
    ResourceError,
    TruncatedError,
)
from .kesten import SpinedTree, gstar_probability, kesten_class_probability, sample_gstar, sample_kesten
from .offspring import (
    FiniteSupport,
    Geometric,
    OffspringDistribution,
    ascension_density,
    bridge_distribution,
    conjugate,
    extinction_probabilities,
    extinction_probability,
    max_parameter,
    mean_at,
    parse_distribution,
    prune_distribution,
    pruned_pgf,
    size_biased,
    survival_inverse,
    zeta3_example,
)
from .oracle import LawTable, enumerate_trees, exact_law_table, leaf_count_law, verify_leaf_conditioning
from .prune import (
    MarkedTree,
    SampleBudget,
    Truncated,
    attach_marks,
    cut_at,
    expected_leaves,
    graft_forward,
    prune_once,
    sample_gw,
    sample_modified_gw,
    total_infinite_rate,
    transition_rate_finite,
    transition_rate_infinite,
)
from .stats import EmpiricalLaw, TestReport, chi_square_statistic, ks_statistic, martingale_report, total_variation
from .tree import (
    FiniteTree,
    kesten_weight,
    leaf_martingale,
    parse,
    restricted_class_probability,
    serialize,
    structure_queries,
    tree_probability,
)

__version__ = "0.1.0"
