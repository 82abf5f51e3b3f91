"""Submodular mining of unknown items over embedding similarity kernels."""

from .kernels import (
    BACKGROUND_LABEL,
    EMPTY_SET,
    TRANSFORMS,
    UNKNOWN_LABEL,
    EmbeddingSet,
    IndexSet,
    SimilarityKernel,
    apply_transform,
    cosine,
    cosine_kernel,
    read_embeddings_csv,
    row_normalize,
    write_embeddings_csv,
)
from .objectives import (
    Family,
    MarginalState,
    SubmodularObjective,
    commit,
    conditional_gain,
    conditional_gain_closed,
    evaluate,
    marginal_gain,
    marginal_state,
    total_information,
)
from .greedy import SelectionResult, brute_force_opt, greedy_max, lazy_greedy_max
from .discovery import (
    DiscoveryConfig,
    DiscoveryResult,
    StageError,
    coverage_metrics,
    filter_by_objectness,
    hungarian_assign,
    known_prototypes,
    match_knowns,
    run_discovery,
    select_background,
    select_unknowns,
)
from .losses import (
    LossConfig,
    LossReport,
    finite_difference_check,
    grad_loss,
    loss_cross,
    loss_self,
    loss_total,
)
from .scenes import SceneSpec, SeparationCase, gen_scene, gen_separation_cases

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_LABEL",
    "EMPTY_SET",
    "TRANSFORMS",
    "UNKNOWN_LABEL",
    "EmbeddingSet",
    "IndexSet",
    "SimilarityKernel",
    "apply_transform",
    "cosine",
    "cosine_kernel",
    "read_embeddings_csv",
    "row_normalize",
    "write_embeddings_csv",
    "Family",
    "MarginalState",
    "SubmodularObjective",
    "commit",
    "conditional_gain",
    "conditional_gain_closed",
    "evaluate",
    "marginal_gain",
    "marginal_state",
    "total_information",
    "SelectionResult",
    "brute_force_opt",
    "greedy_max",
    "lazy_greedy_max",
    "DiscoveryConfig",
    "DiscoveryResult",
    "StageError",
    "coverage_metrics",
    "filter_by_objectness",
    "hungarian_assign",
    "known_prototypes",
    "match_knowns",
    "run_discovery",
    "select_background",
    "select_unknowns",
    "LossConfig",
    "LossReport",
    "finite_difference_check",
    "grad_loss",
    "loss_cross",
    "loss_self",
    "loss_total",
    "SceneSpec",
    "SeparationCase",
    "gen_scene",
    "gen_separation_cases",
    "__version__",
]
