"""Unknown-item mining pipeline: filter, match knowns, pick background, pick unknowns.

The pipeline runs four stages over one scene:

  1. filter      drop items whose objectness falls below tau_e
  2. match       assign kept items to labeled prototypes (Hungarian), giving K
  3. background  greedily maximize the gain conditioned on K, budget tau_b * |pool|
  4. unknown     greedily maximize the gain conditioned on K u B, budget k

Stages 3 and 4 share one submodular objective built over the kept items.  A
failure in any stage aborts with that stage's name attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .greedy import SelectionResult, greedy_max
from .kernels import (
    EmbeddingSet,
    IndexSet,
    SimilarityKernel,
    UNKNOWN_LABEL,
    cosine_kernel,
    row_normalize,
)
from .objectives import Family, SubmodularObjective


class StageError(RuntimeError):
    """Pipeline failure, tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs for the mining pipeline.

    transform picks the kernel range mapping; None resolves to clip-at-zero
    for facility-location and graph-cut (keeps them monotone) and raw-cosine
    for log-determinant (which regularizes via epsilon instead).  With
    exclude_background_from_pool off, stage 4 literally draws from the whole
    post-match pool: already-conditioned background items compete with zero
    gain and can only win when every fresh candidate has negative gain.
    """

    tau_e: float = 0.2
    tau_b: float = 0.3
    k: int = 10
    family: Family = Family.GRAPH_CUT
    lam: float = 0.5
    nu: float = 1.0
    epsilon: float = 1e-4
    transform: str | None = None
    exclude_background_from_pool: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family.parse(str(self.family)))
        if not (0.0 <= self.tau_e <= 1.0):
            raise ValueError("tau_e must lie in [0, 1]")
        if not (0.0 <= self.tau_b <= 1.0):
            raise ValueError("tau_b must lie in [0, 1]")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a non-negative integer")
        if self.lam < 0.0 or self.nu < 0.0 or self.epsilon < 0.0:
            raise ValueError("lam, nu and epsilon must be non-negative")

    @property
    def resolved_transform(self) -> str:
        if self.transform is not None:
            return self.transform
        return "raw-cosine" if self.family is Family.LOG_DET else "clip-at-zero"


@dataclass(frozen=True)
class DiscoveryResult:
    """Selections from one pipeline run plus the traces that produced them."""

    kept: IndexSet
    known: IndexSet
    background: IndexSet
    unknown: IndexSet
    pool: IndexSet  # candidates stage 4 drew from
    background_trace: SelectionResult
    unknown_trace: SelectionResult
    config: DiscoveryConfig
    kernel: SimilarityKernel

    def to_json_dict(self, metrics: dict | None = None) -> dict:
        return {
            "kept": list(self.kept),
            "known": list(self.known),
            "background": list(self.background),
            "unknown": list(self.unknown),
            "gains": {
                "background": list(self.background_trace.gains),
                "unknown": list(self.unknown_trace.gains),
            },
            "metrics": dict(metrics) if metrics else {},
        }


def filter_by_objectness(embeddings: EmbeddingSet, tau_e: float) -> IndexSet:
    """Indices of items with objectness >= tau_e (inclusive), ascending."""
    if embeddings.objectness is None:
        raise ValueError("objectness scores required")
    keep = np.flatnonzero(embeddings.objectness >= tau_e)
    return IndexSet.of(int(i) for i in keep)


def hungarian_assign(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment pairs (row, col), sorted by row.

    Rectangular matrices are fine; min(n_rows, n_cols) pairs come back.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError(f"cost matrix must be 2-d and non-empty, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite values")
    rows, cols = linear_sum_assignment(cost)
    return sorted((int(r), int(c)) for r, c in zip(rows, cols))


def match_knowns(
    embeddings: EmbeddingSet, kept: IndexSet, prototypes: EmbeddingSet
) -> IndexSet:
    """Kept items matched one-to-one to prototypes by cosine distance.

    Returns one scene index per prototype, ordered by prototype row.
    """
    if prototypes.n > len(kept):
        raise ValueError(
            f"more prototypes ({prototypes.n}) than kept items ({len(kept)})"
        )
    kept_arr = kept.as_array()
    unit_items = row_normalize(EmbeddingSet(embeddings.data[kept_arr])).data
    unit_protos = row_normalize(EmbeddingSet(prototypes.data)).data
    cost = 1.0 - unit_items @ unit_protos.T
    pairs = hungarian_assign(cost)
    by_proto = sorted(pairs, key=lambda rc: rc[1])
    return IndexSet.of(int(kept_arr[r]) for r, _ in by_proto)


def select_background(
    objective: SubmodularObjective, pool: IndexSet, known: IndexSet, tau_b: float
) -> SelectionResult:
    """Greedy background pick conditioned on the knowns, budget floor(tau_b * |pool|)."""
    budget = math.floor(tau_b * len(pool))
    return greedy_max(objective, pool, budget, conditioning=known)


def select_unknowns(
    objective: SubmodularObjective,
    pool: IndexSet,
    known: IndexSet,
    background: IndexSet,
    k: int,
) -> SelectionResult:
    """Greedy unknown pick conditioned on knowns and background, budget k."""
    conditioning = known.union(background)
    return greedy_max(
        objective,
        pool,
        k,
        conditioning=conditioning,
        allow_conditioned_candidates=pool.intersects(conditioning),
    )


def known_prototypes(embeddings: EmbeddingSet) -> EmbeddingSet:
    """The labeled known items themselves, as an instance-level prototype set."""
    if embeddings.labels is None:
        raise ValueError("labels required to derive prototypes")
    idx = np.flatnonzero(embeddings.labels >= 1)
    if len(idx) == 0:
        raise ValueError("no labeled known items")
    return EmbeddingSet(embeddings.data[idx], labels=embeddings.labels[idx])


def run_discovery(
    embeddings: EmbeddingSet,
    prototypes: EmbeddingSet,
    config: DiscoveryConfig = DiscoveryConfig(),
) -> DiscoveryResult:
    """Full pipeline; raises StageError naming the failing stage."""
    try:
        kept = filter_by_objectness(embeddings, config.tau_e)
        if len(kept) == 0:
            raise ValueError("empty set after filtering")
    except ValueError as e:
        raise StageError("filter", str(e)) from None
    try:
        known = match_knowns(embeddings, kept, prototypes)
    except ValueError as e:
        raise StageError("match", str(e)) from None
    try:
        kernel = cosine_kernel(
            embeddings, transform=config.resolved_transform, epsilon=config.epsilon
        )
        objective = SubmodularObjective(
            family=config.family,
            kernel=kernel,
            ground=kept,
            lam=config.lam,
            nu=config.nu,
            epsilon=config.epsilon,
        )
        pool_v = kept.minus(known)
        bg = select_background(objective, pool_v, known, config.tau_b)
    except ValueError as e:
        raise StageError("background", str(e)) from None
    try:
        if config.exclude_background_from_pool:
            pool_u = pool_v.minus(bg.selected)
        else:
            pool_u = pool_v
        un = select_unknowns(objective, pool_u, known, bg.selected, config.k)
    except ValueError as e:
        raise StageError("unknown", str(e)) from None
    return DiscoveryResult(
        kept=kept,
        known=known,
        background=bg.selected,
        unknown=un.selected,
        pool=pool_u,
        background_trace=bg,
        unknown_trace=un,
        config=config,
        kernel=kernel,
    )


def _mean_block(kernel: SimilarityKernel, a: IndexSet, b: IndexSet) -> float:
    if len(a) == 0 or len(b) == 0:
        return 0.0
    block = kernel.matrix[np.ix_(a.as_array(), b.as_array())]
    return float(block.mean())


def coverage_metrics(result: DiscoveryResult, truth: np.ndarray) -> dict:
    """Quality stats for a run against ground-truth labels.

    purity: fraction of mined unknowns that are truly unknown (label 0).
    coverage: fraction of the true unknowns among kept items that got mined.
    unknown_prevalence_in_pool: share of true unknowns in the stage-4 pool,
    i.e. the expected purity of a uniform random pick.
    """
    truth = np.asarray(truth)
    if truth.ndim != 1 or len(truth) < result.kernel.n:
        raise ValueError("truth labels do not cover the scene")
    mined = [i for i in result.unknown if truth[i] == UNKNOWN_LABEL]
    purity = len(mined) / len(result.unknown) if len(result.unknown) else 0.0
    kept_unknown = [i for i in result.kept if truth[i] == UNKNOWN_LABEL]
    coverage = len(mined) / len(kept_unknown) if kept_unknown else 0.0
    pool_unknown = [i for i in result.pool if truth[i] == UNKNOWN_LABEL]
    prevalence = len(pool_unknown) / len(result.pool) if len(result.pool) else 0.0
    return {
        "purity": purity,
        "coverage": coverage,
        "unknown_prevalence_in_pool": prevalence,
        "mean_sim_unknown_to_known": _mean_block(result.kernel, result.unknown, result.known),
        "mean_sim_unknown_to_background": _mean_block(
            result.kernel, result.unknown, result.background
        ),
        "mean_sim_background_to_known": _mean_block(
            result.kernel, result.background, result.known
        ),
        "mean_sim_pool_to_known": _mean_block(result.kernel, result.pool, result.known),
    }
