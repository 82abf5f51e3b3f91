"""Budgeted greedy maximization of conditional gains, plus an exhaustive oracle.

The naive greedy runs exactly k rounds (no early stop on negative gains) and
breaks ties by lowest item index.  The lazy variant keeps stale upper bounds
in a heap and must select the identical sequence; it only saves marginal-gain
evaluations.  Brute force enumerates every subset up to the budget and is the
ground truth for small instances.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable

from .kernels import EMPTY_SET, IndexSet
from .objectives import (
    SubmodularObjective,
    commit,
    evaluate,
    marginal_gain,
    marginal_state,
)

# Subset-enumeration guard for brute_force_opt.
MAX_BRUTE_FORCE_SUBSETS = 10_000_000


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection run.

    gains holds the per-round marginal gains in pick order; objective_value is
    their sum, i.e. the conditional gain of the selected set given the
    conditioning set.  evaluations counts objective/marginal evaluations.
    """

    selected: IndexSet
    gains: tuple[float, ...]
    objective_value: float
    budget: int
    evaluations: int = 0


def _prep(
    objective: SubmodularObjective,
    candidates: IndexSet | Iterable[int],
    k: int,
    conditioning: IndexSet | None,
    allow_conditioned: bool = False,
):
    cand = candidates if isinstance(candidates, IndexSet) else IndexSet.of(candidates)
    cond = conditioning if conditioning is not None else EMPTY_SET
    if int(k) != k or k < 0:
        raise ValueError("budget k must be a non-negative integer")
    cand.check_bounds(objective.n)
    cond.check_bounds(objective.n)
    if not allow_conditioned and cand.intersects(cond):
        raise ValueError("candidates overlap conditioning set")
    state = marginal_state(objective)
    for q in cond:
        state = commit(state, q)
    return cand, cond, state


def greedy_max(
    objective: SubmodularObjective,
    candidates: IndexSet | Iterable[int],
    k: int,
    conditioning: IndexSet | None = None,
    *,
    allow_conditioned_candidates: bool = False,
) -> SelectionResult:
    """Greedy argmax of the conditional gain under a cardinality budget.

    With allow_conditioned_candidates items already in the conditioning set
    may appear in the pool; re-selecting one contributes exactly zero gain
    (set semantics) and leaves the state untouched.
    """
    cand, cond, state = _prep(
        objective, candidates, int(k), conditioning, allow_conditioned_candidates
    )
    remaining = sorted(cand)
    picks: list[int] = []
    gains: list[float] = []
    evals = 0
    for _ in range(min(int(k), len(remaining))):
        best_v = -1
        best_g = 0.0
        for v in remaining:
            if v in cond:
                g = 0.0
            else:
                g = marginal_gain(state, v)
                evals += 1
            if best_v < 0 or g > best_g:
                best_v, best_g = v, g
        picks.append(best_v)
        gains.append(best_g)
        if best_v not in cond:
            state = commit(state, best_v)
        remaining.remove(best_v)
    return SelectionResult(
        IndexSet.of(picks), tuple(gains), float(sum(gains)), int(k), evals
    )


def lazy_greedy_max(
    objective: SubmodularObjective,
    candidates: IndexSet | Iterable[int],
    k: int,
    conditioning: IndexSet | None = None,
) -> SelectionResult:
    """Heap-accelerated greedy; identical picks and gains to greedy_max.

    Relies on diminishing returns for the stale-bound argument, so feed it
    submodular instances (non-negative kernels for facility-location and
    graph-cut, positive-definite kernels for log-determinant).
    """
    cand, _, state = _prep(objective, candidates, int(k), conditioning)
    evals = 0
    heap: list[tuple[float, int, int]] = []
    for v in sorted(cand):
        g = marginal_gain(state, v)
        evals += 1
        heap.append((-g, v, 0))
    heapq.heapify(heap)
    picks: list[int] = []
    gains: list[float] = []
    for rnd in range(min(int(k), len(heap))):
        while True:
            neg, v, stamp = heapq.heappop(heap)
            if stamp == rnd:
                break
            g = marginal_gain(state, v)
            evals += 1
            heapq.heappush(heap, (-g, v, rnd))
        picks.append(v)
        gains.append(-neg)
        state = commit(state, v)
    return SelectionResult(
        IndexSet.of(picks), tuple(gains), float(sum(gains)), int(k), evals
    )


def brute_force_opt(
    objective: SubmodularObjective,
    candidates: IndexSet | Iterable[int],
    k: int,
    conditioning: IndexSet | None = None,
) -> SelectionResult:
    """Exhaustive search over all subsets of size <= k.

    Ties keep the first subset in enumeration order (sizes ascending, each
    size in lexicographic order over sorted candidate indices).
    """
    cand, cond, state0 = _prep(objective, candidates, int(k), conditioning)
    order = sorted(cand)
    kmax = min(int(k), len(order))
    total = sum(comb(len(order), j) for j in range(kmax + 1))
    if total > MAX_BRUTE_FORCE_SUBSETS:
        raise ValueError(f"search space too large: {total} subsets to enumerate")
    base = evaluate(objective, cond) if len(cond) else 0.0
    best_set: tuple[int, ...] = ()
    best_val = 0.0
    evals = 1
    for size in range(1, kmax + 1):
        for combo in itertools.combinations(order, size):
            val = evaluate(objective, cond.union(IndexSet(combo))) - base
            evals += 1
            if val > best_val:
                best_set, best_val = combo, val
    # Telescope the winner for per-step gains.
    state = state0
    gains: list[float] = []
    for v in best_set:
        gains.append(marginal_gain(state, v))
        state = commit(state, v)
    return SelectionResult(
        IndexSet(best_set), tuple(gains), float(best_val), int(k), evals
    )
