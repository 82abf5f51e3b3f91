"""Reference implementations the test suite checks the library against.

Everything here is deliberately naive: plain Python loops, itertools
enumeration, and numpy.linalg calls.  None of it shares code with the
vectorized or incremental paths under audit.
"""

import numpy as np

from submine import (
    EmbeddingSet,
    Family,
    IndexSet,
    SubmodularObjective,
    cosine_kernel,
)


def fl_loops(s, members, ground):
    """Coverage value: for every ground item, its best similarity into A."""
    if not members:
        return 0.0
    total = 0.0
    for i in ground:
        total += max(s[i][j] for j in members)
    return total


def gc_loops(s, members, ground, lam):
    """Relevance minus lam-weighted redundancy, both as double sums."""
    if not members:
        return 0.0
    cover = sum(s[i][j] for i in ground for j in members)
    redundancy = sum(s[a][b] for a in members for b in members)
    return cover - lam * redundancy


def logdet_loops(s, members, eps):
    """Stabilized log-volume of the selected submatrix via slogdet."""
    if not members:
        return 0.0
    sub = np.array([[s[a][b] for b in members] for a in members])
    sign, value = np.linalg.slogdet(sub + eps * np.eye(len(members)))
    assert sign > 0.0, "reference logdet needs a positive determinant"
    return float(value)


def value_loops(objective, members):
    """Dispatch to the loop evaluator matching the objective's family."""
    members = list(members)
    ground = list(objective.ground)
    s = objective.kernel.matrix
    if objective.family is Family.FACILITY_LOCATION:
        return fl_loops(s, members, ground)
    if objective.family is Family.GRAPH_CUT:
        return gc_loops(s, members, ground, objective.lam)
    return logdet_loops(s, members, objective.epsilon)


def random_embeddings(rng, n, d):
    return EmbeddingSet(rng.normal(size=(n, d)))


def random_objective(
    rng,
    family,
    n=8,
    d=None,
    transform="raw-cosine",
    lam=0.5,
    nu=1.0,
    epsilon=None,
    ground=None,
):
    """A fresh objective over a random cosine kernel."""
    if d is None:
        d = n + 3
    kernel = cosine_kernel(random_embeddings(rng, n, d), transform=transform)
    if ground is None:
        ground = IndexSet.of(range(n))
    return SubmodularObjective(
        family=family, kernel=kernel, ground=ground, lam=lam, nu=nu, epsilon=epsilon
    )


def random_subset(rng, n, low=0, high=None):
    """Uniform random subset with size in [low, high], insertion order random."""
    if high is None:
        high = n
    size = int(rng.integers(low, high + 1))
    return IndexSet.of(int(i) for i in rng.permutation(n)[:size])


def nested_triple(rng, n):
    """Sets A subset-of B plus an element v outside B, for curvature checks."""
    perm = [int(i) for i in rng.permutation(n)]
    b_size = int(rng.integers(1, n))
    a_size = int(rng.integers(0, b_size + 1))
    b = IndexSet.of(perm[:b_size])
    a = IndexSet.of(perm[:a_size])
    v = perm[b_size]
    return a, b, v
