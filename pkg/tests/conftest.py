"""Shared fixtures: the hand-computed 3x3 kernel and objectives over it."""

import numpy as np
import pytest

from submine import Family, IndexSet, SimilarityKernel, SubmodularObjective

# Hand-checkable similarity matrix used throughout the suite.  Column sums
# are 1.7, 1.9, 1.6, which makes the coverage and cut values easy to verify
# by hand.
TOY_MATRIX = np.array(
    [
        [1.0, 0.5, 0.2],
        [0.5, 1.0, 0.4],
        [0.2, 0.4, 1.0],
    ]
)


@pytest.fixture
def toy_kernel():
    return SimilarityKernel(TOY_MATRIX)


@pytest.fixture
def toy_objective(toy_kernel):
    def build(family, **kwargs):
        kwargs.setdefault("ground", IndexSet.of(range(3)))
        return SubmodularObjective(family=Family.parse(family), kernel=toy_kernel, **kwargs)

    return build
