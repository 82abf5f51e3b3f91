"""Seeded synthetic scenes: clustered embeddings with labels and objectness.

Every cluster draws from its own counter-based PRNG stream (Philox keyed by
(seed, stream tag)), so adding or resizing one cluster never perturbs the
draws of another and scenes are reproducible across platforms.  Layout is
fixed: known items first (class by class), then unknowns, then backgrounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import BACKGROUND_LABEL, UNKNOWN_LABEL, EmbeddingSet, IndexSet

# Stream tags; known class c uses tag c, so keep these out of reach.
_TAG_UNKNOWN = 1 << 20
_TAG_BACKGROUND = (1 << 20) + 1
_TAG_SEP_KNOWN = (1 << 20) + 2
_TAG_SEP_UNKNOWN = (1 << 20) + 3


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, tag]))


@dataclass(frozen=True)
class SceneSpec:
    """Geometry and size knobs for one synthetic scene.

    cluster_means lists the known class centers followed by the unknown
    cluster center (so it needs at least two entries).  The background cloud
    is a broad normal blob; its objectness band deliberately overlaps the
    filter threshold region so the objectness filter stays non-trivial.
    """

    seed: int = 0
    d: int = 2
    n_total: int = 500
    n_known: int = 10
    n_unknown: int = 60
    cluster_means: tuple[tuple[float, ...], ...] = ((6.5, 0.0), (2.05, 5.64))
    cluster_stddev: float = 1.4
    background_mean: tuple[float, ...] = (-2.82, -1.03)
    background_stddev: float = 2.8
    objectness_known: tuple[float, float] = (0.7, 1.0)
    objectness_unknown: tuple[float, float] = (0.3, 0.8)
    objectness_background: tuple[float, float] = (0.0, 0.3)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if len(self.cluster_means) < 2:
            raise ValueError("need at least one known center and one unknown center")
        means = tuple(tuple(float(x) for x in m) for m in self.cluster_means)
        for m in means:
            if len(m) != self.d:
                raise ValueError(f"cluster mean of length {len(m)} does not match d={self.d}")
        object.__setattr__(self, "cluster_means", means)
        bg = tuple(float(x) for x in self.background_mean)
        if len(bg) != self.d:
            raise ValueError(f"background mean of length {len(bg)} does not match d={self.d}")
        object.__setattr__(self, "background_mean", bg)
        if self.cluster_stddev < 0.0 or self.background_stddev < 0.0:
            raise ValueError("stddev must be non-negative")
        if self.n_known < 1 or self.n_unknown < 0:
            raise ValueError("need at least one known item")
        if self.n_total < self.n_known + self.n_unknown:
            raise ValueError("n_total smaller than known plus unknown items")
        for lo, hi in (
            self.objectness_known,
            self.objectness_unknown,
            self.objectness_background,
        ):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError("objectness bands must satisfy 0 <= lo <= hi <= 1")

    @property
    def n_classes(self) -> int:
        return len(self.cluster_means) - 1

    @property
    def n_background(self) -> int:
        return self.n_total - self.n_known - self.n_unknown


def _split_counts(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _draw_cluster(
    seed: int, tag: int, count: int, mean: Sequence[float], stddev: float, band: tuple[float, float]
):
    rng = _stream(seed, tag)
    d = len(mean)
    points = np.asarray(mean) + stddev * rng.standard_normal((count, d))
    objectness = rng.uniform(band[0], band[1], size=count)
    return points, objectness


def gen_scene(spec: SceneSpec) -> EmbeddingSet:
    """One scene from the given SceneSpec: data, labels, objectness scores."""
    blocks = []
    labels = []
    scores = []
    counts = _split_counts(spec.n_known, spec.n_classes)
    for c in range(spec.n_classes):
        pts, obj = _draw_cluster(
            spec.seed, c, counts[c], spec.cluster_means[c], spec.cluster_stddev,
            spec.objectness_known,
        )
        blocks.append(pts)
        labels.extend([c + 1] * counts[c])
        scores.append(obj)
    pts, obj = _draw_cluster(
        spec.seed, _TAG_UNKNOWN, spec.n_unknown, spec.cluster_means[-1],
        spec.cluster_stddev, spec.objectness_unknown,
    )
    blocks.append(pts)
    labels.extend([UNKNOWN_LABEL] * spec.n_unknown)
    scores.append(obj)
    pts, obj = _draw_cluster(
        spec.seed, _TAG_BACKGROUND, spec.n_background, spec.background_mean,
        spec.background_stddev, spec.objectness_background,
    )
    blocks.append(pts)
    labels.extend([BACKGROUND_LABEL] * spec.n_background)
    scores.append(obj)
    return EmbeddingSet(
        np.vstack(blocks),
        labels=np.asarray(labels, dtype=np.int64),
        objectness=np.concatenate(scores),
    )


@dataclass(frozen=True)
class SeparationCase:
    """One angular-separation case: same clusters, unknown center rotated."""

    angle: float
    embeddings: EmbeddingSet
    known: IndexSet
    unknown: IndexSet

    @property
    def all_items(self) -> IndexSet:
        return IndexSet.of(range(self.embeddings.n))


def gen_separation_cases(
    seed: int = 0,
    n_cases: int = 3,
    *,
    d: int = 128,
    n_known: int = 10,
    n_unknown: int = 100,
    radius: float = 6.0,
    stddev: float = 0.4,
    base_angle: float = math.pi / 7.2,
    angle_step: float = math.pi / 4.5,
) -> list[SeparationCase]:
    """Cases with growing angular separation between known and unknown clusters.

    The known cluster and both noise draws are shared bit-for-bit across
    cases; only the unknown center moves along a circle of fixed radius, so
    any change between cases is attributable to the separation alone.  The
    default d keeps the full Gram matrix nonsingular (d >= n_known +
    n_unknown), which log-determinant cross terms need.
    """
    if n_cases < 1:
        raise ValueError("need at least one case")
    if d < 2:
        raise ValueError("separation cases need d >= 2")
    last = base_angle + (n_cases - 1) * angle_step
    if not (0.0 < base_angle and last < math.pi):
        raise ValueError("angles must stay inside (0, pi)")
    known_noise = stddev * _stream(seed, _TAG_SEP_KNOWN).standard_normal((n_known, d))
    unknown_noise = stddev * _stream(seed, _TAG_SEP_UNKNOWN).standard_normal(
        (n_unknown, d)
    )
    k_center = np.zeros(d)
    k_center[0] = radius
    known_pts = k_center + known_noise
    cases = []
    for j in range(n_cases):
        angle = base_angle + j * angle_step
        u_center = np.zeros(d)
        u_center[0] = radius * math.cos(angle)
        u_center[1] = radius * math.sin(angle)
        data = np.vstack([known_pts, u_center + unknown_noise])
        labels = np.asarray([1] * n_known + [UNKNOWN_LABEL] * n_unknown)
        cases.append(
            SeparationCase(
                angle=angle,
                embeddings=EmbeddingSet(data, labels=labels),
                known=IndexSet.of(range(n_known)),
                unknown=IndexSet.of(range(n_known, n_known + n_unknown)),
            )
        )
    return cases
