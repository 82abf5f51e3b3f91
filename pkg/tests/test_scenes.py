"""Synthetic scene generation: layout, determinism, stream independence."""

import math

import numpy as np
import pytest

from submine import (
    BACKGROUND_LABEL,
    UNKNOWN_LABEL,
    SceneSpec,
    cosine,
    gen_scene,
    gen_separation_cases,
)


def test_default_scene_composition():
    spec = SceneSpec()
    scene = gen_scene(spec)
    assert (scene.n, scene.d) == (500, 2)
    labels = scene.labels
    assert int((labels == 1).sum()) == 10
    assert int((labels == UNKNOWN_LABEL).sum()) == 60
    assert int((labels == BACKGROUND_LABEL).sum()) == 430
    assert spec.n_classes == 1
    assert spec.n_background == 430
    # Blocks are laid out knowns, then unknowns, then background.
    assert labels[:10].tolist() == [1] * 10
    assert labels[10:70].tolist() == [0] * 60
    assert labels[70:].tolist() == [-1] * 430


def test_objectness_bands_per_role():
    spec = SceneSpec()
    scene = gen_scene(spec)
    obj = scene.objectness
    lab = scene.labels
    for role, (lo, hi) in (
        (1, spec.objectness_known),
        (UNKNOWN_LABEL, spec.objectness_unknown),
        (BACKGROUND_LABEL, spec.objectness_background),
    ):
        vals = obj[lab == role]
        assert vals.min() >= lo and vals.max() <= hi


def test_scene_is_deterministic():
    a = gen_scene(SceneSpec(seed=5))
    b = gen_scene(SceneSpec(seed=5))
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.objectness, b.objectness)
    c = gen_scene(SceneSpec(seed=6))
    assert not np.array_equal(a.data, c.data)


def test_background_knobs_do_not_move_cluster_draws():
    base = gen_scene(SceneSpec())
    moved = gen_scene(SceneSpec(background_mean=(9.0, 9.0), background_stddev=0.1))
    # Knowns and unknowns come from their own streams, so they are bitwise
    # unchanged when only the background is reconfigured.
    assert np.array_equal(base.data[:70], moved.data[:70])
    assert np.array_equal(base.objectness[:70], moved.objectness[:70])
    assert not np.array_equal(base.data[70:], moved.data[70:])


def test_adding_a_known_class_keeps_other_streams():
    base = gen_scene(SceneSpec())
    spec3 = SceneSpec(cluster_means=((6.5, 0.0), (-6.0, 2.0), (2.05, 5.64)))
    wider = gen_scene(spec3)
    assert spec3.n_classes == 2
    assert wider.labels[:10].tolist() == [1] * 5 + [2] * 5
    # Unknown and background blocks sit at the same offsets and reuse their
    # dedicated streams, so the extra class cannot perturb them.
    assert np.array_equal(base.data[10:], wider.data[10:])
    assert np.array_equal(base.objectness[10:], wider.objectness[10:])


def test_scene_spec_validation():
    with pytest.raises(ValueError, match="seed"):
        SceneSpec(seed=-1)
    with pytest.raises(ValueError, match="at least one known center"):
        SceneSpec(cluster_means=((1.0, 2.0),))
    with pytest.raises(ValueError, match="does not match d=2"):
        SceneSpec(cluster_means=((1.0, 2.0, 3.0), (0.0, 0.0)))
    with pytest.raises(ValueError, match="does not match d=2"):
        SceneSpec(background_mean=(0.0,))
    with pytest.raises(ValueError, match="n_total smaller"):
        SceneSpec(n_total=50, n_known=40, n_unknown=40)
    with pytest.raises(ValueError, match="objectness bands"):
        SceneSpec(objectness_known=(0.9, 0.2))
    with pytest.raises(ValueError, match="stddev"):
        SceneSpec(cluster_stddev=-1.0)


def test_higher_dimensional_scene():
    spec = SceneSpec(
        d=5,
        cluster_means=((1.0, 0.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0, 0.0)),
        background_mean=(0.0,) * 5,
        n_total=40,
        n_known=4,
        n_unknown=8,
    )
    scene = gen_scene(spec)
    assert (scene.n, scene.d) == (40, 5)
    assert spec.n_background == 28


# ---------------------------------------------------------------------------
# separation cases


def test_separation_case_geometry():
    cases = gen_separation_cases()
    assert len(cases) == 3
    angles = [math.degrees(c.angle) for c in cases]
    assert angles == pytest.approx([25.0, 65.0, 105.0], abs=1e-9)
    for case in cases:
        assert case.embeddings.d == 128
        assert case.embeddings.n == 110
        assert tuple(case.known) == tuple(range(10))
        assert tuple(case.unknown) == tuple(range(10, 110))
        assert len(case.all_items) == 110
        assert case.embeddings.labels[:10].tolist() == [1] * 10
        assert case.embeddings.labels[10:].tolist() == [0] * 100


def test_separation_shares_noise_across_cases():
    cases = gen_separation_cases(seed=3)
    # The known cluster is identical bit for bit; the unknown cluster reuses
    # one noise draw around a center that moves along the circle.
    assert np.array_equal(cases[0].embeddings.data[:10], cases[2].embeddings.data[:10])
    radius = 6.0
    deviations = []
    for case in cases:
        center = np.zeros(128)
        center[0] = radius * math.cos(case.angle)
        center[1] = radius * math.sin(case.angle)
        deviations.append(case.embeddings.data[10:] - center)
    assert np.allclose(deviations[0], deviations[1], atol=1e-12)
    assert np.allclose(deviations[0], deviations[2], atol=1e-12)


def test_separation_cases_grow_apart():
    cases = gen_separation_cases()
    sims = []
    for case in cases:
        data = case.embeddings.data
        vals = [
            cosine(data[i], data[j]) for i in case.known for j in list(case.unknown)[:20]
        ]
        sims.append(float(np.mean(vals)))
    assert sims[0] > sims[1] > sims[2]


def test_separation_cases_deterministic_and_seeded():
    a = gen_separation_cases(seed=9)
    b = gen_separation_cases(seed=9)
    c = gen_separation_cases(seed=10)
    assert np.array_equal(a[1].embeddings.data, b[1].embeddings.data)
    assert not np.array_equal(a[1].embeddings.data, c[1].embeddings.data)


def test_separation_validation():
    with pytest.raises(ValueError, match="at least one case"):
        gen_separation_cases(n_cases=0)
    with pytest.raises(ValueError, match="inside"):
        gen_separation_cases(n_cases=10)
    with pytest.raises(ValueError, match="d >= 2"):
        gen_separation_cases(d=1)
