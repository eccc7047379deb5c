from __future__ import annotations

import json

import numpy as np
import pytest

from taxgrasp.errors import DimensionError, TemplateError
from taxgrasp.hand import HandDescription
from taxgrasp.taxonomy import (GraspCommand, GraspTemplate, command_feature,
                               default_hand_path, default_library_path,
                               load_library, orientation_for_direction,
                               sample_command, yaw_direction)

TABLE_ROWS = ["LargeDiameter", "MediumDiameter", "SmallDiameter", "AdductedThumb",
              "Prismatic4Finger", "Prismatic3Finger", "Prismatic2Finger",
              "PalmarPinch", "TipPinch", "PowerSphere", "Tripod", "Lateral",
              "ExtensionType", "Sphere4Finger", "Sphere3Finger", "Ventral"]


@pytest.fixture(scope="module")
def hand():
    return HandDescription.load(default_hand_path())


@pytest.fixture(scope="module")
def library(hand):
    return load_library(default_library_path(), hand)


def test_library_has_exactly_30_distinct_templates(library):
    assert len(library) == 30
    assert len(set(library.names())) == 30


def test_library_contains_all_table_rows(library):
    for name in TABLE_ROWS:
        assert name in library.by_name, name


def test_every_template_engages_at_least_two_links(library):
    for t in library:
        assert t.num_active >= 2, t.name


def test_templates_within_joint_limits(library, hand):
    lo, hi = hand.joint_limits[:, 0], hand.joint_limits[:, 1]
    for t in library:
        assert np.all(t.q_ref >= lo - 1e-9), t.name
        assert np.all(t.q_ref <= hi + 1e-9), t.name


def test_active_normals_unit_length(library):
    for t in library:
        norms = np.linalg.norm(t.contact_normals[t.mask], axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)


def test_tip_pinch_mask_is_thumb_and_index_distal(library, hand):
    t = library["TipPinch"]
    names = {hand.links[l].name for l in t.active_links()}
    assert names == {"thumb_distal", "index_distal"}


def test_library_round_trip(tmp_path, library, hand):
    path = tmp_path / "lib.json"
    library.dump(path)
    again = load_library(path, hand)
    for a, b in zip(library, again):
        assert a.name == b.name
        np.testing.assert_array_equal(a.q_ref, b.q_ref)
        np.testing.assert_array_equal(a.mask, b.mask)
        np.testing.assert_array_equal(a.contact_points, b.contact_points)
        np.testing.assert_array_equal(a.contact_normals, b.contact_normals)


def test_load_missing_file():
    with pytest.raises(FileNotFoundError):
        load_library("/nonexistent/templates.json")


def test_load_wrong_count(tmp_path, hand):
    doc = json.loads(default_library_path().read_text())
    doc["templates"] = doc["templates"][:29]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(TemplateError, match="exactly 30"):
        load_library(path, hand)


def test_load_dimension_mismatch(tmp_path, hand):
    doc = json.loads(default_library_path().read_text())
    doc["dof"] = 16
    path = tmp_path / "wrongdof.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DimensionError):
        load_library(path, hand)


def test_load_non_unit_normal(tmp_path, hand):
    doc = json.loads(default_library_path().read_text())
    t = doc["templates"][0]
    l = t["mask"].index(True)
    t["contact_normals"][l] = [0.0, 0.0, -0.5]
    path = tmp_path / "badnormal.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(TemplateError, match="unit length"):
        load_library(path, hand)


# -- command feature ---------------------------------------------------------


def make_template(d=4, l=4):
    mask = np.zeros(l, dtype=bool)
    mask[0] = mask[2] = True
    normals = np.zeros((l, 3))
    normals[:, 2] = -1.0
    return GraspTemplate("TipPinch", "precision",
                         q_ref=np.array([0.1, 0.2, 0.3, 0.4][:d]),
                         mask=mask, contact_points=np.zeros((l, 3)),
                         contact_normals=normals)


def test_command_feature_layout():
    t = make_template()
    feat = command_feature(t, np.zeros(4), [1, 0, 0, 0])
    np.testing.assert_allclose(
        feat, [0.1, 0.2, 0.3, 0.4, 1, 0, 1, 0, 1, 0, 0, 0])


def test_command_feature_zero_at_reference():
    t = make_template()
    feat = command_feature(t, t.q_ref, [1, 0, 0, 0])
    np.testing.assert_allclose(feat[:4], 0.0)


def test_command_feature_linear_in_q():
    t = make_template()
    rng = np.random.default_rng(0)
    q1, q2 = rng.normal(size=4), rng.normal(size=4)
    diff = (command_feature(t, q1, [1, 0, 0, 0])
            - command_feature(t, q2, [1, 0, 0, 0]))
    np.testing.assert_allclose(diff[:4], q2 - q1, atol=1e-12)
    np.testing.assert_allclose(diff[4:], 0.0)


def test_command_feature_dimension_error():
    with pytest.raises(DimensionError):
        command_feature(make_template(), np.zeros(5), [1, 0, 0, 0])


def test_identity_orientation_encoding():
    t = make_template()
    feat = command_feature(t, np.zeros(4), [1, 0, 0, 0])
    np.testing.assert_array_equal(feat[-4:], [1, 0, 0, 0])


# -- sampling ----------------------------------------------------------------


def test_sample_command_deterministic(library):
    a = sample_command(np.random.default_rng(42), library)
    b = sample_command(np.random.default_rng(42), library)
    assert a.taxonomy == b.taxonomy
    np.testing.assert_array_equal(a.wrist_orientation, b.wrist_orientation)


def test_sample_command_uniform_within_3_sigma(library):
    rng = np.random.default_rng(2024)
    n = 30_000
    counts = {}
    for _ in range(n):
        c = sample_command(rng, library)
        counts[c.taxonomy] = counts.get(c.taxonomy, 0) + 1
    p = 1 / 30
    sigma = np.sqrt(n * p * (1 - p))
    for name in library.names():
        assert abs(counts.get(name, 0) - n * p) <= 3 * sigma, name


def test_sample_command_empty_library_raises(hand):
    from taxgrasp.taxonomy import TemplateLibrary
    empty = TemplateLibrary("h", hand.dof, hand.num_links, [])
    with pytest.raises(ValueError):
        sample_command(np.random.default_rng(0), empty)


def test_sampled_orientation_in_direction_set(library):
    rng = np.random.default_rng(7)
    quats = {tuple(np.round(orientation_for_direction(yaw_direction(i)), 12))
             for i in range(8)}
    for _ in range(50):
        c = sample_command(rng, library)
        assert tuple(np.round(c.wrist_orientation, 12)) in quats


def test_grasp_command_requires_unit_quaternion():
    with pytest.raises(ValueError):
        GraspCommand("TipPinch", np.array([1.0, 1.0, 0.0, 0.0]))
