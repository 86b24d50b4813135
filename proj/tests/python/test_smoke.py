"""Smoke tests for the python bindings."""

import json
import math

import numpy as np
import pytest

import anchorfit as af


@pytest.fixture(scope="module")
def rig():
    return af.default_rig()


def test_default_rig_shape(rig):
    assert rig.joint_count == 18
    assert rig.vertex_count > 100
    assert len(rig.joint_names) == 18
    assert rig.joint_parents[0] == -1
    assert len(rig.keypoint_map) == 14
    assert 1.5 < rig.height < 2.0


def test_forward_kinematics_identity(rig):
    state = af.HumanState(rig)
    positions, transforms = af.forward_kinematics(rig, state)
    assert positions.shape == (18, 3)
    assert transforms.shape == (18, 12)
    # Identity pose: the skinning transforms are all the identity map.
    expected = np.tile(np.eye(3, 4).reshape(-1), (18, 1))
    assert np.allclose(transforms, expected)


def test_root_rotation_symmetry(rig):
    state = af.HumanState(rig)
    base, _ = af.forward_kinematics(rig, state)
    state.root_rotation = np.array([0.0, 0.0, math.pi])
    rotated, _ = af.forward_kinematics(rig, state)
    assert np.allclose(rotated[:, 0], -base[:, 0], atol=1e-12)
    assert np.allclose(rotated[:, 1], -base[:, 1], atol=1e-12)
    assert np.allclose(rotated[:, 2], base[:, 2], atol=1e-12)


def test_skinning_and_capsules(rig):
    state = af.HumanState(rig)
    posed = af.skin_vertices(rig, state)
    assert posed.shape == (rig.vertex_count, 3)
    assert np.allclose(posed, rig.template_vertices)
    capsules = af.capsule_proxies(rig, state)
    assert capsules.shape == (17, 7)
    assert (capsules[:, 6] > 0).all()


def test_projection_example():
    cam = af.Camera(eye=[0.0, 0.0, 0.0], target=[0.0, 0.0, 1.0], focal=1000.0,
                    width=1000, height=1000)
    uv = af.project(cam, np.array([[1.0, 0.0, 10.0], [0.0, 0.0, 5.0]]))
    assert uv[0] == pytest.approx([0.6, 0.5], abs=1e-12)
    assert uv[1] == pytest.approx([0.5, 0.5], abs=1e-12)


def test_geman_mcclure_table():
    assert af.geman_mcclure(0.0, 0.05) == 0.0
    assert af.geman_mcclure(0.05, 0.05) == 0.5
    assert af.geman_mcclure(0.5, 0.05) == pytest.approx(100.0 / 101.0)
    with pytest.raises(af.AnchorfitError):
        af.geman_mcclure(1.0, 0.0)


def test_farthest_point_sampling():
    pts = np.array([[0.0, 0, 0], [0.1, 0, 0], [1.0, 0, 0]])
    assert af.farthest_point_sampling(pts, 2, 0) == [0, 2]
    cloud = np.random.default_rng(3).normal(size=(64, 3))
    a = af.farthest_point_sampling(cloud, 16, 0)
    b = af.farthest_point_sampling(cloud, 16, 0)
    assert a == b
    assert len(set(a)) == 16


def test_vertex_normals_plane():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    faces = np.array([[0, 1, 2], [1, 3, 2]], dtype=np.int32)
    normals = af.vertex_normals(verts, faces)
    assert np.allclose(normals, [[0, 0, 1]] * 4)


def test_extract_contacts_against_palms(rig):
    # A plate hovering just above the palm tray of the crossed-arm pose.
    state = af.HumanState(rig)
    rots = state.joint_rotations
    names = rig.joint_names
    rots[names.index("l_shoulder")] = [0, -math.pi / 4, 0]
    rots[names.index("l_elbow")] = [0, -0.75 * math.pi, 0]
    rots[names.index("r_shoulder")] = [0, math.pi / 4, 0]
    rots[names.index("r_elbow")] = [0, 0.75 * math.pi, 0]
    state.joint_rotations = rots

    posed = af.skin_vertices(rig, state)
    cand = posed[np.array(rig.contact_candidates)]
    top = cand[:, 1].max()

    n = 6
    xs = np.linspace(-0.1, 0.1, n)
    zs = np.linspace(0.18, 0.28, n)
    verts, faces = [], []
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            verts.append([x, top + 0.004, z])
    for i in range(n - 1):
        for j in range(n - 1):
            v = i * n + j
            faces.append([v, v + n, v + 1])        # plate normal -y
            faces.append([v + 1, v + n, v + n + 1])
    pairs = af.extract_contacts(rig, state, np.array(verts),
                                np.array(faces, dtype=np.int32),
                                n_samples=36, gm_sigma_dist=0.08)
    assert len(pairs) > 0
    assert (pairs[:, 1] < rig.vertex_count).all()


def test_cli_pipeline(tmp_path):
    scene = tmp_path / "scene"
    assert af.run_cli(["synth", "--scenario", "carry-box", "--frames", "4",
                       "--noise", "0.005", "--seed", "3", "--out",
                       str(scene)]) == 0
    config = {
        "format_version": 1,
        "stage": "motion",
        "paths": {
            "rig": "rig.json",
            "cameras": "cameras_motion.json",
            "keypoints": "keypoints_motion.json",
            "contacts": "contacts.json",
            "object": "object.obj",
            "init": "init.json",
            "truth": "truth.json",
            "output_dir": "fit",
        },
        "adam": {"iterations_motion": 200},
    }
    (scene / "config.json").write_text(json.dumps(config))
    assert af.run_cli(["fit-motion", "--config", str(scene / "config.json")]) == 0
    assert af.run_cli(["eval", "--config", str(scene / "config.json"),
                       "--params", str(scene / "fit" / "params.json"),
                       "--out", str(scene / "fit")]) == 0
    metrics = json.loads((scene / "fit" / "metrics.json").read_text())
    assert metrics["mean"]["reprojection_error"] < 0.05
    assert af.run_cli(["fit-motion", "--rig", str(tmp_path / "missing.json")]) == 1


def test_load_rig_roundtrip(tmp_path, rig):
    scene = tmp_path / "s"
    assert af.run_cli(["synth", "--scenario", "hold", "--frames", "1",
                       "--out", str(scene)]) == 0
    loaded = af.load_rig(str(scene / "rig.json"))
    assert loaded.joint_count == rig.joint_count
    assert np.allclose(loaded.template_vertices, rig.template_vertices)
