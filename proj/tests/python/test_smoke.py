import math

import numpy as np
import pytest

import dpe_mvs

SMALL_SCENE = """\
name small-slab
size 96 72
bounds 3 8
supersampling 2
camera 110 110 47.5 35.5 0 0 0 0 0 5
camera 110 110 47.5 35.5 0.3 0 0 0 0 5
camera 110 110 47.5 35.5 -0.3 0.1 0 0 0 5
plane 0 0 5 1 0 0 0 1 0 texture noise 7 60 0.05 128 poly -3 -3 3 -3 3 3 -3 3
"""


def fronto_camera():
    cam = dpe_mvs.Camera()
    cam.fx = cam.fy = 200.0
    cam.cx, cam.cy = 63.5, 47.5
    cam.width, cam.height = 128, 96
    cam.rotation = np.eye(3)
    cam.center = np.zeros(3)
    return cam


def test_project_unproject_round_trip():
    cam = fronto_camera()
    point = dpe_mvs.unproject(np.array([10.25, 70.5]), 4.0, cam)
    pixel, depth = dpe_mvs.project(point, cam)
    assert np.allclose(pixel, [10.25, 70.5], atol=1e-9)
    assert depth == pytest.approx(4.0)


def test_homography_of_fronto_plane_is_a_shift():
    ref = fronto_camera()
    src = fronto_camera()
    src.center = np.array([0.1, 0.0, 0.0])
    h = dpe_mvs.homography(ref, src, np.array([30.0, 40.0]), np.array([0, 0, -1.0]), 5.0)
    q = h @ np.array([50.0, 20.0, 1.0])
    assert q[:2] / q[2] == pytest.approx([50.0 - 4.0, 20.0])


def test_closed_form_rules():
    assert [dpe_mvs.exclusion_radius(t) for t in range(4)] == [5, 3, 1, 1]
    assert dpe_mvs.allocate_search(10, 30, 4) == (2, 6)
    assert dpe_mvs.stochastic_probability(0.35) == pytest.approx(0.5)
    assert dpe_mvs.stochastic_probability(0.0) == pytest.approx(1.58e-4, rel=0.01)
    assert dpe_mvs.deformable_cost(0.2, [0.4, 0.6], 0.5) == pytest.approx(0.35)
    assert dpe_mvs.deformable_cost(None, [0.4, 0.6], 0.5) == pytest.approx(0.5)


def test_ncc_contracts():
    rng = np.random.default_rng(3)
    a = rng.random(25).astype(np.float32)
    assert dpe_mvs.ncc_cost(a, a) == pytest.approx(0.0, abs=1e-9)
    assert dpe_mvs.ncc_cost(a, -a) == pytest.approx(2.0, abs=1e-9)
    assert dpe_mvs.ncc_cost(a, 3 * a + 1) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError):
        dpe_mvs.ncc_cost(a, a[:20])


def test_edge_cues_on_a_step():
    image = np.zeros((40, 40), dtype=np.float32)
    image[:, 20:] = 1.0
    cues = dpe_mvs.edge_cues(image)
    cols = np.nonzero(cues["fine"].any(axis=0))[0]
    assert cols.size > 0 and cols.min() >= 19 and cols.max() <= 21


def test_render_corpus_scene():
    assert "textured-box" in dpe_mvs.corpus_names()
    scene = dpe_mvs.render_scene("textured-box")
    assert len(scene["images"]) == len(scene["cameras"]) >= 2
    depth = scene["depth"][0]
    assert depth.shape == scene["images"][0].shape
    valid = depth[depth > 0]
    assert valid.min() >= scene["depth_min"] and valid.max() <= scene["depth_max"]


def test_run_small_scene(tmp_path):
    path = tmp_path / "slab.scene"
    path.write_text(SMALL_SCENE)
    overrides = {"pyramid.levels": "1", "seed": "5"}
    run = dpe_mvs.run_scene(str(path), overrides)
    gt = run["scene"]["depth"][0]
    est = run["depth"][0]
    inner = (slice(8, -8), slice(8, -8))
    assert np.median(np.abs(est[inner] - gt[inner])) < 0.05
    assert run["points"].shape[1] == 3 and run["points"].shape[0] > 0

    rows = dpe_mvs.evaluate(run["points"], run["points"], [0.01])
    assert rows[0]["f1"] == pytest.approx(1.0)

    again = dpe_mvs.run_scene(str(path), overrides)
    assert np.array_equal(again["depth"][0], est)


def test_bad_config_key_raises(tmp_path):
    path = tmp_path / "slab.scene"
    path.write_text(SMALL_SCENE)
    with pytest.raises(ValueError):
        dpe_mvs.run_scene(str(path), {"no.such.key": "1"})


def test_default_config_lists_toggles():
    text = dpe_mvs.default_config()
    assert "toggles.po" in text and math.isfinite(len(text))
