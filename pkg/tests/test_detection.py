import math

import numpy as np
import pytest
from hypothesis import given

from irtrack.detection import (DetectionConfig, expected_area, extract_blobs,
                               fit_sphere_fixed_radius, localize_markers, segment_reflectivity)
from irtrack.errors import InvalidArgument
from irtrack.geometry import CameraIntrinsics, RigidTransform, rotation_about
from irtrack.sensor import (Distractor, NoiseModel, SceneSpec, SensorFrame, StrayMarker,
                            marker_pixel_area, render_frame)
from irtrack.tools import ToolDefinition

from .strategies import seeds

INTR = CameraIntrinsics.default()
ZERO = NoiseModel.zero()


def _frame(refl, depth=None):
    refl = np.asarray(refl, dtype=np.uint16)
    depth = np.zeros_like(refl) if depth is None else depth
    return SensorFrame(refl, depth, 0.0, CameraIntrinsics.from_fov(90, 90, refl.shape[1],
                                                                  refl.shape[0]))


def test_segment_all_zero_image():
    assert not segment_reflectivity(_frame(np.zeros((8, 8)))).any()


def test_segment_threshold_separates_bands():
    refl = np.array([[0, 299, 499, 500, 520, 2200]] * 2)
    assert segment_reflectivity(_frame(refl))[0].tolist() == [False, False, False, True, True, True]


def test_segment_rejects_bad_threshold():
    with pytest.raises(InvalidArgument):
        segment_reflectivity(_frame(np.zeros((2, 2))), 0)


def test_segment_mask_matches_rendered_blob():
    f = render_frame(SceneSpec(stray_markers=[StrayMarker((0, 0, 400.0))]), INTR, ZERO, 0)
    mask = segment_reflectivity(f)
    # Ground truth: pixels whose rays hit the sphere.
    from irtrack.geometry import pixel_rays
    rays = pixel_rays(INTR)
    b = rays @ np.array([0, 0, 400.0])
    hit = b * b - (400.0 ** 2 - 5.75 ** 2) >= 0
    assert mask.sum() == hit.sum()
    assert np.array_equal(mask, hit)


def test_extract_two_squares():
    mask = np.zeros((10, 10), bool)
    mask[1:4, 1:4] = True
    mask[6:9, 5:8] = True
    blobs = extract_blobs(mask, 1, 100)
    assert sorted(b.area for b in blobs) == [9, 9]
    assert sorted(tuple(b.centroid) for b in blobs) == [(2.0, 2.0), (6.0, 7.0)]


def test_extract_area_bounds_drop_speckle_and_slabs():
    mask = np.zeros((30, 30), bool)
    mask[0, 0] = True  # speckle
    mask[10:13, 10:13] = True
    mask[15:30, 0:30] = True  # large flat distractor
    blobs = extract_blobs(mask, 2, 100)
    assert [b.area for b in blobs] == [9]


def test_extract_connectivity():
    mask = np.zeros((4, 4), bool)
    mask[0, 0] = mask[1, 1] = True
    assert len(extract_blobs(mask, 1, 10, connectivity=8)) == 1
    assert len(extract_blobs(mask, 1, 10, connectivity=4)) == 2


def test_intensity_weighted_centroid():
    mask = np.zeros((3, 3), bool)
    mask[1, 0:2] = True
    refl = np.zeros((3, 3))
    refl[1, 0], refl[1, 1] = 1000, 3000
    (blob,) = extract_blobs(mask, 1, 10, refl)
    assert blob.centroid[0] == pytest.approx(0.75)
    assert blob.peak_intensity == 3000


def test_fit_sphere_fixed_radius_on_exact_surface():
    rng = np.random.default_rng(1)
    c = np.array([10.0, -20.0, 500.0])
    d = rng.normal(size=(40, 3))
    d[:, 2] = -np.abs(d[:, 2])  # visible cap only
    pts = c + 5.75 * d / np.linalg.norm(d, axis=1, keepdims=True)
    fit = fit_sphere_fixed_radius(pts, 5.75, c + [1.0, -1.0, 3.0])
    assert np.allclose(fit, c, atol=1e-9)


def test_localize_on_axis_noiseless_unquantized():
    f = render_frame(SceneSpec(stray_markers=[StrayMarker((0, 0, 500.0))]), INTR, ZERO, 0,
                     quantize=False)
    (m,) = localize_markers(f)
    assert np.allclose(m.position, [0, 0, 500], atol=1e-6)
    assert m.depth == pytest.approx(500 - 5.75, abs=1e-6)


def test_localize_on_axis_quantized_within_half_mm():
    f = render_frame(SceneSpec(stray_markers=[StrayMarker((0, 0, 500.0))]), INTR, ZERO, 0)
    (m,) = localize_markers(f)
    assert np.linalg.norm(m.position - [0, 0, 500]) < 0.5


@given(seeds)
def test_localize_closed_loop_off_axis(seed):
    rng = np.random.default_rng(seed)
    lim = math.tan(math.radians(40))
    ray = np.array([rng.uniform(-lim, lim), rng.uniform(-lim, lim), 1.0])
    c = rng.uniform(200, 750) * ray / np.linalg.norm(ray)
    scene = SceneSpec(stray_markers=[StrayMarker(tuple(c))])
    exact = localize_markers(render_frame(scene, INTR, ZERO, 0, quantize=False))
    quant = localize_markers(render_frame(scene, INTR, ZERO, 0))
    assert len(exact) == 1 and len(quant) == 1
    assert np.linalg.norm(exact[0].position - c) < 1e-3
    assert np.linalg.norm(quant[0].position - c) < 0.6


def test_flat_marker_center_is_surface_point():
    # A small fronto-parallel reflective disc stands in for a flat marker.
    f = render_frame(SceneSpec(distractors=[Distractor(254, 254, 258, 258, 400.0)]), INTR, ZERO,
                     0, quantize=False)
    (m,) = localize_markers(f, DetectionConfig(marker_radius=0.0))
    from irtrack.geometry import back_project
    surface = back_project(INTR, (255.5, 255.5), 400.0)
    # The patch's pixel rays differ in length by ~0.01 mm across its width.
    assert np.allclose(m.position, surface, atol=0.02)
    assert m.depth == pytest.approx(400.0, abs=0.02)
    assert m.radius == 0.0


def _tool_scene():
    tool = ToolDefinition.from_points("t", [[0, 0, 0], [28.6, 41, 0], [0, 88, 0], [-44.3, 40.5, 0]])
    R = rotation_about((1, 0, 0), math.radians(160))
    return tool, RigidTransform(R, np.array([30.0, -20.0, 550.0]))


def test_four_marker_tool_gives_four_detections():
    tool, pose = _tool_scene()
    f = render_frame(SceneSpec(tools=[(tool, pose)]), INTR, NoiseModel(), 3)
    dets = localize_markers(f)
    assert len(dets) == 4
    truth = pose.apply(tool.markers)
    for d in dets:
        assert np.min(np.linalg.norm(truth - d.position, axis=1)) < 2.0


def test_distractor_and_speckle_are_rejected():
    tool, pose = _tool_scene()
    scene = SceneSpec(tools=[(tool, pose)],
                      distractors=[Distractor(20, 20, 140, 90, 600.0),  # monitor-like slab
                                   Distractor(400, 400, 401, 401, 500.0)])  # one-pixel glint
    stats = {}
    dets = localize_markers(render_frame(scene, INTR, NoiseModel(), 0), stats=stats)
    assert len(dets) == 4
    assert stats["area"] == 2


def test_blob_without_valid_depth_is_dropped():
    f = render_frame(SceneSpec(stray_markers=[StrayMarker((0, 0, 990.0))]), INTR, NoiseModel(), 0)
    stats = {}
    assert localize_markers(f, stats=stats) == []
    assert stats["no_depth"] == 1


@pytest.mark.parametrize("mode", ["median", "central"])
def test_surface_depth_modes_are_close(mode):
    f = render_frame(SceneSpec(stray_markers=[StrayMarker((0, 0, 400.0))]), INTR, ZERO, 0)
    (m,) = localize_markers(f, DetectionConfig(depth_mode=mode))
    # These modes read the nearest surface depth and can be biased by up to a mm or two.
    assert np.linalg.norm(m.position - [0, 0, 400]) < 2.5


def test_accepted_area_consistent_with_prediction():
    tool, pose = _tool_scene()
    cfg = DetectionConfig()
    for d in localize_markers(render_frame(SceneSpec(tools=[(tool, pose)]), INTR, NoiseModel(), 1)):
        pred = expected_area(INTR, cfg.marker_radius, d.depth, d.ray)
        rho = math.sqrt(pred / math.pi)
        assert 0.4 * math.pi * (rho - 1) ** 2 <= d.blob.area <= 2.5 * math.pi * (rho + 1) ** 2


def test_expected_area_on_axis_equals_pixel_area():
    assert expected_area(INTR, 5.75, 500, np.array([0, 0, 1.0])) == marker_pixel_area(INTR, 5.75, 500)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        DetectionConfig(depth_mode="mean")
    with pytest.raises(InvalidArgument):
        DetectionConfig(connectivity=6)
