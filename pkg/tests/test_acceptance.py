"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see lines as they
are produced; they are also repeated in the terminal summary).
"""
import itertools
import math
import time

import numpy as np
import pytest

from irtrack.cli import synthetic_trace
from irtrack.detection import DetectedMarker, localize_markers
from irtrack.geometry import (CameraIntrinsics, RigidTransform, compose, random_rotation,
                              rigid_register, rotation_about)
from irtrack.navigation import (Trajectory, pivot_calibrate, solve_display_registration,
                                trajectory_error)
from irtrack.sensor import NoiseModel, SceneSpec, StrayMarker, render_frame
from irtrack.tools import ToolDefinition
from irtrack.tracking import TrackerConfig, find_candidates, thresholds
from irtrack.evaluation.accuracy import CONDITIONS, AccuracyConfig, accuracy_table
from irtrack.evaluation.latency import estimate_latency
from irtrack.evaluation.noise import NoiseProtocolConfig, noise_characterization
from irtrack.evaluation.pipeline import SimulationConfig
from irtrack.evaluation.runtime import _noisy, runtime_bench
from irtrack.evaluation.scenes import facing_pose, reference_tool
from irtrack.evaluation.workspace import (SweepConfig, depth_positions, lateral_positions,
                                          workspace_sweep)

from .cli_runs import SUBCOMMANDS, output_bytes, run_all, write_inputs

INTR = CameraIntrinsics.default()
NOISELESS = SimulationConfig(noise_model=NoiseModel.zero(), quantize=False)


# -- 1. matching oracle ------------------------------------------------------------------

def exhaustive_candidates(tool, pts, t_side, t_shape):
    """All ordered subsets passing both gates, by full enumeration."""
    n, m = tool.n_markers, len(pts)
    if m < n:
        return {}
    perms = np.array(list(itertools.permutations(range(m), n)))
    D = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    L = tool.pairwise_lengths
    iu, ju = np.triu_indices(n, 1)
    beta = np.abs(L[iu, ju][None, :] - D[perms[:, iu], perms[:, ju]])
    loss = beta.sum(axis=1) / (n * (n - 1))
    side = (beta < t_side).all(axis=1) if t_side > 0 else (beta <= 1e-9).all(axis=1)
    shape = loss < t_shape if t_shape > 0 else loss <= 1e-9
    keep = side & shape
    return {tuple(int(v) for v in p): float(l) for p, l in zip(perms[keep], loss[keep])}


def _random_scene(rng):
    model = NoiseModel()
    tools, dets = [], []
    for k in range(int(rng.integers(1, 4))):
        n = int(rng.integers(3, 6))
        tools.append(ToolDefinition.from_points(f"t{k}", rng.uniform(-60, 60, (n, 3))))
    budget = 8
    for tool in tools:
        if tool.n_markers <= budget and rng.random() < 0.8:
            pose = RigidTransform(random_rotation(rng), rng.uniform(-80, 80, 3) + [0, 0, 550])
            dets += [_noisy(c, 5.75, model, rng) for c in pose.apply(tool.markers)]
            budget -= tool.n_markers
    for _ in range(int(rng.integers(0, budget + 1))):
        dets.append(_noisy(rng.uniform(-120, 120, 3) + [0, 0, 550], 5.75, model, rng))
    pts = np.array([d.position for d in dets]).reshape(-1, 3)
    return tools, pts[rng.permutation(len(pts))]


def test_criterion_01_matching_oracle(criterion):
    rng = np.random.default_rng(101)
    mismatches, compared, found, elapsed = 0, 0, 0, 0.0
    for s in range(500):
        tools, pts = _random_scene(rng)
        assert len(pts) <= 8
        depth = float(np.median(np.linalg.norm(pts, axis=1))) if len(pts) else 550.0
        for tool in tools:
            # Alternate calibrated gates with loose ones so many partial branches survive.
            t_side, t_shape = thresholds(NoiseModel(), depth, tool.n_markers)
            if s % 2:
                t_side, t_shape = 10 * t_side, 10 * t_shape
            t0 = time.perf_counter()
            got = find_candidates(tool, pts, t_side, t_shape)
            elapsed += time.perf_counter() - t0
            got = {c.assignment: c.loss for c in got}
            want = exhaustive_candidates(tool, pts, t_side, t_shape)
            compared += 1
            found += len(got)
            if set(got) != set(want) or any(abs(got[k] - want[k]) > 1e-12 for k in got):
                mismatches += 1
    ok = mismatches == 0 and elapsed < 60 and found > 0
    criterion(1, ok, f"{compared} tool/scene pairs, {mismatches} mismatches, {found} candidates, "
                     f"find_candidates {elapsed:.2f} s (< 60 s)")
    assert ok


# -- 2. registration -------------------------------------------------------------------------

def test_criterion_02_registration_exactness(criterion):
    rng = np.random.default_rng(202)
    worst_r = worst_t = 0.0
    for k in range(1000):
        n = int(rng.integers(3, 9))
        src = rng.uniform(-100, 100, (n, 3))
        if k % 3 == 1:
            src[:, 2] = 0.0  # exactly planar
        elif k % 3 == 2:
            src[:, 2] = rng.normal(0, 1e-4, n)  # near planar
        R, t = random_rotation(rng), rng.uniform(-800, 800, 3)
        T, _ = rigid_register(src, src @ R.T + t)
        worst_r = max(worst_r, float(np.linalg.norm(T.rotation - R)))
        worst_t = max(worst_t, float(np.linalg.norm(T.translation - t)))
    ok = worst_r < 1e-9 and worst_t < 1e-9
    criterion(2, ok, f"1000 instances, worst rotation {worst_r:.2e}, translation {worst_t:.2e} mm"
                     " (< 1e-9)")
    assert ok


# -- 3. detection closed loop ------------------------------------------------------------------

def test_criterion_03_detection_closed_loop(criterion):
    rng = np.random.default_rng(303)
    zero = NoiseModel.zero()
    lim = math.tan(math.radians(40))
    worst_exact = worst_quant = 0.0
    misses = 0
    cases = []
    for _ in range(150):
        ray = np.array([rng.uniform(-lim, lim), rng.uniform(-lim, lim), 1.0])
        c = rng.uniform(200, 750) * ray / np.linalg.norm(ray)
        cases.append([c])
    tool = reference_tool()
    for _ in range(30):
        pose = facing_pose(rng.uniform([-150, -100, 300], [150, 100, 650]), rng.uniform(-25, 25))
        cases.append(list(pose.apply(tool.markers)))
    for centres in cases:
        scene = SceneSpec(stray_markers=[StrayMarker(tuple(c)) for c in centres])
        truth = np.array(centres)
        for quantize in (False, True):
            dets = localize_markers(render_frame(scene, INTR, zero, 0, quantize=quantize))
            if len(dets) != len(centres):
                misses += 1
                continue
            err = max(np.min(np.linalg.norm(truth - d.position, axis=1)) for d in dets)
            if quantize:
                worst_quant = max(worst_quant, err)
            else:
                worst_exact = max(worst_exact, err)
    ok = misses == 0 and worst_exact < 1e-3 and worst_quant < 0.6
    criterion(3, ok, f"{len(cases)} scenes, worst noiseless {worst_exact:.2e} mm (< 1e-3), "
                     f"quantized {worst_quant:.3f} mm (< 0.6), {misses} miscounts")
    assert ok


# -- 4. filtering benefit -----------------------------------------------------------------------

def test_criterion_04_kalman_benefit(criterion):
    t0 = time.perf_counter()
    table = accuracy_table(AccuracyConfig(), seed=0)
    elapsed = time.perf_counter() - t0
    parts, all_le = [], True
    for (axis, mag), res in zip(CONDITIONS, table):
        kal, raw = res[True].iqr, res[False].iqr
        all_le &= kal <= raw
        parts.append(f"{axis}{mag:g} {kal:.4f}/{raw:.4f}")
    x1 = table[CONDITIONS.index(("x", 1.0))][True].iqr
    ok = all_le and x1 < 0.5 and elapsed < 600
    criterion(4, ok, "IQR filtered/unfiltered " + ", ".join(parts)
              + f"; 1 mm x filtered {x1:.4f} mm (< 0.5); {elapsed:.0f} s (< 600 s)")
    assert ok


# -- 5. threshold calibration ---------------------------------------------------------------------

def test_criterion_05_threshold_pass_rate(criterion):
    rng = np.random.default_rng(505)
    model = NoiseModel()
    tool = reference_tool()
    cfg = TrackerConfig(noise_model=model, confidence=1.96)
    passed = 0
    frames = 10000
    for _ in range(frames):
        pose = facing_pose(rng.uniform([-150, -100, 250], [150, 100, 750]), rng.uniform(-30, 30),
                           tuple(rng.normal(size=3)))
        dets = [_noisy(c, tool.marker_radius, model, rng) for c in pose.apply(tool.markers)]
        pts = np.array([d.position for d in dets])
        depth = float(np.mean([d.depth for d in dets]))
        t_side, t_shape = thresholds(model, depth, tool.n_markers, cfg)
        cands = find_candidates(tool, pts, t_side, t_shape)
        passed += any(c.assignment == (0, 1, 2, 3) for c in cands)
    rate = passed / frames
    ok = rate >= 0.93
    criterion(5, ok, f"true assignment passes in {100 * rate:.2f}% of {frames} frames (>= 93%)")
    assert ok


# -- 6. noise characterization ----------------------------------------------------------------------

def test_criterion_06_noise_characterization(criterion):
    model = NoiseModel()
    res = noise_characterization(model, NoiseProtocolConfig(), seed=0)
    fit = res.fit.model
    rel = [abs(g - w) / w for g, w in ((fit.a, model.a), (fit.b, model.b), (fit.c, model.c))]
    gauss = noise_characterization(model, NoiseProtocolConfig(frames=20, quantize=False), seed=1)
    rate = gauss.ad_non_reject_rate
    ok = max(rel) < 0.10 and res.fit.r_squared > 0.95 and rate >= 0.90
    criterion(6, ok, f"a={fit.a:.4g} b={fit.b:.4g} c={fit.c:.4g}, worst relative error "
                     f"{100 * max(rel):.1f}% (< 10%), R2 {res.fit.r_squared:.5f} (> 0.95), "
                     f"normality non-reject {100 * rate:.0f}% (>= 90%)")
    assert ok


# -- 7. workspace sweeps ------------------------------------------------------------------------------

def test_criterion_07_workspace_sweep(criterion):
    quiet = SweepConfig(frames=5, warmup=0, sim=NOISELESS)
    z0 = workspace_sweep(depth_positions(), quiet).max_abs_error
    x0 = workspace_sweep(lateral_positions(stop=400.0, step=50.0), quiet).max_abs_error
    z = workspace_sweep(depth_positions(250, 750, 10), SweepConfig(frames=50), seed=7)
    lateral = workspace_sweep(lateral_positions(500.0, 600.0, 5.0), SweepConfig(frames=10), seed=8)
    fov = lateral.lateral_fov_deg()
    want = INTR.fov()[0]
    missing_z = sum(s.missing for s in z.stations)
    ok = (z0 < 1e-6 and x0 < 1e-6 and missing_z == 0 and z.max_abs_error < 2.5
          and abs(fov - want) < 2.0)
    criterion(7, ok, f"noiseless z {z0:.1e} / x {x0:.1e} mm; z-sweep 250-750 max |error| "
                     f"{z.max_abs_error:.3f} mm (< 2.5), {missing_z} missing; lateral FoV "
                     f"{fov:.2f} deg vs {want:.1f} (within 2)")
    assert ok


# -- 8. throughput --------------------------------------------------------------------------------------

def test_criterion_08_throughput(criterion):
    one = runtime_bench(1, 1, frames=10000)
    five = runtime_bench(5, 5, frames=10000)
    ok = one.mean_ms < 22 and five.mean_ms < 50 and one.found_fraction > 0.99
    criterion(8, ok, f"1 tool {one.mean_ms:.3f} ms (< 22), 5 tools {five.mean_ms:.3f} ms (< 50) "
                     "mean over 10000 frames")
    assert ok


# -- 9. latency --------------------------------------------------------------------------------------------

def test_criterion_09_latency(criterion):
    ref = synthetic_trace(0.0, 100.0)
    errs = []
    for i, d in enumerate([0.0, 0.05, 0.103, 0.4]):
        test = synthetic_trace(d, 100.0, noise=0.1, seed=[9, i], offset=17.0)
        errs.append(estimate_latency(ref, test, 1.0) - d)
    worst = max(abs(e) for e in errs)
    ok = worst <= 0.01
    criterion(9, ok, "errors " + ", ".join(f"{1e3 * e:+.2f}" for e in errs)
              + f" ms; worst {1e3 * worst:.2f} ms (<= one 10 ms sample)")
    assert ok


# -- 10. navigation -----------------------------------------------------------------------------------------

def test_criterion_10_navigation(criterion):
    rng = np.random.default_rng(1010)

    def rand_T():
        return RigidTransform(random_rotation(rng), rng.uniform(-1000, 1000, 3))

    worst_reg = 0.0
    for _ in range(1000):
        T_A_H, T_H_W, T_SM_A = rand_T(), rand_T(), rand_T()
        T_M_W = compose(T_H_W, compose(T_A_H, T_SM_A))
        got = solve_display_registration(T_H_W, T_M_W, T_SM_A)
        worst_reg = max(worst_reg, float(np.abs(got.matrix() - T_A_H.matrix()).max()))

    tip = np.array([0.0, 0.0, 150.0])
    pivot = np.array([20.0, -30.0, 450.0])
    worst_tip = 0.0
    for s in range(20):
        poses = []
        for _ in range(100):
            R = rotation_about(rng.normal(size=3), rng.uniform(-0.6, 0.6))
            R_noisy = rotation_about(rng.normal(size=3), rng.normal(0, 0.2 / 150)) @ R
            poses.append(RigidTransform(R_noisy, pivot - R @ tip + rng.normal(0, 0.2, 3)))
        got_tip, _, _ = pivot_calibrate(poses)
        worst_tip = max(worst_tip, float(np.linalg.norm(got_tip - tip)))

    z = Trajectory((0, 0, 0), (0, 0, 1))
    s5 = math.radians(5)
    cases = [(trajectory_error(z, z), (0.0, 0.0)),
             (trajectory_error(z, Trajectory((2, 0, 0), (0, 0, 1))), (2.0, 0.0)),
             (trajectory_error(z, Trajectory((0, 0, 0), (0, math.sin(s5), math.cos(s5)))), (0.0, 5.0))]
    worst_traj = max(abs(g - w) for got, want in cases for g, w in zip(got, want))
    ok = worst_reg < 1e-9 and worst_tip < 0.3 and worst_traj < 1e-9
    criterion(10, ok, f"display registration worst {worst_reg:.1e} (< 1e-9); pivot tip worst "
                      f"{worst_tip:.3f} mm over 20 runs (< 0.3); trajectory cases worst "
                      f"{worst_traj:.1e} (< 1e-9)")
    assert ok


# -- 11. determinism ---------------------------------------------------------------------------------------

def test_criterion_11_cli_determinism(criterion, tmp_path):
    inp = write_inputs(tmp_path / "in")
    codes = [run_all(inp, tmp_path / f"run{k}") for k in (1, 2)]
    differing = [name for name in SUBCOMMANDS
                 if output_bytes(tmp_path / "run1", name) != output_bytes(tmp_path / "run2", name)]
    failed = sorted({n for c in codes for n, v in c.items() if v != 0})
    ok = not differing and not failed
    criterion(11, ok, f"{len(SUBCOMMANDS)} subcommands run twice; differing {differing or 'none'}, "
                      f"failed {failed or 'none'} (bench compared without wall-time columns)")
    assert ok
