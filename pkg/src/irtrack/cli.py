"""Command-line entry point: ``irtrack <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .detection import DetectionConfig, localize_markers
from .errors import DegenerateGeometry, IrtrackError, MalformedInput
from .geometry import CameraIntrinsics, RigidTransform
from .navigation import FrameGraph, Trajectory, chain_pose, trajectory_error
from .sensor import NoiseModel, iter_ahf, render_frame, save_frame, scene_from_dict
from .tools import (DefinitionSession, correspond_frames, define_tool, load_tool,
                    validate_distinctness)
from .tracking import Tracker, TrackerConfig

EXIT_CODES = """exit codes:
  0  success
  1  invalid argument value
  2  usage error (unknown flag, missing file)
  3  malformed input file (message names file:line)
  4  degenerate geometry (collinear markers, rank-deficient fit, no pivot)
"""

FRAME_RATE_HZ = 45.0


# -- output formatting -------------------------------------------------------

def fmt(x) -> str:
    """Fixed 9-significant-digit rendering used in every CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def clean(obj):
    """JSON-ready copy with floats rounded to 9 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(format(x, ".9g")) if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True)


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path, header, rows):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_json(path, obj):
    if path is None:
        return
    with _open_out(path) as fh:
        fh.write(dumps(obj) + "\n")


# -- input helpers -------------------------------------------------------------

def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}:{exc.lineno}: {exc.msg}") from None


def _require(path):
    if path is not None and path != "-" and not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def _doc_error(path, exc, line=1):
    return MalformedInput(f"{path}:{line}: {exc}")


def _noise_model(args):
    if getattr(args, "noise", None):
        d = _read_json(_require(args.noise))
        try:
            return NoiseModel.from_dict(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise _doc_error(args.noise, exc) from None
    return NoiseModel()


def _detection_config(args):
    return DetectionConfig(threshold=args.threshold, depth_mode=args.depth_mode)


def _frames_from(path):
    """Yield ``(name, frame)`` from an AHF file, concatenated stream or directory."""
    p = Path(_require(path))
    files = sorted(p.glob("*.ahf")) if p.is_dir() else [p]
    for f in files:
        with open(f, "rb") as fh:
            for frame in iter_ahf(fh, str(f)):
                yield str(f), frame


def _mapper(jobs):
    if jobs <= 1:
        return map, None
    ex = ProcessPoolExecutor(max_workers=jobs)
    return ex.map, ex


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args):
    scene_path = _require(args.scene)
    doc = _read_json(scene_path)
    base = Path(scene_path).parent
    try:
        scene = scene_from_dict(doc, tool_loader=lambda f: load_tool(base / f))
        intr = (CameraIntrinsics.from_dict(doc["intrinsics"]) if "intrinsics" in doc
                else CameraIntrinsics.default())
        model = (NoiseModel.from_dict(doc["noise_model"]) if "noise_model" in doc
                 else _noise_model(args))
    except (MalformedInput, DegenerateGeometry):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise _doc_error(scene_path, exc) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.frames):
        frame = render_frame(scene, intr, model, [args.seed, k], timestamp=k / FRAME_RATE_HZ)
        save_frame(frame, out / f"frame_{k:05d}.ahf")
    return 0


def _detection_dict(m):
    d = {"position_mm": m.position, "ray": m.ray, "depth_mm": m.depth, "radius_mm": m.radius}
    if m.blob is not None:
        d["blob"] = {"centroid_px": m.blob.centroid, "area_px": m.blob.area,
                     "peak_intensity": m.blob.peak_intensity}
    return d


def cmd_detect(args):
    cfg = _detection_config(args)
    docs = []
    for name, frame in _frames_from(args.input):
        stats = {}
        dets = localize_markers(frame, cfg, stats)
        docs.append({"source": Path(name).name, "timestamp_s": frame.timestamp,
                     "detections": [_detection_dict(m) for m in dets], "stats": stats})
    with _open_out(args.out) as fh:
        fh.write(dumps(docs[0] if len(docs) == 1 else docs) + "\n")
    return 0


def _marker_sets(path, det_cfg):
    p = Path(_require(path))
    if p.is_dir() or p.suffix == ".ahf":
        for _, frame in _frames_from(path):
            yield np.array([m.position for m in localize_markers(frame, det_cfg)]).reshape(-1, 3)
        return
    with open(p) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                pts = doc["markers_mm"] if isinstance(doc, dict) else doc
                arr = np.array(pts, dtype=float)
                if arr.ndim != 2 or arr.shape[1] != 3:
                    raise ValueError("expected a list of [x, y, z] points")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise _doc_error(path, exc, lineno) from None
            yield arr


def cmd_define_tool(args):
    session = DefinitionSession(args.t_side)
    for pts in _marker_sets(args.input, _detection_config(args)):
        if len(pts) == 0:
            continue
        session.add_frame(pts)
    session = correspond_frames(session)
    history = []
    tool = define_tool(session, args.name, args.radius, min_frames=args.min_frames,
                       history=history)
    doc = tool.to_dict()
    doc.update({"frames_used": len(session), "frames_rejected": session.rejected,
                "residual_mm": history[-1]})
    with _open_out(args.out) as fh:
        fh.write(dumps(doc) + "\n")
    return 0


def _load_tools(paths):
    tools = [load_tool(_require(p)) for p in paths]
    names = [t.name for t in tools]
    if len(set(names)) != len(names):
        raise IrtrackError(f"duplicate tool names: {names}")
    return tools


def cmd_validate_tools(args):
    report = validate_distinctness(_load_tools(args.tools), args.t_side)
    with _open_out(args.out) as fh:
        fh.write(dumps(report.to_dict()) + "\n")
    return 0


def cmd_track(args):
    tools = _load_tools(args.tools)
    cfg = TrackerConfig(noise_model=_noise_model(args), t_side=args.t_side,
                        confidence=args.confidence, max_missed=args.max_missed,
                        process_noise=args.process_noise, kalman=not args.no_kalman)
    tracker = Tracker(tools, cfg)
    det_cfg = _detection_config(args)
    with _open_out(args.out) as fh:
        for _, frame in _frames_from(args.input):
            dets = localize_markers(frame, det_cfg)
            for obs in tracker.track_frame(dets, frame.timestamp):
                fh.write(dumps(obs.to_dict()) + "\n")
    return 0


def cmd_accuracy(args):
    from .evaluation.accuracy import CONDITIONS, AccuracyConfig, accuracy_table
    from .evaluation.pipeline import SimulationConfig

    cfg = AccuracyConfig(depth=args.depth, frames=args.frames, reps=args.reps, pairs=args.pairs,
                         sim=SimulationConfig(noise_model=_noise_model(args)))
    conds = CONDITIONS
    if args.conditions:
        conds = [CONDITIONS[i] for i in args.conditions]
    mapper, ex = _mapper(args.jobs)
    try:
        table = accuracy_table(cfg, args.seed, conds, mapper)
    finally:
        if ex:
            ex.shutdown()
    rows, summary = [], []
    for res in table:
        for k in (True, False):
            r = res[k]
            unit = "deg" if r.axis == "rot" else "mm"
            rows.append([r.axis, r.magnitude, unit, k, r.median, r.iqr, r.n_pairs, r.lost_frames])
            summary.append(r.to_dict())
    write_csv(args.out, ["axis", "magnitude", "unit", "kalman", "median_error", "iqr_error",
                         "n_pairs", "lost_frames"], rows)
    write_json(args.summary, {"reps": args.reps, "frames": args.frames, "seed": args.seed,
                              "conditions": summary})
    return 0


def cmd_sweep(args):
    from .evaluation.pipeline import SimulationConfig
    from .evaluation.workspace import SweepConfig, depth_positions, lateral_positions, workspace_sweep

    if args.noiseless:
        sim = SimulationConfig(noise_model=NoiseModel.zero(), quantize=False)
    else:
        sim = SimulationConfig(noise_model=_noise_model(args))
    if args.axis == "z":
        pos = depth_positions(args.start if args.start is not None else 250.0,
                              args.stop if args.stop is not None else 750.0, args.step)
    else:
        pos = lateral_positions(args.depth, args.stop if args.stop is not None else 600.0, args.step)
    res = workspace_sweep(pos, SweepConfig(frames=args.frames, sim=sim), args.seed)
    rows = list(res.rows())
    header = list(rows[0].keys())
    write_csv(args.out, header, [[r[h] for h in header] for r in rows])
    write_json(args.summary, {
        "axis": args.axis, "stations": len(rows),
        "missing_stations": sum(r["missing"] for r in rows),
        "max_abs_error_mm": res.max_abs_error, "direction": res.direction,
        "lateral_fov_deg": res.lateral_fov_deg() if args.axis == "x" else None,
        "configured_fov_deg": sim.intrinsics.fov()[0]})
    return 0


def cmd_bench(args):
    from .evaluation.runtime import runtime_bench

    grid = [(l, v) for l in range(1, args.max_tools + 1) for v in range(1, l + 1)]
    if args.full_only:
        grid = [(l, l) for l in range(1, args.max_tools + 1)]
    results = [runtime_bench(l, v, args.frames, args.seed, n_stray=args.stray) for l, v in grid]
    header = ["n_loaded", "n_visible", "frames", "found_fraction", "mean_ms", "p95_ms", "rate_hz"]
    write_csv(args.out, header, [[getattr(r, h if h != "rate_hz" else "hz") for h in header]
                                 for r in results])
    write_json(args.summary, {"results": [r.to_dict() for r in results]})
    return 0


def _read_trace(path):
    from .evaluation.latency import MotionTrace

    t, x = [], []
    with open(_require(path)) as fh:
        rows = csv.reader(fh)
        next(rows, None)  # header
        for lineno, row in enumerate(rows, start=2):
            try:
                t.append(float(row[0]))
                x.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise _doc_error(path, exc, lineno) from None
    try:
        return MotionTrace(np.array(t), np.array(x))
    except IrtrackError as exc:
        raise _doc_error(path, exc) from None


def synthetic_trace(delay, rate_hz=100.0, duration=6.0, noise=0.0, seed=0, offset=0.0):
    """Back-and-forth hand-like motion sampled at ``rate_hz``, delayed by ``delay`` s."""
    from .evaluation.latency import MotionTrace

    t = np.arange(0.0, duration, 1.0 / rate_hz)
    x = 50.0 * np.clip(1.3 * np.sin(2 * np.pi * 0.4 * (t - delay)), -1, 1) + offset
    if noise:
        x = x + np.random.default_rng(seed).normal(0.0, noise, len(t))
    return MotionTrace(t, x)


def cmd_latency(args):
    from .evaluation.latency import estimate_latency

    if args.reference or args.test:
        if not (args.reference and args.test):
            raise IrtrackError("--reference and --test go together")
        delay = estimate_latency(_read_trace(args.reference), _read_trace(args.test), args.t_mov)
        write_csv(args.out, ["delay_s"], [[delay]])
        write_json(args.summary, {"delay_s": delay, "t_mov_s": args.t_mov})
        return 0
    rows = []
    ref = synthetic_trace(0.0, args.rate)
    for i, d in enumerate(args.delays):
        test = synthetic_trace(d, args.rate, noise=args.noise, seed=[args.seed, i], offset=17.0)
        est = estimate_latency(ref, test, args.t_mov)
        rows.append([d, est, est - d])
    write_csv(args.out, ["true_delay_s", "estimated_delay_s", "error_s"], rows)
    write_json(args.summary, {"rate_hz": args.rate, "sample_period_s": 1.0 / args.rate,
                              "max_abs_error_s": max(abs(r[2]) for r in rows)})
    return 0


def cmd_noise_fit(args):
    from .evaluation.noise import NoiseProtocolConfig, fit_noise_quadratic, noise_characterization

    if args.input:
        d, s = [], []
        with open(_require(args.input)) as fh:
            rows = csv.reader(fh)
            next(rows, None)
            for lineno, row in enumerate(rows, start=2):
                try:
                    d.append(float(row[0]))
                    s.append(float(row[1]))
                except (IndexError, ValueError) as exc:
                    raise _doc_error(args.input, exc, lineno) from None
        fit = fit_noise_quadratic(d, s)
        write_csv(args.out, ["depth_mm", "sigma_mm", "fitted_sigma_mm"],
                  [[a, b, float(fit.model.sigma(a))] for a, b in zip(d, s)])
        write_json(args.summary, {"model": fit.model.to_dict(), "r_squared": fit.r_squared})
        return 0
    model = _noise_model(args)
    cfg = NoiseProtocolConfig(n_depths=args.depths, frames=args.frames, board_mm=args.board_mm,
                              tilt_deg=args.tilt_deg, quantize=not args.no_quantize)
    mapper, ex = _mapper(args.jobs)
    try:
        res = noise_characterization(model, cfg, args.seed, mapper)
    finally:
        if ex:
            ex.shutdown()
    write_csv(args.out, ["depth_mm", "sigma_mm", "model_sigma_mm", "rms_point_to_plane_mm",
                         "n_points", "ad_statistic", "ad_reject"],
              [[s.depth, s.sigma, float(model.sigma(s.depth)), s.rms_point_to_plane, s.n_points,
                s.ad_statistic, s.ad_reject] for s in res.stations])
    write_json(args.summary, {"model": res.fit.model.to_dict(), "true_model": model.to_dict(),
                              "r_squared": res.fit.r_squared,
                              "ad_non_reject_rate": res.ad_non_reject_rate})
    return 0


def _graph_from(path):
    doc = _read_json(_require(path))
    g = FrameGraph()
    try:
        for e in doc["edges"]:
            g.set_edge(str(e["child"]), str(e["parent"]), RigidTransform.from_dict(e["transform"]),
                       float(e.get("timestamp", 0.0)))
        camera = str(doc.get("camera_frame", "camera"))
    except (KeyError, TypeError, ValueError) as exc:
        raise _doc_error(path, exc) from None
    return g, camera


def _pose_log(path):
    poses = {}
    with open(_require(path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                poses.setdefault(d["tool"], []).append(
                    (float(d["timestamp"]), RigidTransform.from_dict(d["pose"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise _doc_error(path, exc, lineno) from None
    return poses


def cmd_score_trajectories(args):
    doc = _read_json(_require(args.input))
    graph, camera = (_graph_from(args.graph) if args.graph else (None, "camera"))
    poses = _pose_log(args.poses) if args.poses else {}
    rows = []
    try:
        items = doc["trajectories"]
    except (KeyError, TypeError) as exc:
        raise _doc_error(args.input, exc) from None
    for i, item in enumerate(items):
        try:
            planned = Trajectory.from_dict(item["planned"], normalize=True)
            ex = item["executed"]
            if "tool" in ex:
                if graph is None or ex["tool"] not in poses:
                    raise KeyError(f"executed trajectory {i} needs --poses and --graph")
                t_ex = float(ex.get("timestamp", math.inf))
                hist = [p for p in poses[ex["tool"]] if p[0] <= t_ex]
                if not hist:
                    raise KeyError(f"no pose of {ex['tool']!r} at or before t={t_ex}")
                ts, pose = hist[-1]
                g = graph
                g.set_edge(ex["tool"], camera, pose, ts)
                frame = item.get("frame", camera)
                T = chain_pose(g, g.path(ex["tool"], frame), ts)
                executed = Trajectory.from_dict(ex["local"], normalize=True).transformed(T)
            else:
                executed = Trajectory.from_dict(ex, normalize=True)
        except DegenerateGeometry:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise _doc_error(args.input, exc) from None
        trans, ang = trajectory_error(planned, executed)
        rows.append([i, trans, ang])
    write_csv(args.out, ["index", "translation_mm", "angle_deg"], rows)
    return 0


# -- parser ------------------------------------------------------------------------

def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonneg_int, default=0,
                        help="run seed; all randomness derives from it (default 0)")
    common.add_argument("--jobs", type=_pos_int, default=1,
                        help="worker processes; results do not depend on it (default 1)")

    det = argparse.ArgumentParser(add_help=False)
    det.add_argument("--threshold", type=float, default=500.0, help="reflectivity threshold")
    det.add_argument("--depth-mode", choices=("sphere_fit", "median", "central"),
                     default="sphere_fit", help="marker depth estimate (default sphere_fit)")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--noise", metavar="JSON", help="noise model {a, b, c, valid_range}")

    p = argparse.ArgumentParser(
        prog="irtrack", description="Infrared retro-reflective tool tracking and its evaluation.",
        epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name, fn, help, parents=()):
        sp = sub.add_parser(name, help=help, description=help, epilog=EXIT_CODES,
                            parents=[common, *parents],
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=fn)
        return sp

    s = add("simulate", cmd_simulate, "render noisy AHF frames of a scene", [noise])
    s.add_argument("--scene", required=True, help="scene JSON")
    s.add_argument("--frames", type=_pos_int, default=100)
    s.add_argument("--out", required=True, help="output directory")

    s = add("detect", cmd_detect, "detect markers in AHF frame(s); JSON out", [det])
    s.add_argument("--in", dest="input", required=True, help="AHF file or directory")
    s.add_argument("--out", default="-")

    s = add("define-tool", cmd_define_tool, "build a tool definition from many frames", [det])
    s.add_argument("--in", dest="input", required=True,
                   help="AHF directory/file, or JSON-lines of marker sets in mm")
    s.add_argument("--name", required=True)
    s.add_argument("--t-side", type=float, default=1.0, help="side gate, mm (default 1)")
    s.add_argument("--radius", type=float, default=5.75, help="marker radius, mm")
    s.add_argument("--min-frames", type=_pos_int, default=10)
    s.add_argument("--out", default="-")

    s = add("validate-tools", cmd_validate_tools, "check a tool set for ambiguous sides")
    s.add_argument("--tools", nargs="+", required=True)
    s.add_argument("--t-side", type=float, default=1.0, help="side gate, mm (default 1)")
    s.add_argument("--out", default="-")

    s = add("track", cmd_track, "track tools through AHF frames; JSON-lines pose log out",
            [det, noise])
    s.add_argument("--tools", nargs="+", required=True)
    s.add_argument("--in", dest="input", required=True, help="AHF file, stream or directory")
    s.add_argument("--out", default="-")
    s.add_argument("--no-kalman", action="store_true", help="disable depth filtering")
    s.add_argument("--t-side", type=float, default=None, help="fixed side gate, mm")
    s.add_argument("--confidence", type=float, default=2.0,
                   help="gate width in standard deviations (default 2)")
    s.add_argument("--max-missed", type=_nonneg_int, default=1,
                   help="missed frames before a tool's filters reset (default 1)")
    s.add_argument("--process-noise", type=float, default=1.0, help="mm^2 per frame")

    s = add("accuracy", cmd_accuracy, "relative-motion accuracy with and without filtering",
            [noise])
    s.add_argument("--reps", type=_pos_int, default=20)
    s.add_argument("--frames", type=_pos_int, default=100)
    s.add_argument("--pairs", type=_pos_int, default=10000)
    s.add_argument("--depth", type=float, default=600.0, help="mm")
    s.add_argument("--conditions", type=int, nargs="*",
                   help="condition indices 0-5: x1, x20, z1, z20, rot10, rot50")
    s.add_argument("--out", default="-", help="CSV")
    s.add_argument("--summary", help="JSON summary path")

    s = add("sweep", cmd_sweep, "workspace sweep along depth (z) or laterally (x)", [noise])
    s.add_argument("--axis", choices=("z", "x"), default="z")
    s.add_argument("--frames", type=_pos_int, default=50)
    s.add_argument("--start", type=float, help="mm (z only)")
    s.add_argument("--stop", type=float, help="mm")
    s.add_argument("--step", type=float, default=10.0, help="mm")
    s.add_argument("--depth", type=float, default=500.0, help="lateral sweep depth, mm")
    s.add_argument("--noiseless", action="store_true")
    s.add_argument("--out", default="-", help="CSV")
    s.add_argument("--summary", help="JSON summary path")

    s = add("bench", cmd_bench, "per-frame tracking cost; timing columns are wall-clock")
    s.add_argument("--frames", type=_pos_int, default=10000)
    s.add_argument("--max-tools", type=_pos_int, default=5)
    s.add_argument("--full-only", action="store_true", help="only loaded == visible")
    s.add_argument("--stray", type=_nonneg_int, default=0, help="stray detections per frame")
    s.add_argument("--out", default="-", help="CSV")
    s.add_argument("--summary", help="JSON summary path")

    s = add("latency", cmd_latency, "delay between two motion traces")
    s.add_argument("--reference", help="CSV t_s,x_mm")
    s.add_argument("--test", help="CSV t_s,x_mm")
    s.add_argument("--t-mov", type=float, default=1.0, help="largest delay searched, s")
    s.add_argument("--delays", type=float, nargs="+", default=[0.0, 0.05, 0.103, 0.4],
                   help="synthetic delays, s (used without --reference)")
    s.add_argument("--rate", type=float, default=100.0, help="synthetic sample rate, Hz")
    s.add_argument("--noise", type=float, default=0.1, help="synthetic trace noise, mm")
    s.add_argument("--out", default="-", help="CSV")
    s.add_argument("--summary", help="JSON summary path")

    s = add("noise-fit", cmd_noise_fit, "static-plane noise protocol and sigma(d) fit", [noise])
    s.add_argument("--in", dest="input", help="CSV depth_mm,sigma_mm to fit instead of simulating")
    s.add_argument("--depths", type=_pos_int, default=48)
    s.add_argument("--frames", type=_pos_int, default=300)
    s.add_argument("--board-mm", type=float, default=80.0)
    s.add_argument("--tilt-deg", type=float, default=20.0)
    s.add_argument("--no-quantize", action="store_true")
    s.add_argument("--out", default="-", help="CSV")
    s.add_argument("--summary", help="JSON summary path")

    s = add("score-trajectories", cmd_score_trajectories,
            "translation and angle errors of executed against planned trajectories")
    s.add_argument("--in", dest="input", required=True, help="trajectories JSON")
    s.add_argument("--poses", help="JSON-lines pose log from 'track'")
    s.add_argument("--graph", help="static frame graph JSON")
    s.add_argument("--out", default="-", help="CSV")
    return p


def _error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _error("FileNotFound", f"{exc.filename or exc}", 2)
    except IrtrackError as exc:
        return _error(type(exc).__name__, str(exc), exc.exit_code)


def dispatch(argv) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
