"""Relative-motion accuracy: how well a known displacement is reproduced."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument
from ..geometry import RigidTransform, random_rotation, rotation_about, rotation_angle
from ..tracking import Tracker, TrackerConfig
from .pipeline import SimulationConfig, detect_static, track_poses
from .scenes import facing_pose, reference_tool

CONDITIONS = [("x", 1.0), ("x", 20.0), ("z", 1.0), ("z", 20.0), ("rot", 10.0), ("rot", 50.0)]

_AXES = {"x": np.array([1.0, 0.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}
UP = np.array([0.0, 1.0, 0.0])  # rotation axis through the tool centre


@dataclass(frozen=True)
class AccuracyConfig:
    depth: float = 600.0
    frames: int = 100
    warmup: int = 10
    reps: int = 20
    pairs: int = 10000
    jitter_deg: float = 10.0  # random base orientation spread per repetition
    jitter_mm: float = 30.0
    sim: SimulationConfig = field(default_factory=SimulationConfig)
    process_noise: float = 1.0


@dataclass
class AccuracyReport:
    axis: str
    magnitude: float
    kalman: bool
    median: float  # mm or degrees
    iqr: float
    n_pairs: int
    lost_frames: int

    def to_dict(self):
        return {"axis": self.axis, "magnitude": self.magnitude, "kalman": self.kalman,
                "median_error": self.median, "iqr": self.iqr, "n_pairs": self.n_pairs,
                "lost_frames": self.lost_frames}


def _base_pose(cfg, rng):
    jitter = rotation_about(random_rotation(rng)[:, 0], math.radians(rng.uniform(0, cfg.jitter_deg)))
    pose = facing_pose((0.0, 0.0, cfg.depth))
    t = pose.translation + rng.uniform(-cfg.jitter_mm, cfg.jitter_mm, 3)
    return RigidTransform(jitter @ pose.rotation, t)


def _moved(pose, axis, magnitude):
    if axis == "rot":
        R = rotation_about(UP, math.radians(magnitude))
        return RigidTransform(R @ pose.rotation, pose.translation)
    return RigidTransform(pose.rotation, pose.translation + magnitude * _AXES[axis])


def _displacement(axis, a, b):
    if axis == "rot":
        return math.degrees(rotation_angle(a.rotation.T @ b.rotation))
    return float((b.translation - a.translation) @ _AXES[axis])


def accuracy_experiment(axis: str, magnitude: float, cfg: AccuracyConfig = AccuracyConfig(),
                        seed: int = 0, tool=None):
    """Reports with and without depth filtering for one displacement condition.

    Each repetition draws a base pose, images it and the displaced pose for
    ``frames`` frames each (after ``warmup`` frames), and compares the
    measured displacement of random pose pairs with the commanded one. Both
    trackers see the same detections. Returns ``{True: report, False: report}``
    keyed by whether the filter was on.
    """
    if axis not in ("x", "z", "rot"):
        raise InvalidArgument(f"unknown axis {axis!r}")
    tool = tool or reference_tool()
    cond = CONDITIONS.index((axis, magnitude)) if (axis, magnitude) in CONDITIONS else 99
    errors = {True: [], False: []}
    lost = {True: 0, False: 0}
    n_rec = cfg.frames
    for rep in range(cfg.reps):
        rng = np.random.default_rng([seed, cond, rep])
        a = _base_pose(cfg, rng)
        b = _moved(a, axis, magnitude)
        recorded = {}
        for tag, pose in ((0, a), (1, b)):
            dets = detect_static(tool, pose, cfg.warmup + n_rec, [seed, cond, rep, tag], cfg.sim)
            trackers = [Tracker([tool], TrackerConfig(noise_model=cfg.sim.noise_model, kalman=k,
                                                      process_noise=cfg.process_noise))
                        for k in (True, False)]
            kal, raw = track_poses(trackers, dets, tool.name, skip=cfg.warmup)
            recorded[tag] = {True: kal, False: raw}
        ia = rng.integers(0, n_rec, cfg.pairs)
        ib = rng.integers(0, n_rec, cfg.pairs)
        for k in (True, False):
            pa, pb = recorded[0][k], recorded[1][k]
            lost[k] += sum(p is None for p in pa) + sum(p is None for p in pb)
            for i, j in zip(ia, ib):
                if pa[i] is None or pb[j] is None:
                    continue
                errors[k].append(_displacement(axis, pa[i], pb[j]) - magnitude)
    out = {}
    for k in (True, False):
        e = np.array(errors[k])
        if len(e) == 0:
            med = iqr = math.nan
        else:
            q1, med, q3 = np.percentile(e, [25, 50, 75])
            iqr = q3 - q1
        out[k] = AccuracyReport(axis, magnitude, k, float(med), float(iqr), len(e), lost[k])
    return out


def _condition_job(args):
    (axis, magnitude), cfg, seed = args
    return accuracy_experiment(axis, magnitude, cfg, seed)


def accuracy_table(cfg: AccuracyConfig = AccuracyConfig(), seed: int = 0, conditions=CONDITIONS,
                   mapper=map):
    """One ``{kalman: report}`` dict per condition, in ``conditions`` order."""
    return list(mapper(_condition_job, [(c, cfg, seed) for c in conditions]))
