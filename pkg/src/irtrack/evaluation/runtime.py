"""Per-frame recognition and pose cost against the number of tools."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..detection import DetectedMarker
from ..geometry import RigidTransform, rotation_about
from ..sensor import NoiseModel
from ..tracking import Tracker, TrackerConfig
from .scenes import FACING, tool_library


@dataclass
class BenchResult:
    n_loaded: int
    n_visible: int
    frames: int
    mean_ms: float
    p95_ms: float
    hz: float
    found_fraction: float  # visible tools recovered per frame, averaged

    def to_dict(self):
        return dict(self.__dict__)


def synthetic_detections(tools, rng, model: NoiseModel = NoiseModel(), n_stray=0):
    """Noisy detections of ``tools`` placed side by side, shuffled, plus stray markers."""
    dets = []
    n = len(tools)
    for i, tool in enumerate(tools):
        x = (i - (n - 1) / 2) * 140.0
        pos = np.array([x, rng.uniform(-60, 60), rng.uniform(450, 700)])
        R = rotation_about(rng.normal(size=3), math.radians(rng.uniform(0, 20))) @ FACING
        for c in RigidTransform(R, pos).apply(tool.markers):
            dets.append(_noisy(c, tool.marker_radius, model, rng))
    for _ in range(n_stray):
        c = np.array([rng.uniform(-300, 300), rng.uniform(-200, 200), rng.uniform(400, 800)])
        dets.append(_noisy(c, 5.75, model, rng))
    order = rng.permutation(len(dets))
    return [dets[i] for i in order]


def _noisy(center, r, model, rng):
    """Marker with Gaussian depth error along its ray."""
    m = DetectedMarker.from_center(center, r)
    depth = m.depth + rng.normal() * float(model.sigma(m.depth))
    return DetectedMarker(m.at_depth(depth), m.ray, depth, m.radius)


def runtime_bench(n_loaded: int, n_visible: int, frames: int = 10000, seed: int = 0,
                  pool: int = 200, n_stray: int = 0, kalman: bool = True) -> BenchResult:
    """Time ``Tracker.track_frame`` over ``frames`` frames.

    ``pool`` detection sets are generated up front (untimed) and cycled.
    """
    if not 1 <= n_visible <= n_loaded:
        raise ValueError("need 1 <= n_visible <= n_loaded")
    lib = tool_library(n_loaded, seed=seed)
    rng = np.random.default_rng([seed, n_loaded, n_visible])
    model = NoiseModel()
    sets = [synthetic_detections(lib[:n_visible], rng, model, n_stray) for _ in range(pool)]
    tracker = Tracker(lib, TrackerConfig(noise_model=model, kalman=kalman))
    times = np.empty(frames)
    found = 0
    for k in range(frames):
        dets = sets[k % pool]
        t0 = time.perf_counter()
        obs = tracker.track_frame(dets, float(k))
        times[k] = time.perf_counter() - t0
        found += len(obs)
    mean_ms = 1e3 * float(times.mean())
    return BenchResult(n_loaded, n_visible, frames, mean_ms, 1e3 * float(np.percentile(times, 95)),
                       1e3 / mean_ms if mean_ms > 0 else math.inf, found / (frames * n_visible))
