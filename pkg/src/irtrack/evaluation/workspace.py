"""Workspace sweeps: displacement error along an axis and the lateral field of view."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..tracking import Tracker, TrackerConfig
from .pipeline import SimulationConfig, detect_static, track_poses
from .scenes import facing_pose, reference_tool


@dataclass(frozen=True)
class SweepConfig:
    frames: int = 50
    warmup: int = 5
    kalman: bool = True
    sim: SimulationConfig = field(default_factory=SimulationConfig)


@dataclass
class SweepStation:
    commanded: np.ndarray  # tool position, mm
    n_tracked: int
    mean_position: np.ndarray = None
    displacement: float = math.nan  # measured, along the fitted sweep direction
    commanded_displacement: float = math.nan
    error: float = math.nan
    outer_marker: np.ndarray = None  # marker farthest from the optical axis, true position

    @property
    def missing(self):
        return self.n_tracked == 0


@dataclass
class SweepResult:
    stations: list
    direction: np.ndarray

    @property
    def max_abs_error(self):
        errs = [abs(s.error) for s in self.stations if not s.missing]
        return max(errs) if errs else math.nan

    def lateral_fov_deg(self):
        """Full horizontal FoV implied by the outermost marker at the last tracked station."""
        tracked = [s for s in self.stations if not s.missing]
        if not tracked:
            return math.nan
        m = tracked[-1].outer_marker
        return 2.0 * math.degrees(math.atan2(abs(m[0]), m[2]))

    def rows(self):
        for s in self.stations:
            yield {"commanded_x_mm": s.commanded[0], "commanded_y_mm": s.commanded[1],
                   "commanded_z_mm": s.commanded[2], "n_tracked": s.n_tracked,
                   "missing": s.missing, "commanded_displacement_mm": s.commanded_displacement,
                   "measured_displacement_mm": s.displacement, "error_mm": s.error}


def workspace_sweep(positions, cfg: SweepConfig = SweepConfig(), seed: int = 0, tool=None,
                    tilt_deg=0.0) -> SweepResult:
    """Track a static tool at each commanded position in turn.

    The sweep direction is estimated from the first and last tracked
    stations' mean positions; each station's measured displacement is the
    projection of its mean onto that direction, and its error the
    difference from the commanded distance to the first station. Stations
    where the tool is never tracked are kept and flagged missing.
    """
    tool = tool or reference_tool()
    positions = np.asarray(positions, dtype=float)
    stations = []
    for k, p in enumerate(positions):
        pose = facing_pose(p, tilt_deg)
        dets = detect_static(tool, pose, cfg.warmup + cfg.frames, [seed, k], cfg.sim)
        tracker = Tracker([tool], TrackerConfig(noise_model=cfg.sim.noise_model, kalman=cfg.kalman))
        (poses,) = track_poses([tracker], dets, tool.name, skip=cfg.warmup)
        got = [q.translation for q in poses if q is not None]
        markers = pose.apply(tool.markers)
        outer = markers[np.argmax(np.abs(markers[:, 0]))]
        st = SweepStation(p, len(got), outer_marker=outer)
        if got:
            st.mean_position = np.mean(got, axis=0)
        stations.append(st)
    tracked = [s for s in stations if not s.missing]
    direction = np.full(3, math.nan)
    if len(tracked) >= 2:
        first, last = tracked[0], tracked[-1]
        v = last.mean_position - first.mean_position
        direction = v / np.linalg.norm(v)
        for s in tracked:
            s.displacement = float((s.mean_position - first.mean_position) @ direction)
            s.commanded_displacement = float(np.linalg.norm(s.commanded - first.commanded))
            s.error = s.displacement - s.commanded_displacement
    return SweepResult(stations, direction)


def depth_positions(start=250.0, stop=750.0, step=10.0):
    z = np.arange(start, stop + step / 2, step)
    return np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)


def lateral_positions(depth=500.0, stop=600.0, step=5.0):
    x = np.arange(0.0, stop + step / 2, step)
    return np.stack([x, np.zeros_like(x), np.full_like(x, depth)], axis=1)
