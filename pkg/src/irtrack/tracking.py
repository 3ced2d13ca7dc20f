"""Multi-tool recognition and pose tracking.

Per frame: gate candidate marker subsets against every loaded tool's
pairwise-length table with a depth-first search, keep the best
non-conflicting solutions, smooth each matched marker's depth with its own
scalar Kalman filter and solve the tool pose by SVD registration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detection import DetectedMarker
from .errors import InvalidArgument
from .geometry import RigidTransform, rigid_register
from .sensor import NoiseModel
from .tools import ToolDefinition, pairwise_lengths

log = logging.getLogger(__name__)

# Threshold of zero means "exact match"; allow for floating-point round-off.
EXACT_TOL = 1e-9
QUANTIZATION_VAR = 1.0 / 12.0


@dataclass(frozen=True)
class TrackerConfig:
    noise_model: NoiseModel = field(default_factory=NoiseModel)
    t_side: Optional[float] = None
    confidence: float = 2.0
    max_missed: int = 1
    process_noise: float = 1.0  # mm^2 per frame
    kalman: bool = True

    def __post_init__(self):
        if self.confidence <= 0:
            raise InvalidArgument("confidence factor must be positive")
        if self.t_side is not None and self.t_side < 0:
            raise InvalidArgument("t_side must be non-negative")
        if self.max_missed < 0:
            raise InvalidArgument("max_missed must be non-negative")


@dataclass
class MatchCandidate:
    tool: ToolDefinition
    assignment: tuple  # detection index per tool marker slot
    loss: float

    @property
    def detection_set(self):
        return frozenset(self.assignment)


@dataclass
class ToolObservation:
    tool: str
    pose: RigidTransform  # tool frame -> camera frame
    loss: float
    marker_depths: list
    timestamp: float
    assignment: tuple = ()

    def to_dict(self):
        return {"tool": self.tool, "timestamp": self.timestamp, "loss_mm": self.loss,
                "pose": self.pose.to_dict(), "marker_depths_mm": list(self.marker_depths),
                "detections": list(self.assignment)}


def thresholds(model: NoiseModel, depth: float, n_markers: int, cfg: TrackerConfig = None):
    """Per-side and whole-shape gates ``(t_side, t_shape)`` at a viewing depth.

    A side's length error combines two independent position errors, hence
    ``sqrt(2) * sigma``; ``cfg.confidence`` standard deviations of that give
    the side gate, and the shape gate divides by ``sqrt(N (N - 1))``.
    """
    cfg = cfg or TrackerConfig(noise_model=model)
    if n_markers < 3:
        raise InvalidArgument("tools need at least three markers")
    if cfg.t_side is not None:
        t_side = float(cfg.t_side)
    else:
        lo, hi = model.valid_range
        if not lo <= depth <= hi:
            log.debug("threshold depth %.1f mm clamped to [%g, %g]", depth, lo, hi)
            depth = min(max(depth, lo), hi)
        sigma_p = model.a + model.b * depth + model.c * depth * depth
        t_side = cfg.confidence * math.sqrt(2.0) * sigma_p
    return t_side, t_side / math.sqrt(n_markers * (n_markers - 1))


def match_loss(tool: ToolDefinition, points) -> float:
    """Mean absolute side-length mismatch, normalized by ``N (N - 1)``."""
    pts = np.asarray(points, dtype=float)
    if len(pts) != tool.n_markers:
        raise InvalidArgument("candidate and tool marker counts differ")
    Ld = tool.pairwise_lengths.tolist()
    Lp = pairwise_lengths(pts).tolist()
    n = tool.n_markers
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += abs(Ld[i][j] - Lp[i][j])
    return total / (n * (n - 1))


def _as_points(detections):
    if len(detections) and isinstance(detections[0], DetectedMarker):
        return np.array([d.position for d in detections], dtype=float)
    return np.asarray(detections, dtype=float).reshape(-1, 3)


def slot_order(tool: ToolDefinition):
    """Slots by descending total incident length, so the most constraining go first."""
    sums = tool.pairwise_lengths.sum(axis=1)
    return sorted(range(tool.n_markers), key=lambda i: (-sums[i], i))


def find_candidates(tool: ToolDefinition, detections, t_side: float, t_shape: float):
    """Every ordered assignment of distinct detections to tool slots passing both gates.

    A partial assignment is extended only if the new detection's distances to
    the already-placed ones all differ from the tool's by less than
    ``t_side``. Complete assignments must also have loss below ``t_shape``.
    A zero threshold accepts exact matches only.
    """
    pts = _as_points(detections)
    n, m = tool.n_markers, len(pts)
    if m < n:
        return []
    Ld = tool.pairwise_lengths.tolist()
    Lp = pairwise_lengths(pts).tolist() if m >= 2 else [[0.0]]
    side_lim = t_side if t_side > 0 else EXACT_TOL
    side_strict = t_side > 0
    shape_lim = t_shape if t_shape > 0 else EXACT_TOL
    shape_strict = t_shape > 0
    norm = n * (n - 1)
    order = slot_order(tool)
    assign = [-1] * n
    used = [False] * m
    out = []

    def side_ok(beta):
        return beta < side_lim if side_strict else beta <= side_lim

    def dfs(k):
        if k == n:
            total = 0.0
            for i in range(n):
                Li, Pi = Ld[i], Lp[assign[i]]
                for j in range(i + 1, n):
                    total += abs(Li[j] - Pi[assign[j]])
            loss = total / norm
            if (loss < shape_lim) if shape_strict else (loss <= shape_lim):
                out.append(MatchCandidate(tool, tuple(assign), loss))
            return
        s = order[k]
        Ls = Ld[s]
        for j in range(m):
            if used[j]:
                continue
            Pj = Lp[j]
            for kk in range(k):
                s2 = order[kk]
                if not side_ok(abs(Ls[s2] - Pj[assign[s2]])):
                    break
            else:
                assign[s] = j
                used[j] = True
                dfs(k + 1)
                used[j] = False
                assign[s] = -1

    dfs(0)
    return out


def resolve(candidates):
    """Pick a conflict-free set of solutions, lowest loss first.

    Orderings of the same detections for the same tool collapse to the
    lowest-loss one; then candidates are accepted greedily by loss as long
    as their tool is not yet found and none of their detections is taken.
    """
    best = {}
    for c in candidates:
        key = (c.tool.name, c.detection_set)
        cur = best.get(key)
        if cur is None or (c.loss, c.assignment) < (cur.loss, cur.assignment):
            best[key] = c
    ranked = sorted(best.values(),
                    key=lambda c: (c.loss, c.tool.name, tuple(sorted(c.assignment))))
    taken, found, accepted = set(), set(), []
    for c in ranked:
        if c.tool.name in found or taken.intersection(c.assignment):
            continue
        accepted.append(c)
        found.add(c.tool.name)
        taken.update(c.assignment)
    return accepted


def estimate_pose(tool: ToolDefinition, points) -> RigidTransform:
    pose, _ = rigid_register(tool.markers, np.asarray(points, dtype=float))
    return pose


class DepthFilterBank:
    """Independent random-walk Kalman filters on marker depth, keyed by (tool, slot)."""

    def __init__(self, process_noise: float = 1.0):
        self.q = float(process_noise)
        self.state = {}  # (tool, slot) -> [estimate, variance]

    def update(self, tool: str, index: int, measured: float, sigma: float) -> float:
        if sigma <= 0:
            raise InvalidArgument("measurement sigma must be positive")
        r = sigma * sigma
        st = self.state.get((tool, index))
        if st is None:
            self.state[(tool, index)] = [float(measured), r]
            return float(measured)
        var = st[1] + self.q
        gain = var / (var + r)
        st[0] += gain * (measured - st[0])
        st[1] = (1.0 - gain) * var
        return st[0]

    def variance(self, tool, index):
        st = self.state.get((tool, index))
        return None if st is None else st[1]

    def reset(self, tool: Optional[str] = None):
        if tool is None:
            self.state.clear()
        else:
            for key in [k for k in self.state if k[0] == tool]:
                del self.state[key]


def kalman_update(bank: DepthFilterBank, tool: str, index: int, measured: float, sigma: float):
    return bank.update(tool, index, measured, sigma)


class Tracker:
    """Tracking session: loaded tools plus filter and miss-count state."""

    def __init__(self, tools, config: TrackerConfig = None):
        names = [t.name for t in tools]
        if len(set(names)) != len(names):
            raise InvalidArgument("tool names must be unique")
        self.tools = list(tools)
        self.config = config or TrackerConfig()
        self.bank = DepthFilterBank(self.config.process_noise)
        self.missed = {t.name: 0 for t in self.tools}

    def reset(self):
        self.bank.reset()
        self.missed = {t.name: 0 for t in self.tools}

    def measurement_sigma(self, depth):
        s = float(self.config.noise_model.sigma(depth))
        return math.sqrt(s * s + QUANTIZATION_VAR)

    def candidates(self, detections, anchor_depth=None):
        if not detections:
            return []
        cfg = self.config
        if anchor_depth is None:
            anchor_depth = float(np.median([d.depth for d in detections]))
        pts = _as_points(detections)
        cands = []
        for tool in self.tools:
            t_side, t_shape = thresholds(cfg.noise_model, anchor_depth, tool.n_markers, cfg)
            cands.extend(find_candidates(tool, pts, t_side, t_shape))
        return cands

    def track_frame(self, detections, timestamp: float = 0.0):
        cfg = self.config
        accepted = resolve(self.candidates(detections))
        seen = set()
        out = []
        for cand in accepted:
            name = cand.tool.name
            seen.add(name)
            dets = [detections[i] for i in cand.assignment]
            if cfg.kalman:
                depths = [self.bank.update(name, slot, d.depth, self.measurement_sigma(d.depth))
                          for slot, d in enumerate(dets)]
                pts = np.array([d.at_depth(z) for d, z in zip(dets, depths)])
            else:
                depths = [d.depth for d in dets]
                pts = np.array([d.position for d in dets])
            out.append(ToolObservation(name, estimate_pose(cand.tool, pts), cand.loss,
                                       depths, float(timestamp), cand.assignment))
            self.missed[name] = 0
        for name in self.missed:
            if name not in seen:
                self.missed[name] += 1
                if self.missed[name] > cfg.max_missed:
                    self.bank.reset(name)
        return out


def track_frame(tracker: Tracker, detections, timestamp: float = 0.0):
    return tracker.track_frame(detections, timestamp)
