"""Frame graphs, display registration, pivot calibration and trajectory scoring.

Transforms follow the ``T_child^parent`` convention: an edge ``(a, b)``
carries the pose of frame ``a`` expressed in frame ``b``, i.e. it maps
``a``-coordinates to ``b``-coordinates.
"""
from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePivot, InvalidArgument, PathNotFound
from .geometry import RigidTransform, compose, invert

UNIT_TOL = 1e-9


class FrameGraph:
    """Named frames joined by time-stamped rigid transforms.

    Each edge keeps its history; a query at time ``t`` uses, per hop, the
    latest sample at or before ``t`` (no interpolation). Writers are
    serialised by a lock; readers see a consistent snapshot of each edge.
    """

    def __init__(self):
        self._edges = {}  # (a, b) -> (timestamps list, transforms list)
        self._lock = threading.Lock()

    def set_edge(self, child: str, parent: str, transform: RigidTransform,
                 timestamp: float = 0.0):
        with self._lock:
            times, values = self._edges.setdefault((child, parent), ([], []))
            i = bisect.bisect_right(times, timestamp)
            if i and times[i - 1] == timestamp:
                values[i - 1] = transform
            else:
                times.insert(i, timestamp)
                values.insert(i, transform)

    def edge(self, a: str, b: str, t: float = math.inf):
        """Transform from ``a`` to ``b`` at time ``t``, inverting a stored ``(b, a)``."""
        for key, inverse in (((a, b), False), ((b, a), True)):
            entry = self._edges.get(key)
            if entry is None:
                continue
            times, values = entry
            i = bisect.bisect_right(times, t)
            if i == 0:
                continue
            return invert(values[i - 1]) if inverse else values[i - 1]
        raise PathNotFound(f"no transform between {a!r} and {b!r} at t={t}")

    def frames(self):
        return sorted({f for key in self._edges for f in key})

    def path(self, a: str, b: str):
        """Shortest hop sequence from ``a`` to ``b`` (breadth first, names sorted)."""
        nbrs = {}
        for x, y in self._edges:
            nbrs.setdefault(x, set()).add(y)
            nbrs.setdefault(y, set()).add(x)
        prev = {a: None}
        queue = [a]
        for cur in queue:
            if cur == b:
                out = []
                while cur is not None:
                    out.append(cur)
                    cur = prev[cur]
                return out[::-1]
            for n in sorted(nbrs.get(cur, ())):
                if n not in prev:
                    prev[n] = cur
                    queue.append(n)
        raise PathNotFound(f"no chain of transforms from {a!r} to {b!r}")


def chain_pose(graph: FrameGraph, path, t: float = math.inf) -> RigidTransform:
    """Compose hops ``path[0] -> path[1] -> ... -> path[-1]``.

    The result maps ``path[0]`` coordinates into ``path[-1]``; for example
    ``["I", "S_P", "A", "H", "W"]`` yields ``T_H^W T_A^H T_SP^A T_I^SP``.
    """
    if len(path) < 1:
        raise InvalidArgument("path must name at least one frame")
    out = RigidTransform.identity()
    for a, b in zip(path[:-1], path[1:]):
        out = compose(graph.edge(a, b, t), out)
    return out


def solve_display_registration(T_H_W: RigidTransform, T_M_W: RigidTransform,
                               T_SM_A: RigidTransform) -> RigidTransform:
    """Camera-to-display transform from a manually aligned virtual replica.

    ``T_H_W`` is the headset's self-localisation, ``T_M_W`` the aligned
    virtual model in world space and ``T_SM_A`` the tracked registration
    tool in camera space.
    """
    return compose(compose(invert(T_H_W), T_M_W), invert(T_SM_A))


def pivot_calibrate(poses):
    """Tip offset (tool frame) and pivot point (camera frame) from pivoting poses.

    Solves ``R_i p_tip - p_pivot = -t_i`` for all poses in the least-squares
    sense. Returns ``(tip, pivot, rms)``.
    """
    poses = list(poses)
    if len(poses) < 3:
        raise DegeneratePivot("need at least three poses")
    A = np.zeros((3 * len(poses), 6))
    b = np.zeros(3 * len(poses))
    for i, p in enumerate(poses):
        A[3 * i:3 * i + 3, :3] = p.rotation
        A[3 * i:3 * i + 3, 3:] = -np.eye(3)
        b[3 * i:3 * i + 3] = -p.translation
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-6 * sv[0]:
        raise DegeneratePivot("poses do not rotate about enough axes to fix the tip")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = (A @ x - b).reshape(-1, 3)
    rms = float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))
    return x[:3], x[3:], rms


@dataclass(frozen=True)
class Trajectory:
    entry: tuple
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise InvalidArgument(f"trajectory direction must be a unit 3-vector, got {self.direction}")

    def transformed(self, T: RigidTransform) -> "Trajectory":
        d = T.rotation @ np.asarray(self.direction, dtype=float)
        return Trajectory(tuple(T.apply(np.asarray(self.entry, dtype=float))),
                          tuple(d / np.linalg.norm(d)))

    def to_dict(self):
        return {"entry": list(self.entry), "direction": list(self.direction)}

    @classmethod
    def from_dict(cls, d, normalize=False):
        direction = np.asarray(d["direction"], dtype=float)
        if normalize:
            direction = direction / np.linalg.norm(direction)
        return cls(tuple(float(v) for v in d["entry"]), tuple(direction.tolist()))


def trajectory_error(planned: Trajectory, executed: Trajectory):
    """Lateral entry offset (mm) and axis angle (degrees) between two trajectories.

    The offset is the executed entry point's distance from the planned axis
    line. Directions are first made to point the same way.
    """
    p = np.asarray(planned.direction, dtype=float)
    e = np.asarray(executed.direction, dtype=float)
    for d in (p, e):
        if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise InvalidArgument("trajectory directions must be unit vectors")
    if p @ e < 0:
        e = -e
    angle = math.degrees(math.atan2(np.linalg.norm(np.cross(p, e)), float(p @ e)))
    delta = np.asarray(executed.entry, dtype=float) - np.asarray(planned.entry, dtype=float)
    lateral = delta - (delta @ p) * p
    return float(np.linalg.norm(lateral)), angle
