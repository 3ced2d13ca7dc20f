"""Rigid tool definitions."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, MalformedInput


def pairwise_lengths(points) -> np.ndarray:
    """Symmetric table of Euclidean distances between points."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or len(p) < 2:
        raise InvalidArgument("need at least two points")
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


@dataclass(frozen=True, eq=False)
class ToolDefinition:
    """A named marker constellation centred on its markers' mean."""

    name: str
    markers: np.ndarray
    marker_radius: float = 5.75

    def __post_init__(self):
        m = np.array(self.markers, dtype=float)
        if m.ndim != 2 or m.shape[1] != 3 or len(m) < 3:
            raise InvalidArgument(f"tool {self.name!r} needs at least 3 markers of 3 coordinates")
        if not np.all(np.isfinite(m)):
            raise InvalidArgument(f"tool {self.name!r} has non-finite markers")
        if self.marker_radius < 0:
            raise InvalidArgument("marker radius must be non-negative")
        scale = max(1.0, float(np.abs(m).max()))
        if np.linalg.norm(m.sum(axis=0)) > 1e-6 * scale * len(m):
            raise InvalidArgument(f"tool {self.name!r} markers are not centred")
        m = m - m.mean(axis=0)
        m.setflags(write=False)
        L = pairwise_lengths(m)
        L.setflags(write=False)
        object.__setattr__(self, "markers", m)
        object.__setattr__(self, "pairwise_lengths", L)

    @property
    def n_markers(self) -> int:
        return len(self.markers)

    @classmethod
    def from_points(cls, name, points, marker_radius=5.75):
        p = np.asarray(points, dtype=float)
        return cls(name, p - p.mean(axis=0), marker_radius)

    def to_dict(self):
        return {"name": self.name, "marker_radius_mm": self.marker_radius,
                "markers_mm": self.markers.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            pts = np.array(d["markers_mm"], dtype=float)
            # Files store 9 significant digits; re-centre exactly on load.
            return cls.from_points(str(d["name"]), pts, float(d.get("marker_radius_mm", 5.75)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgument):
                raise
            raise InvalidArgument(f"bad tool document: {exc}") from None


def load_tool(path) -> ToolDefinition:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}:{exc.lineno}: {exc.msg}") from None
    try:
        return ToolDefinition.from_dict(doc)
    except InvalidArgument as exc:
        raise MalformedInput(f"{path}:1: {exc}") from None


def shape_distance(T_p, T_q) -> float:
    """RMS distance between corresponding markers of two marker sets."""
    a = np.asarray(T_p, dtype=float)
    b = np.asarray(T_q, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"marker sets differ in shape: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


class DefinitionSession:
    """Marker sets of one tool collected over many frames.

    The first frame becomes the reference. Later frames are admitted only if
    they have the same marker count and their sorted pairwise lengths agree
    with the reference's within ``3 * t_side``, which screens out
    misdetections before any correspondence is attempted.
    """

    def __init__(self, t_side: float = 1.0, frames=None):
        if t_side <= 0:
            raise InvalidArgument("t_side must be positive")
        self.t_side = float(t_side)
        self.frames = []
        self.rejected = 0
        for f in frames or ():
            self.add_frame(f)

    @property
    def reference(self):
        return self.frames[0] if self.frames else None

    def add_frame(self, points) -> bool:
        p = np.array(points, dtype=float).reshape(-1, 3)
        if not self.frames:
            if len(p) < 3:
                raise InvalidArgument("the reference frame needs at least three markers")
            self.frames.append(p)
            return True
        ref = self.frames[0]
        if len(p) != len(ref) or not self._lengths_agree(p, ref):
            self.rejected += 1
            return False
        self.frames.append(p)
        return True

    def _lengths_agree(self, p, ref):
        iu = np.triu_indices(len(ref), 1)
        a = np.sort(pairwise_lengths(p)[iu])
        b = np.sort(pairwise_lengths(ref)[iu])
        return bool(np.all(np.abs(a - b) <= 3.0 * self.t_side))

    def __len__(self):
        return len(self.frames)


def correspond_frames(session: DefinitionSession) -> DefinitionSession:
    """Reorder every frame's markers into the reference frame's order.

    The lowest-loss length-consistent assignment gives a first rigid
    alignment onto the reference; each reference slot then takes its nearest
    aligned marker. Two markers within ``t_side`` of a slot, or a slot left
    without a unique marker, is ambiguous.
    """
    from .errors import AmbiguousCorrespondence
    from .geometry import rigid_register
    from .tracking import find_candidates

    ref = session.reference
    if ref is None:
        return DefinitionSession(session.t_side)
    ref_tool = ToolDefinition.from_points("reference", ref)
    n = len(ref)
    gate = 3.0 * session.t_side
    out = DefinitionSession(session.t_side)
    out.frames.append(ref.copy())
    for idx, frame in enumerate(session.frames[1:], start=1):
        cands = find_candidates(ref_tool, frame, gate, gate)
        if not cands:
            raise AmbiguousCorrespondence(f"frame {idx}: no length-consistent assignment")
        best = min(cands, key=lambda c: (c.loss, c.assignment))
        ordered = frame[list(best.assignment)]
        pose, _ = rigid_register(ordered, ref)
        aligned = pose.apply(frame)
        dist = np.linalg.norm(aligned[None, :, :] - ref[:, None, :], axis=2)  # (slot, marker)
        perm = []
        for slot in range(n):
            close = np.flatnonzero(dist[slot] < session.t_side)
            if len(close) > 1:
                raise AmbiguousCorrespondence(
                    f"frame {idx}: {len(close)} markers within t_side of slot {slot}")
            perm.append(int(np.argmin(dist[slot])))
        if len(set(perm)) != n:
            raise AmbiguousCorrespondence(f"frame {idx}: nearest-neighbour assignment not unique")
        out.frames.append(frame[perm])
    out.rejected = session.rejected
    return out


def _principal_gauge(shape):
    """Rotate a centred shape onto its inertia axes with deterministic signs."""
    w, V = np.linalg.eigh(shape.T @ shape)
    V = V[:, ::-1]  # largest spread first
    proj = shape @ V
    for k in range(2):
        skew = np.sum(proj[:, k] ** 3)
        if abs(skew) > 1e-9 * max(1.0, np.sum(np.abs(proj[:, k]) ** 3)):
            flip = skew < 0
        else:
            nz = np.flatnonzero(np.abs(proj[:, k]) > 1e-9)
            flip = bool(len(nz)) and proj[nz[0], k] < 0
        if flip:
            V[:, k] = -V[:, k]
    V[:, 2] = np.cross(V[:, 0], V[:, 1])
    return shape @ V


def definition_objective(shape, frames) -> float:
    """Mean over frames of the RMS marker distance after best rigid alignment."""
    from .geometry import rigid_register
    return float(np.mean([rigid_register(f, shape)[1] for f in frames]))


def define_tool(session: DefinitionSession, name: str, marker_radius: float = 5.75,
                min_frames: int = 10, tol: float = 1e-6, max_iter: int = 100,
                history: list = None) -> ToolDefinition:
    """Consensus marker layout over a corresponded session.

    Minimises the mean (not mean-square) per-frame RMS distance between the
    shape and each rigidly aligned frame. Each iteration aligns every frame
    to the current shape, then replaces the shape by the average of the
    aligned frames weighted by ``1 / rms_i``; this majorise-minimise step
    never increases the objective. The result is centred and put on its
    principal axes. ``history``, if given, collects the objective per
    iteration.
    """
    from .errors import DefinitionFailed
    from .geometry import rigid_register

    frames = [np.asarray(f, dtype=float) for f in session.frames]
    if len(frames) < min_frames:
        raise InvalidArgument(f"need at least {min_frames} frames, got {len(frames)}")
    shape = frames[0] - frames[0].mean(axis=0)
    scale = max(1.0, float(np.abs(shape).max()))
    change = np.inf
    for it in range(max_iter):
        aligned, rms = [], []
        for f in frames:
            pose, e = rigid_register(f, shape)
            aligned.append(pose.apply(f))
            rms.append(e)
        rms = np.array(rms)
        if history is not None:
            history.append(float(rms.mean()))
        if it == 0:
            # The start shape *is* frame 0; a 1/rms weight would pin it there.
            w = np.ones(len(frames))
        else:
            w = 1.0 / np.maximum(rms, max(1e-12 * scale, 1e-6 * float(np.median(rms))))
        new = np.tensordot(w / w.sum(), np.array(aligned), axes=1)
        new -= new.mean(axis=0)
        change = float(np.sqrt(np.mean(np.sum((new - shape) ** 2, axis=1))))
        shape = new
        if change < tol:
            break
    else:
        if history is not None:
            history.append(definition_objective(shape, frames))
        raise DefinitionFailed(
            f"tool {name!r}: shape still moving by {change:.3g} mm after {max_iter} iterations",
            residual=definition_objective(shape, frames))
    if history is not None:
        history.append(definition_objective(shape, frames))
    return ToolDefinition(name, _principal_gauge(shape), marker_radius)


@dataclass
class DistinctnessReport:
    self_ambiguous: list  # [(tool, (i, j), (k, l), length difference)]
    confusable: list  # [(tool_a, tool_b, max elementwise length difference)]

    @property
    def clean(self) -> bool:
        return not self.self_ambiguous and not self.confusable

    def to_dict(self):
        return {
            "clean": self.clean,
            "self_ambiguous": [{"tool": t, "side_a": list(a), "side_b": list(b), "diff_mm": d}
                               for t, a, b, d in self.self_ambiguous],
            "confusable": [{"tool_a": a, "tool_b": b, "max_diff_mm": d}
                           for a, b, d in self.confusable],
        }


def validate_distinctness(tools, t_side: float) -> DistinctnessReport:
    """Flag tools a length-gated matcher could mix up.

    A tool is self-ambiguous when two of its own sides differ by less than
    ``2 * t_side``; two tools with the same marker count are confusable when
    their sorted side lengths all agree within ``2 * t_side``.
    """
    if t_side <= 0:
        raise InvalidArgument("t_side must be positive")
    gap = 2.0 * t_side
    self_amb, conf = [], []
    sorted_lengths = {}
    for tool in tools:
        n = tool.n_markers
        sides = [(i, j) for i in range(n) for j in range(i + 1, n)]
        L = tool.pairwise_lengths
        for a in range(len(sides)):
            for b in range(a + 1, len(sides)):
                diff = abs(L[sides[a]] - L[sides[b]])
                if diff < gap:
                    self_amb.append((tool.name, sides[a], sides[b], float(diff)))
        sorted_lengths[tool.name] = np.sort(L[np.triu_indices(n, 1)])
    for a in range(len(tools)):
        for b in range(a + 1, len(tools)):
            la, lb = sorted_lengths[tools[a].name], sorted_lengths[tools[b].name]
            if la.shape != lb.shape:
                continue
            worst = float(np.max(np.abs(la - lb)))
            if worst < gap:
                conf.append((tools[a].name, tools[b].name, worst))
    return DistinctnessReport(self_amb, conf)
