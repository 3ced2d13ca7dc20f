"""Synthetic reflectivity + depth sensor.

Renders what a near-range ToF camera would report for a scene of
retro-reflective spheres, flat reflective clutter and an optional back wall:
a 16-bit reflectivity image and a ray-depth image in integer millimetres
carrying depth-dependent Gaussian noise.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, MalformedInput, RangeError
from .geometry import CameraIntrinsics, RigidTransform, pixel_rays, project_many

MARKER_PEAK = 2200
MARKER_RIM = 520
DEFAULT_BACKGROUND_MAX = 250
MAX_DEPTH_CODE = 1200


@dataclass(frozen=True)
class NoiseModel:
    """Depth standard error ``sigma(d) = a + b*d + c*d**2`` (mm in, mm out).

    The defaults are an assumption chosen to give ~0.47 mm at 500 mm and
    ~1.4 mm at 971 mm; they are not measured values.
    """

    a: float = 0.05
    b: float = 2e-4
    c: float = 1.2e-6
    valid_range: tuple = (156.0, 971.0)

    def __post_init__(self):
        lo, hi = self.valid_range
        if not 0 < lo < hi:
            raise InvalidArgument(f"bad valid range {self.valid_range}")
        # sigma == 0 is allowed: a noiseless sensor.
        d = np.linspace(lo, hi, 64)
        if np.any(self.a + self.b * d + self.c * d * d < 0):
            raise InvalidArgument("noise model is negative inside its valid range")

    def sigma(self, d):
        """Vectorized sigma with the depth clamped into the valid range."""
        lo, hi = self.valid_range
        d = np.clip(d, lo, hi)
        return self.a + self.b * d + self.c * d * d

    @classmethod
    def zero(cls, valid_range=(156.0, 971.0)):
        return cls(0.0, 0.0, 0.0, tuple(valid_range))

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "valid_range": list(self.valid_range)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["b"]), float(d["c"]),
                   tuple(float(x) for x in d.get("valid_range", (156.0, 971.0))))


def eval_sigma(model: NoiseModel, d: float) -> float:
    lo, hi = model.valid_range
    if not lo <= d <= hi:
        raise RangeError(f"depth {d} mm outside noise-model range [{lo}, {hi}]")
    return model.a + model.b * d + model.c * d * d


def marker_pixel_area(intr: CameraIntrinsics, r: float, d: float) -> float:
    """Approximate image area, in px^2, of a sphere of radius ``r`` at distance ``d``."""
    if d <= 0:
        raise InvalidArgument(f"distance must be positive, got {d}")
    if r < 0:
        raise InvalidArgument(f"radius must be non-negative, got {r}")
    return math.pi * r * r / ((intr.s_x / intr.f_x) * (intr.s_y / intr.f_y) * d * d)


@dataclass(frozen=True)
class StrayMarker:
    position: tuple
    radius: float = 5.75


@dataclass(frozen=True)
class Distractor:
    """Flat reflective patch covering pixel box ``[u0, u1) x [v0, v1)``.

    The patch lies on the plane through ``(0, 0, depth)`` with the given
    normal; the default normal makes it fronto-parallel.
    """

    u0: int
    v0: int
    u1: int
    v1: int
    depth: float
    intensity: int = 1500
    normal: tuple = (0.0, 0.0, 1.0)


@dataclass
class SceneSpec:
    tools: list = field(default_factory=list)  # [(ToolDefinition, RigidTransform)]
    stray_markers: list = field(default_factory=list)
    distractors: list = field(default_factory=list)
    background_reflectivity_max: int = DEFAULT_BACKGROUND_MAX
    background_depth: Optional[float] = None  # z of a fronto-parallel back wall

    def __post_init__(self):
        if not 0 <= self.background_reflectivity_max < MARKER_RIM:
            raise InvalidArgument("background reflectivity must stay below marker rim intensity")

    def spheres(self):
        """All sphere centres (camera frame) and radii in the scene."""
        centers, radii = [], []
        for tool, pose in self.tools:
            pts = pose.apply(tool.markers)
            centers.extend(pts)
            radii.extend([tool.marker_radius] * len(pts))
        for s in self.stray_markers:
            centers.append(np.asarray(s.position, dtype=float))
            radii.append(float(s.radius))
        return np.array(centers, dtype=float).reshape(-1, 3), np.array(radii, dtype=float)


@dataclass
class SensorFrame:
    reflectivity: np.ndarray  # (h, w) uint16
    depth: np.ndarray  # (h, w) uint16 mm, 0 = invalid; float64 when unquantized
    timestamp: float
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if self.reflectivity.shape != self.depth.shape:
            raise InvalidArgument("reflectivity and depth images differ in shape")
        if self.reflectivity.shape != (self.intrinsics.height, self.intrinsics.width):
            raise InvalidArgument("image size disagrees with intrinsics")


def _sphere_bbox(intr, c, r):
    """Pixel bounding box of a sphere's silhouette, or None if off-image."""
    corners = c + r * 1.001 * np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    if np.any(corners[:, 2] <= 1e-6):
        return None
    uv = project_many(intr, corners)
    u0 = max(int(math.floor(uv[:, 0].min())), 0)
    u1 = min(int(math.ceil(uv[:, 0].max())) + 1, intr.width)
    v0 = max(int(math.floor(uv[:, 1].min())), 0)
    v1 = min(int(math.ceil(uv[:, 1].max())) + 1, intr.height)
    if u0 >= u1 or v0 >= v1:
        return None
    return u0, u1, v0, v1


def render_frame(scene: SceneSpec, intr: CameraIntrinsics, model: NoiseModel, seed,
                 timestamp: float = 0.0, quantize: bool = True) -> SensorFrame:
    """Render one noisy frame; identical arguments give an identical frame.

    Sphere depth is the exact first ray/sphere intersection per pixel, so a
    detector has to add the radius back to reach the centre. Reflectivity
    falls from ``MARKER_PEAK`` at the sphere's centre ray to ``MARKER_RIM``
    at its silhouette with a cosine profile. Pixels whose true ray depth is
    beyond the noise model's range get depth 0 (invalid).
    """
    rng = np.random.default_rng(seed)
    h, w = intr.height, intr.width
    rays = pixel_rays(intr)

    refl = rng.integers(0, scene.background_reflectivity_max + 1, size=(h, w), dtype=np.uint16)
    zbuf = np.full((h, w), np.inf)

    if scene.background_depth is not None:
        zbuf[:] = scene.background_depth / rays[..., 2]

    for dis in scene.distractors:
        u0, u1 = max(dis.u0, 0), min(dis.u1, w)
        v0, v1 = max(dis.v0, 0), min(dis.v1, h)
        if u0 >= u1 or v0 >= v1:
            continue
        n = np.asarray(dis.normal, dtype=float)
        n = n / np.linalg.norm(n)
        sub = rays[v0:v1, u0:u1]
        denom = sub @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = dis.depth * n[2] / denom
        t[~(t > 0)] = np.inf
        zs = zbuf[v0:v1, u0:u1]
        closer = t < zs
        zs[closer] = t[closer]
        refl[v0:v1, u0:u1][closer] = dis.intensity

    centers, radii = scene.spheres()
    for c, r in zip(centers, radii):
        box = _sphere_bbox(intr, c, r)
        if box is None:
            continue
        u0, u1, v0, v1 = box
        sub = rays[v0:v1, u0:u1]
        b = sub @ c
        cc = float(c @ c)
        disc = b * b - (cc - r * r)
        hit = (disc >= 0) & (b > 0)
        if not hit.any():
            continue
        t = np.where(hit, b - np.sqrt(np.where(hit, disc, 0.0)), np.inf)
        zs = zbuf[v0:v1, u0:u1]
        closer = t < zs
        if not closer.any():
            continue
        # Normalized angular distance from the centre ray: 0 centre, 1 silhouette.
        alpha = math.asin(min(r / math.sqrt(cc), 1.0))
        cosang = np.clip(b[closer] / math.sqrt(cc), -1.0, 1.0)
        rho = np.clip(np.arccos(cosang) / alpha, 0.0, 1.0) if alpha > 0 else np.zeros(cosang.shape)
        inten = MARKER_RIM + (MARKER_PEAK - MARKER_RIM) * np.cos(rho * math.pi / 2)
        zs[closer] = t[closer]
        refl[v0:v1, u0:u1][closer] = np.round(inten).astype(np.uint16)

    valid = np.isfinite(zbuf) & (zbuf <= model.valid_range[1])
    true_d = zbuf[valid]
    noisy = true_d + rng.standard_normal(true_d.shape) * model.sigma(true_d)
    if quantize:
        depth = np.zeros((h, w), dtype=np.uint16)
        depth[valid] = np.clip(np.rint(noisy), 1, MAX_DEPTH_CODE).astype(np.uint16)
    else:
        depth = np.zeros((h, w), dtype=float)
        depth[valid] = noisy
    return SensorFrame(refl, depth, float(timestamp), intr)


# -- frame container ---------------------------------------------------------

def write_ahf(frame: SensorFrame, fh) -> None:
    """Write a frame as one JSON manifest line followed by two raw u16 images."""
    if frame.depth.dtype != np.uint16:
        raise InvalidArgument("only quantized frames can be stored")
    manifest = {
        "format": "AHF", "version": 1,
        "width": frame.intrinsics.width, "height": frame.intrinsics.height,
        "timestamp": frame.timestamp, "endianness": "little",
        "intrinsics": frame.intrinsics.to_dict(),
    }
    fh.write((json.dumps(manifest, sort_keys=True) + "\n").encode())
    fh.write(frame.reflectivity.astype("<u2").tobytes())
    fh.write(frame.depth.astype("<u2").tobytes())


def read_ahf(fh, name="<stream>") -> SensorFrame:
    line = fh.readline()
    try:
        m = json.loads(line)
        if m.get("format") != "AHF":
            raise ValueError("not an AHF manifest")
        w, h = int(m["width"]), int(m["height"])
        intr = CameraIntrinsics.from_dict(m["intrinsics"])
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedInput(f"{name}:1: bad AHF manifest ({exc})") from None
    dtype = np.dtype(">u2" if m.get("endianness") == "big" else "<u2")
    n = w * h * 2
    raw = fh.read(2 * n)
    if len(raw) != 2 * n:
        raise MalformedInput(f"{name}: truncated image data ({len(raw)} of {2 * n} bytes)")
    refl = np.frombuffer(raw[:n], dtype=dtype).reshape(h, w).astype(np.uint16)
    depth = np.frombuffer(raw[n:], dtype=dtype).reshape(h, w).astype(np.uint16)
    return SensorFrame(refl, depth, float(m["timestamp"]), intr)


def iter_ahf(fh, name="<stream>"):
    """Frames from a stream of concatenated AHF records."""
    if not fh.seekable():
        fh = io.BytesIO(fh.read())
    while True:
        pos = fh.tell()
        if not fh.read(1):
            return
        fh.seek(pos)
        yield read_ahf(fh, name)


def save_frame(frame: SensorFrame, path) -> None:
    with open(path, "wb") as fh:
        write_ahf(frame, fh)


def load_frame(path) -> SensorFrame:
    with open(path, "rb") as fh:
        return read_ahf(fh, str(path))


def frame_bytes(frame: SensorFrame) -> bytes:
    buf = io.BytesIO()
    write_ahf(frame, buf)
    return buf.getvalue()


# -- scene documents -------------------------------------------------------

def scene_from_dict(d, tool_loader=None) -> SceneSpec:
    """Build a scene from its JSON form.

    ``tools`` entries carry a ``pose`` and either an inline ``tool`` document
    or a ``tool_file`` path resolved by ``tool_loader``.
    """
    from .tools import ToolDefinition

    tools = []
    for entry in d.get("tools", []):
        if "tool" in entry:
            tool = ToolDefinition.from_dict(entry["tool"])
        elif tool_loader is not None:
            tool = tool_loader(entry["tool_file"])
        else:
            raise InvalidArgument("tool entry needs an inline 'tool' document")
        tools.append((tool, RigidTransform.from_dict(entry["pose"])))
    strays = [StrayMarker(tuple(s["position"]), float(s.get("radius", 5.75)))
              for s in d.get("stray_markers", [])]
    dis = [Distractor(int(x["u0"]), int(x["v0"]), int(x["u1"]), int(x["v1"]), float(x["depth"]),
                      int(x.get("intensity", 1500)), tuple(x.get("normal", (0.0, 0.0, 1.0))))
           for x in d.get("distractors", [])]
    return SceneSpec(tools, strays, dis,
                     int(d.get("background_reflectivity_max", DEFAULT_BACKGROUND_MAX)),
                     d.get("background_depth"))


def scene_to_dict(scene: SceneSpec):
    return {
        "tools": [{"tool": t.to_dict(), "pose": p.to_dict()} for t, p in scene.tools],
        "stray_markers": [{"position": list(s.position), "radius": s.radius}
                          for s in scene.stray_markers],
        "distractors": [{"u0": x.u0, "v0": x.v0, "u1": x.u1, "v1": x.v1, "depth": x.depth,
                         "intensity": x.intensity, "normal": list(x.normal)}
                        for x in scene.distractors],
        "background_reflectivity_max": scene.background_reflectivity_max,
        "background_depth": scene.background_depth,
    }


def frame_seeds(seed: int, n: int) -> Sequence:
    """Independent per-frame seeds derived from one run seed."""
    return [[int(seed), i] for i in range(n)]
