"""Camera model, rigid transforms and point-set registration.

Points are plain ``numpy`` arrays of shape ``(3,)`` (or ``(n, 3)`` for sets),
in millimetres. Depth is always the *ray* distance from the optical centre,
never the z coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BehindCamera, DegenerateGeometry, InvalidArgument

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera with physical focal length and pixel pitch.

    ``f_x``/``f_y`` are in mm and ``s_x``/``s_y`` in mm/px, so the focal
    length in pixels is ``f_x / s_x``. Pixel ``(u, v)`` addresses the centre
    of column ``u``, row ``v``.
    """

    f_x: float
    f_y: float
    s_x: float
    s_y: float
    c_x: float
    c_y: float
    width: int
    height: int

    def __post_init__(self):
        if min(self.f_x, self.f_y, self.s_x, self.s_y) <= 0:
            raise InvalidArgument("focal lengths and pixel pitch must be positive")
        if not (0 <= self.c_x < self.width and 0 <= self.c_y < self.height):
            raise InvalidArgument("principal point outside the image")

    @property
    def fx_px(self) -> float:
        return self.f_x / self.s_x

    @property
    def fy_px(self) -> float:
        return self.f_y / self.s_y

    @classmethod
    def from_fov(cls, fov_x_deg, fov_y_deg=None, width=512, height=512, pixel_pitch=0.005):
        """Intrinsics whose outermost pixel centres subtend the given FoV."""
        fov_y_deg = fov_x_deg if fov_y_deg is None else fov_y_deg
        c_x, c_y = (width - 1) / 2.0, (height - 1) / 2.0
        fx_px = c_x / math.tan(math.radians(fov_x_deg) / 2)
        fy_px = c_y / math.tan(math.radians(fov_y_deg) / 2)
        return cls(fx_px * pixel_pitch, fy_px * pixel_pitch, pixel_pitch, pixel_pitch,
                   c_x, c_y, width, height)

    @classmethod
    def default(cls):
        # 512x512 over 90 deg: the usable tracking cone of the sensor, not
        # its full optical FoV (see ``wide``).
        return cls.from_fov(90.0, 90.0, 512, 512)

    @classmethod
    def wide(cls):
        """Full 127 x 127 deg optical FoV at 512x512."""
        return cls.from_fov(127.0, 127.0, 512, 512)

    def unit_plane(self, u, v):
        """Pixel coordinates -> normalized image-plane coordinates."""
        x = (np.asarray(u, dtype=float) - self.c_x) * self.s_x / self.f_x
        y = (np.asarray(v, dtype=float) - self.c_y) * self.s_y / self.f_y
        return x, y

    def fov(self):
        """Horizontal and vertical FoV (degrees) spanned by the pixel centres."""
        xs, _ = self.unit_plane(np.array([0.0, self.width - 1.0]), 0.0)
        _, ys = self.unit_plane(0.0, np.array([0.0, self.height - 1.0]))
        return fov_estimate(xs, ys)

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("f_x", "f_y", "s_x", "s_y", "c_x", "c_y", "width", "height")}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["f_x"]), float(d["f_y"]), float(d["s_x"]), float(d["s_y"]),
                   float(d["c_x"]), float(d["c_y"]), int(d["width"]), int(d["height"]))


@lru_cache(maxsize=8)
def pixel_rays(intr: CameraIntrinsics) -> np.ndarray:
    """Unit ray through every pixel centre, shape ``(height, width, 3)``."""
    u = np.arange(intr.width, dtype=float)
    v = np.arange(intr.height, dtype=float)
    x, y = intr.unit_plane(u[None, :], v[:, None])
    rays = np.stack(np.broadcast_arrays(x, y, np.ones_like(x)), axis=-1)
    rays /= np.linalg.norm(rays, axis=-1, keepdims=True)
    rays.setflags(write=False)
    return rays


def back_project(intr: CameraIntrinsics, px, depth: float) -> np.ndarray:
    """Pixel + ray depth -> camera-frame point at that distance from the centre."""
    if not depth > 0:
        raise InvalidArgument(f"depth must be positive, got {depth}")
    u, v = float(px[0]), float(px[1])
    if not (math.isfinite(u) and math.isfinite(v)):
        raise InvalidArgument("pixel must be finite")
    x, y = intr.unit_plane(u, v)
    ray = np.array([x, y, 1.0])
    return depth / np.linalg.norm(ray) * ray


def sphere_center_correct(p, depth: float, r: float) -> np.ndarray:
    """Push a sphere-surface point ``r`` further along its ray to the centre."""
    if r < 0:
        raise InvalidArgument(f"marker radius must be non-negative, got {r}")
    if not depth > 0:
        raise InvalidArgument(f"depth must be positive, got {depth}")
    return (depth + r) / depth * np.asarray(p, dtype=float)


def project(intr: CameraIntrinsics, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not p[2] > 0:
        raise BehindCamera(f"point {p.tolist()} is not in front of the camera")
    u = p[0] / p[2] * intr.f_x / intr.s_x + intr.c_x
    v = p[1] / p[2] * intr.f_y / intr.s_y + intr.c_y
    return np.array([u, v])


def project_many(intr: CameraIntrinsics, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if np.any(pts[:, 2] <= 0):
        raise BehindCamera("point(s) not in front of the camera")
    u = pts[:, 0] / pts[:, 2] * intr.fx_px + intr.c_x
    v = pts[:, 1] / pts[:, 2] * intr.fy_px + intr.c_y
    return np.stack([u, v], axis=1)


def fov_estimate(unit_plane_xs, unit_plane_ys):
    """Largest pairwise angle between rays ``(x, 0, 1)`` and ``(0, y, 1)``, in degrees.

    Only the two extreme samples can form the widest pair, so this is linear
    rather than quadratic in the number of samples.
    """
    xs = np.asarray(unit_plane_xs, dtype=float).ravel()
    ys = np.asarray(unit_plane_ys, dtype=float).ravel()
    if xs.size < 2 or ys.size < 2:
        raise InvalidArgument("need at least two samples per axis")
    return _max_ray_angle(xs), _max_ray_angle(ys)


def _max_ray_angle(vals):
    lo, hi = math.atan(vals.min()), math.atan(vals.max())
    return math.degrees(hi - lo)


@dataclass(frozen=True)
class RigidTransform:
    """``p -> rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidArgument("transform must be finite")
        if (np.abs(R.T @ R - np.eye(3)).max() > 1e-6
                or abs(np.linalg.det(R) - 1.0) > 1e-6):
            raise InvalidArgument("rotation is not a proper orthonormal matrix")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def inverse(self) -> "RigidTransform":
        return invert(self)

    def to_dict(self):
        return {"r": self.rotation.ravel().tolist(), "t": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d):
        r = d["r"]
        if len(r) != 9 or len(d["t"]) != 3:
            raise InvalidArgument("transform needs 9 rotation and 3 translation values")
        R = np.array(r, dtype=float).reshape(3, 3)
        # Re-project: values printed to 9 digits drift off SO(3) by ~1e-9.
        U, _, Vt = np.linalg.svd(R)
        R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
        return cls(R, np.array(d["t"], dtype=float))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform mapping ``p`` to ``a(b(p))``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: RigidTransform) -> RigidTransform:
    Rt = a.rotation.T
    return RigidTransform(Rt, -Rt @ a.translation)


def rotation_about(axis, angle_rad) -> np.ndarray:
    """Rodrigues rotation matrix."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle_rad) * K + (1 - math.cos(angle_rad)) * K @ K


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, radians."""
    c = (np.trace(R) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def random_rotation(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rigid_register(src, dst):
    """Least-squares rigid transform taking ``src`` onto ``dst``.

    Centroid subtraction followed by an SVD of the cross-covariance; the last
    singular direction is flipped when needed so the result is a rotation,
    never a reflection. Returns ``(transform, rmse)``.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InvalidArgument(f"point sets must both be (n, 3); got {src.shape} and {dst.shape}")
    if len(src) < 3:
        raise InvalidArgument("need at least three correspondences")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    A = src - mu_s
    B = dst - mu_d

    # Collinear sources leave rotation about the common line undetermined.
    sv_src = np.linalg.svd(A, compute_uv=False)
    if sv_src[1] <= 1e-9 * max(sv_src[0], 1e-300):
        raise DegenerateGeometry("source points are collinear or coincident")

    H = A.T @ B
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= 1e-9 * max(S[0], 1e-300):
        raise DegenerateGeometry("cross-covariance is rank deficient")
    d = 1.0 if np.linalg.det(Vt.T @ U.T) > 0 else -1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = mu_d - R @ mu_s

    resid = src @ R.T + t - dst
    rmse = math.sqrt(float(np.mean(np.sum(resid * resid, axis=1))))
    return RigidTransform(R, t), rmse
