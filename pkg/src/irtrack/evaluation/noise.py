"""Depth-noise characterisation: plane fits, normality and the sigma(d) curve."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ..errors import DegenerateFit, DegenerateGeometry, InvalidArgument
from ..geometry import CameraIntrinsics, pixel_rays
from ..sensor import Distractor, NoiseModel, SceneSpec, render_frame

AD_CRITICAL_5PCT = 0.787


@dataclass
class PlaneFit:
    normal: np.ndarray
    offset: float  # normal . x = offset
    rms_point_to_plane: float

    def distances(self, points):
        return np.asarray(points, dtype=float) @ self.normal - self.offset


def fit_plane(points) -> PlaneFit:
    """Total-least-squares plane (smallest principal component)."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or len(p) < 3:
        raise InvalidArgument("need at least three 3-D points")
    mu = p.mean(axis=0)
    _, s, Vt = np.linalg.svd(p - mu, full_matrices=False)
    if s[1] <= 1e-9 * max(s[0], 1e-300):
        raise DegenerateGeometry("points are collinear")
    n = Vt[2]
    # Orient toward +z (away from a camera at the origin) for a stable sign.
    if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
        n = -n
    offset = float(n @ mu)
    rms = float(s[2] / math.sqrt(len(p)))
    return PlaneFit(n, offset, rms)


def normality_statistic(samples):
    """Anderson-Darling A*^2 for normality with estimated mean and variance.

    Returns ``(statistic, reject_at_5pct)`` using the small-sample corrected
    statistic ``A^2 (1 + 0.75/n + 2.25/n^2)`` against 0.787.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 8:
        raise InvalidArgument("need at least 8 samples")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise InvalidArgument("samples have zero variance")
    z = (x - x.mean()) / sd
    cdf = np.clip(ndtr(z), 1e-300, 1.0)
    sf = np.clip(ndtr(-z), 1e-300, 1.0)
    i = np.arange(1, n + 1)
    a2 = -n - np.sum((2 * i - 1) * (np.log(cdf) + np.log(sf[::-1]))) / n
    a2_star = a2 * (1.0 + 0.75 / n + 2.25 / n ** 2)
    return float(a2_star), bool(a2_star > AD_CRITICAL_5PCT)


@dataclass
class QuadraticFit:
    model: NoiseModel
    r_squared: float


def fit_noise_quadratic(depths, sigmas, valid_range=None) -> QuadraticFit:
    """Least-squares ``sigma = a + b d + c d^2`` with its coefficient of determination."""
    d = np.asarray(depths, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if d.shape != s.shape or d.ndim != 1:
        raise InvalidArgument("depths and sigmas must be matching 1-D sequences")
    if len(np.unique(d)) < 3:
        raise DegenerateFit("need at least three distinct depths")
    A = np.stack([np.ones_like(d), d, d * d], axis=1)
    # Column scaling keeps the normal equations well conditioned at mm scales.
    scale = np.abs(A).max(axis=0)
    coef, _, rank, _ = np.linalg.lstsq(A / scale, s, rcond=None)
    if rank < 3:
        raise DegenerateFit("quadratic fit is rank deficient")
    coef = coef / scale
    pred = A @ coef
    ss_res = float(np.sum((s - pred) ** 2))
    ss_tot = float(np.sum((s - s.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rng = tuple(valid_range) if valid_range is not None else (float(d.min()), float(d.max()))
    return QuadraticFit(NoiseModel(float(coef[0]), float(coef[1]), float(coef[2]), rng), r2)


@dataclass
class PlaneStation:
    depth: float  # mean ray depth over the board, mm
    sigma: float  # along-ray depth standard deviation, quantisation removed
    rms_point_to_plane: float
    n_points: int
    ad_statistic: float
    ad_reject: bool


@dataclass
class NoiseProtocolConfig:
    n_depths: int = 48
    frames: int = 300
    board_mm: float = 80.0
    tilt_deg: float = 20.0
    quantize: bool = True
    ad_samples: int = 1000
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default)


def _board_scene(intr, depth, board_mm, tilt_deg):
    half = 0.5 * board_mm * intr.fx_px / depth
    u0 = int(math.floor(intr.c_x - half))
    u1 = int(math.ceil(intr.c_x + half)) + 1
    v0 = int(math.floor(intr.c_y - half))
    v1 = int(math.ceil(intr.c_y + half)) + 1
    t = math.radians(tilt_deg)
    board = Distractor(u0, v0, u1, v1, depth, 1500, (math.sin(t), 0.0, math.cos(t)))
    return SceneSpec(distractors=[board])


def plane_station(model: NoiseModel, depth: float, cfg: NoiseProtocolConfig, seed) -> PlaneStation:
    """Image a static tilted board for ``cfg.frames`` frames and measure depth scatter.

    The board area is taken from the first frame's reflectivity. All frames'
    points are merged for one plane fit; per-point residuals are measured
    along each pixel's ray so the spread is directly comparable to the
    sensor's depth sigma.
    """
    intr = cfg.intrinsics
    scene = _board_scene(intr, depth, cfg.board_mm, cfg.tilt_deg)
    rays = pixel_rays(intr)
    first = render_frame(scene, intr, model, [*seed, 0], quantize=cfg.quantize)
    area = (first.reflectivity >= 500) & (first.depth > 0)
    if area.sum() < 3:
        raise DegenerateGeometry(f"board at {depth} mm not visible")
    u_area = rays[area]
    stack = [first.depth[area].astype(float)]
    for k in range(1, cfg.frames):
        f = render_frame(scene, intr, model, [*seed, k], quantize=cfg.quantize)
        stack.append(f.depth[area].astype(float))
    depths = np.array(stack)  # (frames, pixels)
    pts = depths[..., None] * u_area[None]
    pts = pts.reshape(-1, 3)
    plane = fit_plane(pts)
    orth = plane.distances(pts)
    along = orth / np.abs(np.tile(u_area @ plane.normal, cfg.frames))
    var = float(np.var(along))
    if cfg.quantize:
        var -= 1.0 / 12.0
    rng = np.random.default_rng([*seed, 1_000_000])
    sub = rng.choice(orth, size=min(cfg.ad_samples, len(orth)), replace=False)
    a2, reject = normality_statistic(sub)
    return PlaneStation(float(depths.mean()), math.sqrt(max(var, 0.0)),
                        plane.rms_point_to_plane, len(pts), a2, reject)


@dataclass
class NoiseCharacterization:
    stations: list
    fit: QuadraticFit

    @property
    def ad_non_reject_rate(self):
        return float(np.mean([not s.ad_reject for s in self.stations]))


def _station_job(args):
    return plane_station(*args)


def noise_characterization(model: NoiseModel = NoiseModel(), cfg: NoiseProtocolConfig = None,
                           seed: int = 0, mapper=map) -> NoiseCharacterization:
    """Static-plane protocol at random depths followed by a quadratic sigma fit.

    ``mapper`` runs the per-depth jobs (e.g. an executor's ordered ``map``).
    """
    cfg = cfg or NoiseProtocolConfig()
    lo, hi = model.valid_range
    margin = 0.6 * cfg.board_mm * math.sin(math.radians(abs(cfg.tilt_deg))) + 1.0
    rng = np.random.default_rng([seed, 48])
    depths = np.sort(rng.uniform(lo + margin, hi - margin, size=cfg.n_depths))
    jobs = [(model, float(d), cfg, [seed, i]) for i, d in enumerate(depths)]
    stations = list(mapper(_station_job, jobs))
    fit = fit_noise_quadratic([s.depth for s in stations], [s.sigma for s in stations],
                              valid_range=model.valid_range)
    return NoiseCharacterization(stations, fit)
