"""Marker localisation from reflectivity + depth frames.

Thresholding and connected components find the bright blobs; each blob's
depth pixels then place a sphere centre in 3-D.

``median`` and ``central`` modes back-project the intensity-weighted
centroid at the blob's median (or centre-pixel) depth and push the point
out by the marker radius. The default ``sphere_fit`` mode starts from the
centroid ray and refines with a fixed-radius least-squares sphere fit over
all of the blob's back-projected depth pixels, which removes the centroid's
sub-pixel bias; blobs with too few depth pixels keep the seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument
from .geometry import CameraIntrinsics, pixel_rays
from .sensor import SensorFrame, marker_pixel_area

log = logging.getLogger(__name__)

DEPTH_MODES = ("sphere_fit", "median", "central")


@dataclass(frozen=True)
class DetectionConfig:
    threshold: int = 500
    marker_radius: float = 5.75
    area_tolerance: tuple = (0.4, 2.5)
    connectivity: int = 8
    depth_mode: str = "sphere_fit"
    max_invalid_fraction: float = 0.5
    min_fit_pixels: int = 5

    def __post_init__(self):
        if self.depth_mode not in DEPTH_MODES:
            raise InvalidArgument(f"depth_mode must be one of {DEPTH_MODES}")
        if self.connectivity not in (4, 8):
            raise InvalidArgument("connectivity must be 4 or 8")
        lo, hi = self.area_tolerance
        if not 0 < lo < hi:
            raise InvalidArgument("area tolerance must satisfy 0 < low < high")


@dataclass
class Blob:
    pixels: np.ndarray  # (k, 2) integer (u, v)
    centroid: tuple  # intensity-weighted (u, v)
    area: int
    peak_intensity: int


@dataclass
class DetectedMarker:
    """A localised sphere.

    ``ray`` is the unit direction to the centre and ``depth`` the ray
    distance to the sphere surface along it, so
    ``position == (depth + radius) * ray``.
    """

    position: np.ndarray
    ray: np.ndarray
    depth: float
    radius: float
    blob: Optional[Blob] = None

    @classmethod
    def from_center(cls, center, radius, blob=None):
        center = np.asarray(center, dtype=float)
        dist = float(np.linalg.norm(center))
        return cls(center, center / dist, dist - radius, float(radius), blob)

    def at_depth(self, depth: float) -> np.ndarray:
        """Centre position if the surface were at ``depth`` along the same ray."""
        return (depth + self.radius) * self.ray


def segment_reflectivity(frame: SensorFrame, threshold: float = 500) -> np.ndarray:
    if threshold <= 0:
        raise InvalidArgument("threshold must be positive")
    return frame.reflectivity >= threshold


def _structure(connectivity):
    return ndimage.generate_binary_structure(2, 2 if connectivity == 8 else 1)


def extract_blobs(mask, min_area, max_area, reflectivity=None, connectivity=8):
    """Connected components of ``mask`` whose pixel count is in ``[min_area, max_area]``."""
    if not 0 < min_area < max_area:
        raise InvalidArgument("need 0 < min_area < max_area")
    labels, n = ndimage.label(mask, structure=_structure(connectivity))
    if n == 0:
        return []
    weights = (np.ones(mask.shape) if reflectivity is None
               else reflectivity.astype(float))
    blobs = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        local = labels[sl] == i
        area = int(local.sum())
        if area < min_area or area > max_area:
            continue
        vv, uu = np.nonzero(local)
        uu = uu + sl[1].start
        vv = vv + sl[0].start
        wts = weights[vv, uu]
        wsum = wts.sum()
        if wsum > 0:
            centroid = (float((wts * uu).sum() / wsum), float((wts * vv).sum() / wsum))
        else:
            centroid = (float(uu.mean()), float(vv.mean()))
        peak = int(reflectivity[vv, uu].max()) if reflectivity is not None else 0
        blobs.append(Blob(np.stack([uu, vv], axis=1), centroid, area, peak))
    return blobs


def expected_area(intr: CameraIntrinsics, r, depth, ray):
    """Predicted blob area including the off-axis stretch of a sphere's image.

    The small-angle estimate assumes the marker sits on the optical axis; an
    off-axis sphere at the same distance covers ``1/cos^3`` more pixels.
    """
    cos_t = float(ray[2])
    return marker_pixel_area(intr, r, depth) / cos_t ** 3


def _area_window(area_pred, tol):
    # Pixelisation can add or remove about one pixel of blob radius, so the
    # tolerances apply to the predicted disc shrunk or grown by one pixel.
    rho = math.sqrt(area_pred / math.pi)
    lo = tol[0] * math.pi * max(rho - 1.0, 0.0) ** 2
    hi = tol[1] * math.pi * (rho + 1.0) ** 2
    return max(1.0, lo), hi


def fit_sphere_fixed_radius(points, r, init, iters=30):
    """Gauss-Newton fit of a sphere centre with known radius.

    Returns the centre, or ``None`` when the normal equations are singular.
    """
    c = np.array(init, dtype=float)
    for _ in range(iters):
        diff = points - c
        n = np.linalg.norm(diff, axis=1)
        if np.any(n < 1e-12):
            return None
        e = n - r
        J = -diff / n[:, None]
        JtJ = J.T @ J
        if np.linalg.cond(JtJ) > 1e12:
            return None
        step = np.linalg.solve(JtJ, -J.T @ e)
        c += step
        if np.linalg.norm(step) < 1e-11:
            break
    return c


def _seed_center(rays, depths, ray0, r):
    """Centre on ``ray0`` at the median distance implied by each depth pixel.

    A pixel at angle ``t`` off the centre ray that hits the sphere surface at
    ray distance ``d`` puts the centre at ``d cos t + sqrt(r^2 - d^2 sin^2 t)``;
    on the centre ray this is the plain ``d + r`` correction.
    """
    cos_t = np.clip(rays @ ray0, -1.0, 1.0)
    sin2 = 1.0 - cos_t * cos_t
    dist = depths * cos_t + np.sqrt(np.maximum(r * r - depths * depths * sin2, 0.0))
    return float(np.median(dist)) * ray0


def localize_markers(frame: SensorFrame, config: DetectionConfig = DetectionConfig(),
                     stats: Optional[dict] = None):
    """Detect marker centres in a frame.

    ``stats``, when given, receives counts of blobs rejected for area or
    dropped for lacking valid depth.
    """
    intr = frame.intrinsics
    r = config.marker_radius
    mask = segment_reflectivity(frame, config.threshold)
    blobs = extract_blobs(mask, 1, mask.size + 1, frame.reflectivity, config.connectivity)
    rays = pixel_rays(intr)
    depth_img = frame.depth
    counts = {"blobs": len(blobs), "no_depth": 0, "area": 0, "fit_fallback": 0}
    out = []
    for blob in blobs:
        uu, vv = blob.pixels[:, 0], blob.pixels[:, 1]
        d = depth_img[vv, uu].astype(float)
        ok = d > 0
        if ok.sum() == 0 or (1.0 - ok.mean()) > config.max_invalid_fraction:
            counts["no_depth"] += 1
            continue
        x, y = intr.unit_plane(*blob.centroid)
        ray0 = np.array([x, y, 1.0])
        ray0 /= np.linalg.norm(ray0)
        if config.depth_mode == "central":
            cu, cv = (int(round(v)) for v in blob.centroid)
            dc = float(depth_img[cv, cu]) if 0 <= cv < intr.height and 0 <= cu < intr.width else 0.0
            d0 = dc if dc > 0 else float(np.median(d[ok]))
        else:
            d0 = float(np.median(d[ok]))

        # A flat marker (r = 0) carries no size prior, so it skips the area gate.
        if r > 0:
            lo, hi = _area_window(expected_area(intr, r, d0, ray0), config.area_tolerance)
            if not lo <= blob.area <= hi:
                counts["area"] += 1
                continue

        if config.depth_mode == "sphere_fit" and r > 0:
            center = _seed_center(rays[vv[ok], uu[ok]], d[ok], ray0, r)
            if ok.sum() >= config.min_fit_pixels:
                pts = rays[vv[ok], uu[ok]] * d[ok][:, None]
                fit = fit_sphere_fixed_radius(pts, r, center)
                if fit is not None and np.linalg.norm(fit - center) < 2 * r + 2.0:
                    center = fit
                else:
                    counts["fit_fallback"] += 1
            else:
                counts["fit_fallback"] += 1
        else:
            center = (d0 + r) * ray0
        out.append(DetectedMarker.from_center(center, r, blob))
    if stats is not None:
        stats.update(counts)
    if counts["no_depth"]:
        log.debug("dropped %d blob(s) without valid depth", counts["no_depth"])
    return out
