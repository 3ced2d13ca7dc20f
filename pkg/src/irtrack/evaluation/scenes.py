"""Reference tools and poses shared by the experiments."""
from __future__ import annotations

import math

import numpy as np

from ..geometry import RigidTransform, rotation_about
from ..tools import ToolDefinition, validate_distinctness

MARKER_RADIUS = 5.75  # 11.5 mm spheres

# Planar four-marker tool, coordinates in its own plane (mm).
REFERENCE_LAYOUT = np.array([
    [0.0, 0.0, 0.0],
    [28.6, 41.0, 0.0],
    [0.0, 88.0, 0.0],
    [-44.3, 40.5, 0.0],
])

# Tool z axis toward the camera: 180 deg about camera x.
FACING = np.diag([1.0, -1.0, -1.0])


def reference_tool(name="tool") -> ToolDefinition:
    return ToolDefinition.from_points(name, REFERENCE_LAYOUT, MARKER_RADIUS)


def facing_pose(position, tilt_deg=0.0, tilt_axis=(1.0, 0.0, 0.0)) -> RigidTransform:
    """Tool facing the camera at ``position``, optionally tilted about a camera axis."""
    R = rotation_about(tilt_axis, math.radians(tilt_deg)) @ FACING
    return RigidTransform(R, np.asarray(position, dtype=float))


def random_planar_tool(rng, name, n_markers=4, extent=90.0, min_sep=30.0,
                       min_gap=4.0, max_tries=10000) -> ToolDefinition:
    """Random planar tool whose sides all differ by at least ``min_gap`` mm."""
    for _ in range(max_tries):
        pts = np.zeros((n_markers, 3))
        pts[:, :2] = rng.uniform(-extent / 2, extent / 2, size=(n_markers, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        if d[np.triu_indices(n_markers, 1)].min() < min_sep:
            continue
        tool = ToolDefinition.from_points(name, pts, MARKER_RADIUS)
        if validate_distinctness([tool], min_gap / 2).clean:
            return tool
    raise RuntimeError("could not draw a distinct tool")


def tool_library(n_tools, seed=0, min_gap=4.0):
    """``n_tools`` mutually distinct random tools."""
    rng = np.random.default_rng(seed)
    tools = []
    while len(tools) < n_tools:
        t = random_planar_tool(rng, f"tool{len(tools)}", min_gap=min_gap)
        if validate_distinctness(tools + [t], min_gap / 2).clean:
            tools.append(t)
    return tools
