"""Render, detect and track in one place for the experiments."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..detection import DetectionConfig, localize_markers
from ..geometry import CameraIntrinsics, RigidTransform
from ..sensor import NoiseModel, SceneSpec, render_frame
from ..tools import ToolDefinition


@dataclass(frozen=True)
class SimulationConfig:
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default)
    noise_model: NoiseModel = field(default_factory=NoiseModel)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    quantize: bool = True


def detect_static(tool: ToolDefinition, pose: RigidTransform, n_frames: int, seed,
                  sim: SimulationConfig = SimulationConfig()):
    """Detections for ``n_frames`` independent frames of a static tool.

    Frame ``k`` uses seed ``[*seed, k]``.
    """
    scene = SceneSpec(tools=[(tool, pose)])
    out = []
    for k in range(n_frames):
        frame = render_frame(scene, sim.intrinsics, sim.noise_model, [*seed, k],
                             timestamp=k, quantize=sim.quantize)
        out.append(localize_markers(frame, sim.detection))
    return out


def track_poses(trackers, detections_per_frame, tool_name, skip=0):
    """Run every tracker over the same detections; poses per tracker (``None`` if lost).

    The first ``skip`` frames only warm the filters up.
    """
    out = [[] for _ in trackers]
    for k, dets in enumerate(detections_per_frame):
        for i, tr in enumerate(trackers):
            obs = {o.tool: o for o in tr.track_frame(dets, float(k))}
            if k >= skip:
                o = obs.get(tool_name)
                out[i].append(None if o is None else o.pose)
    return out
