"""Simulate a short recording of one tool plus clutter, track it, and print the pose error.

    python scripts/demo_tracking.py [--frames 45] [--seed 0]
"""
import argparse
import math

import numpy as np

from irtrack.detection import localize_markers
from irtrack.geometry import CameraIntrinsics, rotation_angle
from irtrack.sensor import Distractor, NoiseModel, SceneSpec, StrayMarker, render_frame
from irtrack.tracking import Tracker, TrackerConfig
from irtrack.evaluation.scenes import facing_pose, reference_tool


def cli():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--frames", type=int, default=45)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    intr, model = CameraIntrinsics.default(), NoiseModel()
    tool = reference_tool("probe")
    pose = facing_pose((30.0, -20.0, 550.0), 20.0)
    scene = SceneSpec(tools=[(tool, pose)], stray_markers=[StrayMarker((-150.0, 90.0, 620.0))],
                      distractors=[Distractor(20, 20, 140, 90, 600.0)])
    tracker = Tracker([tool], TrackerConfig(noise_model=model))
    pos_err, rot_err = [], []
    for k in range(args.frames):
        frame = render_frame(scene, intr, model, [args.seed, k], timestamp=k / 45.0)
        for obs in tracker.track_frame(localize_markers(frame), frame.timestamp):
            pos_err.append(np.linalg.norm(obs.pose.translation - pose.translation))
            rot_err.append(math.degrees(rotation_angle(obs.pose.rotation.T @ pose.rotation)))
    print(f"tracked {len(pos_err)}/{args.frames} frames")
    if pos_err:
        print(f"position error  median {np.median(pos_err):.3f} mm  max {np.max(pos_err):.3f} mm")
        print(f"rotation error  median {np.median(rot_err):.3f} deg max {np.max(rot_err):.3f} deg")


if __name__ == "__main__":
    cli()
