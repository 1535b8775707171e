"""Scoring 3D box estimates.

Orientation quality: AOS weights the detection precision sweep by the
cosine similarity of the yaw error; dividing by AP factors the 2D
detector back out (OS), and acos(2 OS - 1) turns that into a mean angular
error. Box quality: center distance, closest-point distance to the
camera, and 3D IoU.
"""

import numpy as np

from boxlift import Box2D, Box3D, Dimensions
from boxlift.metrics import (
    GroundTruthBox,
    ScoredDetection,
    aos,
    center_distance,
    closest_point_distance_error,
    iou3d,
    orientation_score,
    os_to_angle,
)

# A five-object scene with one missed object, one false positive and
# mixed yaw errors.
gts, dets = [], []
for i, yaw_error in enumerate([0.0, 0.05, -0.12, 0.3, None]):  # None: missed
    rect = Box2D(150 * i, 100, 150 * i + 80, 160)
    gts.append(GroundTruthBox(rect, yaw=0.4))
    if yaw_error is not None:
        dets.append(ScoredDetection(rect, yaw=0.4 + yaw_error, score=0.9 - 0.1 * i))
dets.append(ScoredDetection(Box2D(2000, 100, 2080, 160), yaw=0.0, score=0.45))

result = aos(gts, dets, iou_threshold=0.7)
score = orientation_score(result.aos, result.ap)
print(f"AP  = {result.ap:.4f}")
print(f"AOS = {result.aos:.4f}")
print(f"OS  = {score:.4f} -> mean angle error {np.degrees(os_to_angle(score)):.2f} deg")

# Box-level metrics for a prediction 40 cm off in depth and 3 deg in yaw.
gt_box = Box3D(np.array([2.0, 0.9, 18.0]), Dimensions(4.2, 1.5, 1.8), yaw=0.50)
pred_box = Box3D(np.array([2.05, 0.9, 18.4]), Dimensions(4.2, 1.5, 1.8), yaw=0.55)
print(f"\ncenter distance:        {center_distance(gt_box, pred_box):.3f} m")
print(f"closest-point distance: {closest_point_distance_error(gt_box, pred_box):.3f} m")
print(f"3D IoU:                 {iou3d(gt_box, pred_box):.3f}")
