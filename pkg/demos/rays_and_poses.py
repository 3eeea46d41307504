"""
Poses, projection and ray maps
==============================

A camera pose is stored camera-from-world, the way COLMAP writes it.
"""

import numpy as np

from nvs4d.geometry import Intrinsics, Pose, axis_angle, backproject, pixel_rays, project, relative_pose

K = Intrinsics(fx=300.0, fy=300.0, cx=160.0, cy=120.0, width=320, height=240)

# two cameras: the second is turned 10 degrees and shifted to the right
ref = Pose.identity()
cam = Pose(axis_angle([0, 1, 0], np.radians(10)), [-0.5, 0.0, 0.0])
print("second camera center in world:", cam.center)

# a point in front of both cameras
X = np.array([0.2, -0.1, 4.0])
px, depth = project(X, K, cam)
print("pixel", px, "depth", depth)
print("back-projected:", backproject(px, depth, K, cam))  # recovers X

# the pose of cam seen from ref
rel = relative_pose(ref, cam)
print("relative translation", rel.translation)

# one ray per pixel, through the pixel center, expressed in the reference frame
rays = pixel_rays(K, cam, ref)
print("ray map shape", rays.directions.shape)
print("center ray direction", rays.directions[120, 160])
print("all origins at the camera center:", np.allclose(rays.origins, cam.center))
