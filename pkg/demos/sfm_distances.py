"""
SfM distances
=============

Compare a re-estimated trajectory with the target: both are expressed
relative to the first frame and the prediction is rescaled by least squares.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from nvs4d.align import sfm_distances
from nvs4d.geometry import Pose, axis_angle
from nvs4d.synthetic import make_scene, similarity_transform

rng = np.random.default_rng(1)
target, _ = make_scene(rng, n_frames=10, n_points=10)

print("self:", sfm_distances(target, target))

# SfM output lives in its own gauge: any rotation, offset and scale
gauge = similarity_transform(target, Rotation.random(random_state=rng).as_matrix(), [3.0, -1.0, 2.0], 0.25)
r = sfm_distances(gauge, target)
print(f"other gauge: pos {r.sfmd_pos:.2e} rot {r.sfmd_rot:.2e}")

# jitter the estimate and watch both distances grow
for amount in (0.01, 0.05, 0.2):
    noisy = target.with_poses(
        Pose(p.rotation @ axis_angle(rng.normal(size=3), amount), p.translation + amount * rng.normal(size=3))
        for p in target.poses
    )
    r = sfm_distances(noisy, target)
    print(f"jitter {amount}: pos {r.sfmd_pos:.4f} rot {r.sfmd_rot:.4f} rad (scale {r.fitted_scale:.3f})")
