"""
Thresholded symmetric epipolar distance
=======================================

TSED scores a generated sequence by how well matched keypoints in
consecutive frames respect the epipolar geometry of the target cameras.
"""

import numpy as np

from nvs4d.epipolar import MatchSet, TsedConfig, trajectory_pairs, tsed
from nvs4d.synthetic import make_scene, project_matches

rng = np.random.default_rng(0)
traj, pts = make_scene(rng, n_frames=8, n_points=200)

# perfect correspondences: every pair passes
clean = project_matches(traj, pts)
print("clean:", tsed(trajectory_pairs(traj, clean)).score)

# pixel noise on the matches pushes some pair medians over the threshold
for sigma in (0.5, 1.5, 3.0):
    noisy = project_matches(traj, pts, noise=sigma, rng=rng)
    r = tsed(trajectory_pairs(traj, noisy), TsedConfig(threshold=2.0))
    print(f"noise {sigma}: score {r.score:.3f}  medians", np.round(r.medians, 2))

# a pair with fewer than 10 matches is not scored, only counted
clean[3] = MatchSet(clean[3].pair_id, clean[3].matches[:6])
r = tsed(trajectory_pairs(traj, clean))
print("scored pairs", r.n_valid, "discarded", r.n_discarded)
