"""
Reading COLMAP models and mixing datasets
=========================================
"""

import tempfile
from pathlib import Path

import numpy as np

from nvs4d.ingest import DatasetDescriptor, DatasetKind, mixture_sample, mixture_weights, model_from_trajectory, parse_colmap, write_colmap
from nvs4d.synthetic import make_scene

rng = np.random.default_rng(4)
traj, pts = make_scene(rng, n_frames=4, n_points=20)

with tempfile.TemporaryDirectory() as tmp:
    write_colmap(model_from_trajectory(traj, pts), tmp)
    print((Path(tmp) / "images.txt").read_text()[:400])
    model = parse_colmap(tmp)
    print("images", len(model.images), "points", len(model.points3D))
    back = model.trajectory()
    print("pose error", max(np.abs(a.rotation - b.rotation).max() for a, b in zip(back.poses, traj.poses)))

# training mixture: 30% unposed video, the rest in proportion to scene counts
datasets = [
    DatasetDescriptor("video", DatasetKind.UNPOSED_VIDEO, 10_000),
    DatasetDescriptor("static", DatasetKind.POSED_3D, 300),
    DatasetDescriptor("dynamic", DatasetKind.POSED_4D, 100, window=5, scene_length=30),
]
print("weights", mixture_weights(datasets))
for _ in range(5):
    print(mixture_sample(datasets, rng))
