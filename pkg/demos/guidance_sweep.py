"""
Two-stage guidance sweep
========================

Stage 1 shares a single weight across all signals.  Stage 2 keeps the best
shared weight and varies the weight of one signal.
"""

import numpy as np

from nvs4d.diffusion import guidance_sweep, pareto_front, posterior_metrics, toy_signals, toy_world

world = toy_world(0)
signals = toy_signals(world)
metrics = posterior_metrics(world, signals)

res = guidance_sweep(world, signals, [0.0, 0.5, 1.0, 1.5, 2.0, 3.0], [0.5, 2.5, 4.0], "pose", metrics,
                     n_samples=4096, seed=7, steps=128)
print(res.to_csv())

stage1 = [r for r in res.rows if r.stage == 1]
pts = np.array([[r.metrics["mean_distance"], r.metrics["spread"]] for r in stage1])
for r, on_front in zip(stage1, pareto_front(pts)):
    print(r.weights[0], "pareto" if on_front else "")
print("best shared weight:", res.best_stage1)
