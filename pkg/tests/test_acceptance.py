"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""

import contextlib
import csv
import filecmp
import io
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from oracles import score_guided_v

from nvs4d.align import sfm_distances
from nvs4d.calibrate import DepthMap, apply_scale, calibrate_scene, depth_samples, filter_scenes, frame_scale, l1_objective, weighted_median
from nvs4d.diffusion import (
    ALL_PRESENT,
    FilmParams,
    GuidanceSpec,
    ddim_sample,
    guidance_sweep,
    masked_film,
    moment_report,
    multi_guided_v,
    pareto_front,
    posterior_metrics,
    toy_signals,
    toy_world,
)
from nvs4d.diffusion.sweep import CSV_HEADER
from nvs4d.epipolar import MatchSet, trajectory_pairs, tsed
from nvs4d.errors import ParseError
from nvs4d.geometry import Pose, axis_angle
from nvs4d.imgmetrics import keypoint_distance
from nvs4d.ingest import mixture_sample, mixture_weights, parse_colmap, read_matches, write_colmap
from nvs4d.ingest.colmap import read_cameras, read_images, read_points3D
from nvs4d.ingest.mixture import descriptors_from_config
from nvs4d.synthetic import corrupt_depth, make_scene, project_matches, scale_scene, similarity_transform, splat_depth

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@contextlib.contextmanager
def criterion(number, label):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        secs = time.perf_counter() - start
        print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'} {label} ({secs:.2f} s)")


def _config(name):
    return json.loads((CONFIGS / name).read_text())


# 1 -------------------------------------------------------------------------


def test_01_multi_guidance_matches_score_form():
    with criterion(1, "nested multi-guidance equals per-signal score combination"):
        start = time.perf_counter()
        world = toy_world(0)
        assert world.dim == 6
        signals = toy_signals(world)
        rng = np.random.default_rng(101)
        triples = [(1.25, 2.0, 2.0)] + [tuple(rng.uniform(0, 4, 3)) for _ in range(99)]
        z = rng.normal(size=(32, world.dim))
        worst = 0.0
        for w in triples:
            lam = rng.uniform(-12, 12)
            got = multi_guided_v(world, z, lam, GuidanceSpec(w), signals)
            worst = max(worst, np.max(np.abs(got - score_guided_v(world, z, lam, w, signals))))
        assert worst < 1e-10, worst
        for lam in (-15.0, -3.0, 0.0, 4.0, 15.0):
            ones = multi_guided_v(world, z, lam, GuidanceSpec((1.0, 1.0, 1.0)), signals)
            assert np.array_equal(ones, world(z, lam, ALL_PRESENT, signals))
        assert time.perf_counter() - start < 5.0


# 2 -------------------------------------------------------------------------


def test_02_sampler_reproduces_gaussian_conditional():
    with criterion(2, "256-step deterministic sampler matches the closed-form conditional"):
        cfg = _config("toy_sample.json")
        assert cfg["steps"] == 256 and cfg["n_samples"] == 20_000 and cfg["weights"] == [1.0, 1.0, 1.0]
        start = time.perf_counter()
        world = toy_world(0)
        signals = toy_signals(world)
        x = ddim_sample(world, GuidanceSpec(tuple(cfg["weights"])), signals, cfg["n_samples"], seed=cfg["seed"],
                        steps=cfg["steps"], jobs=1)
        m, S = world.conditional(cfg["level"], signals)
        rep = moment_report(x, m, S)
        print(f"\n  mean_abs_err_max={rep['mean_abs_err_max']:.4f} cov_frobenius_err={rep['cov_frobenius_err']:.4f}")
        assert rep["mean_abs_err_max"] < 0.05
        assert rep["cov_frobenius_err"] < 0.1
        assert time.perf_counter() - start < 120.0


# 3 -------------------------------------------------------------------------


def test_03_masked_film_identity():
    with criterion(3, "masked FiLM is a bit-exact identity; zero embedding is not masking"):
        rng = np.random.default_rng(303)
        n, width = 100_000, 16
        for _ in range(4):
            params = FilmParams.random(rng, 8, width)
            h = rng.normal(size=(n // 4, width)) * 10.0 ** rng.integers(-200, 200, size=(n // 4, width))
            e = rng.normal(size=(n // 4, 8))
            present = rng.random(n // 4) < 0.5
            out = masked_film(h, e, params, present)
            assert out[~present].tobytes() == h[~present].tobytes()
            assert masked_film(h, None, params).tobytes() == h.tobytes()
        params = FilmParams(np.zeros((2, 3)), np.full(3, 1.5), np.zeros((2, 3)), np.array([0.5, 0.0, -1.0]))
        h = rng.normal(size=(10, 3))
        assert not np.array_equal(masked_film(h, np.zeros(2), params), masked_film(h, None, params))


# 4 -------------------------------------------------------------------------


def test_04_calibration_oracles():
    with criterion(4, "weighted median beats a 10,001-point L1 scan; exact and robust recovery; ceil(0.3N) filter"):
        rng = np.random.default_rng(404)
        for _ in range(1000):
            k = int(rng.integers(1, 60))
            z = rng.uniform(0.1, 10, k)
            d = z * rng.lognormal(0, 0.7, k)
            s = weighted_median(d / z, z)
            scan = np.linspace((d / z).min(), (d / z).max(), 10_001)
            assert l1_objective(s, z, d) <= l1_objective(scan, z, d).min()

        traj, pts = make_scene(rng, n_frames=4, n_points=300)
        for f in traj:
            depth = splat_depth(pts, f.intrinsics, f.pose)
            for ratio in (0.37, 1.0, 2.5):
                r = frame_scale(pts, DepthMap(depth.values * ratio, depth.valid), f.intrinsics, f.pose)
                assert abs(r.scale - ratio) <= 1e-9
            # corrupt the nearest 30% of valid pixels: they hold under half the z weight
            clean = frame_scale(pts, depth, f.intrinsics, f.pose).scale
            values = depth.values.copy()
            idx = np.flatnonzero(depth.valid)
            idx = idx[np.argsort(values.flat[idx], kind="stable")]
            values.flat[idx[: int(0.3 * idx.size)]] *= 10.0
            z, d = depth_samples(pts, DepthMap(values, depth.valid), f.intrinsics, f.pose)
            assert np.count_nonzero(np.abs(d / z - clean) > 1e-6) >= 0.25 * len(z)
            assert abs(frame_scale(pts, DepthMap(values, depth.valid), f.intrinsics, f.pose).scale - clean) <= 1e-9

        for n in range(1, 101):
            var = list(rng.permutation(n).astype(float))
            kept = filter_scenes(var)
            assert n - len(kept) == math.ceil(3 * n / 10) == -(-3 * n // 10)
            dropped = set(range(n)) - set(kept)
            assert all(var[i] > var[j] for i in dropped for j in kept)


# 5 -------------------------------------------------------------------------


def test_05_end_to_end_calibration():
    with criterion(5, "synthetic SfM scaled by 1/s recovers s (exact 1e-6, noisy 2%)"):
        rng = np.random.default_rng(505)
        scales = [0.2, 5.0, *rng.uniform(0.2, 5.0, 6)]
        worst_exact = worst_noisy = 0.0
        for s in scales:
            traj, pts = make_scene(rng, n_frames=6, n_points=400)
            sfm_traj, sfm_pts = scale_scene(traj, pts, 1.0 / s)
            depths = [splat_depth(pts, f.intrinsics, f.pose) for f in traj]
            calib, _ = calibrate_scene(sfm_traj, sfm_pts, depths)
            worst_exact = max(worst_exact, abs(calib.mean_scale - s))
            noisy = [corrupt_depth(d, rng, noise=0.1, outlier_frac=0.2) for d in depths]
            calib, _ = calibrate_scene(sfm_traj, sfm_pts, noisy)
            worst_noisy = max(worst_noisy, abs(calib.mean_scale / s - 1))
        print(f"\n  exact abs err={worst_exact:.2e} noisy rel err={worst_noisy:.4f}")
        assert worst_exact < 1e-6
        assert worst_noisy < 0.02


# 6 -------------------------------------------------------------------------


def test_06_tsed():
    with criterion(6, "TSED is 1.0 on exact rigs, scale invariant, and counts discarded pairs"):
        rng = np.random.default_rng(606)
        for _ in range(5):
            traj, pts = make_scene(rng, n_frames=2, n_points=80)
            assert tsed(trajectory_pairs(traj, project_matches(traj, pts))).score == 1.0
        traj, pts = make_scene(rng, n_frames=6, n_points=60)
        ms = project_matches(traj, pts, noise=1.5, rng=rng)
        base = tsed(trajectory_pairs(traj, ms))
        for s in (0.01, 0.3, 7.0, 250.0):
            scaled, _ = apply_scale(traj, pts, s)
            again = tsed(trajectory_pairs(scaled, ms))
            assert again.score == base.score
            np.testing.assert_allclose(again.medians, base.medians, rtol=1e-9, atol=0)
        clean = project_matches(traj, pts)
        clean[2] = MatchSet(clean[2].pair_id, clean[2].matches[:9])
        r = tsed(trajectory_pairs(traj, clean))
        assert (r.score, r.n_valid, r.n_discarded) == (1.0, 4, 1)
        assert r.medians[2] is None


# 7 -------------------------------------------------------------------------


def test_07_sfm_distances():
    with criterion(7, "SfM distances: self (0, 0), gauge invariance, 0.1 rad perturbation"):
        rng = np.random.default_rng(707)
        traj, _ = make_scene(rng, n_frames=8, n_points=5)
        rep = sfm_distances(traj, traj)
        assert rep.sfmd_pos < 1e-12 and rep.sfmd_rot < 1e-12
        noisy = traj.with_poses(
            Pose(p.rotation @ axis_angle(rng.normal(size=3), 0.05), p.translation + 0.05 * rng.normal(size=3), p.convention)
            for p in traj.poses
        )
        base = sfm_distances(noisy, traj)
        for _ in range(20):
            moved = similarity_transform(noisy, Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3),
                                         rng.uniform(0.2, 5))
            rep = sfm_distances(moved, traj)
            assert abs(rep.sfmd_pos - base.sfmd_pos) < 1e-6
            assert abs(rep.sfmd_rot - base.sfmd_rot) < 1e-6
        # world-from-camera frames rotated about their own axes by 0.1 rad; anchor kept fixed
        poses = [traj.poses[0]]
        for p in traj.poses[1:]:
            poses.append(Pose(axis_angle(rng.normal(size=3), 0.1) @ p.rotation, p.translation, p.convention))
        rep = sfm_distances(traj.with_poses(poses), traj)
        assert abs(rep.sfmd_rot - 0.1) < 1e-6


# 8 -------------------------------------------------------------------------


def test_08_keypoint_distance():
    with criterion(8, "KD is 5.0 for a (3, 4) shift; copied frames score below moving frames"):
        rng = np.random.default_rng(808)
        x1 = rng.integers(0, 500, size=(40, 2)).astype(float)
        assert keypoint_distance([MatchSet((0, 1), np.hstack([x1, x1 + [3.0, 4.0]]))]).value == 5.0
        for _ in range(20):
            traj, pts = make_scene(rng, n_frames=6, n_points=150)
            moving = keypoint_distance(project_matches(traj, pts, noise=0.5, rng=rng)).value
            copied_traj = traj.with_poses([traj.poses[0]] * len(traj))
            copied = keypoint_distance(project_matches(copied_traj, pts, noise=0.5, rng=rng)).value
            assert copied < moving


# 9 -------------------------------------------------------------------------

MALFORMED = [
    (read_cameras, "cameras.txt", 3),
    (read_images, "images_tokens.txt", 5),
    (read_images, "images_quat.txt", 5),
    (read_points3D, "points3D.txt", 4),
    (read_matches, "matches.txt", 4),
]


def test_09_parsers(data_dir, tmp_path):
    with criterion(9, "golden COLMAP round trip is byte-stable; malformed files report line numbers"):
        write_colmap(parse_colmap(data_dir / "golden"), tmp_path)
        for name in ("cameras.txt", "images.txt", "points3D.txt"):
            assert filecmp.cmp(data_dir / "golden" / name, tmp_path / name, shallow=False)
        for reader, name, line in MALFORMED:
            with pytest.raises(ParseError) as info:
                reader(data_dir / "malformed" / name)
            assert info.value.line == line, (name, info.value.line)


# 10 ------------------------------------------------------------------------


def test_10_mixture_sampler():
    with criterion(10, "mixture frequencies within 4 sigma; 4D windows span K consecutive steps"):
        cfg = _config("mixture.json")
        datasets = descriptors_from_config(cfg["datasets"])
        assert {d.window for d in datasets if d.window} == {5, 20}
        n = 100_000
        assert cfg["draws"] == n
        rng = np.random.default_rng(cfg["seed"])
        counts = np.zeros(len(datasets), dtype=np.int64)
        for _ in range(n):
            d = mixture_sample(datasets, rng, cfg["video_prob"])
            counts[d.dataset] += 1
            if d.window is not None:
                K = datasets[d.dataset].window
                assert list(d.window) == list(range(d.window[0], d.window[0] + K))
                assert 0 <= d.window[0] and d.window[-1] < datasets[d.dataset].scene_length
        posed = [i for i, d in enumerate(datasets) if d.posed]
        total = sum(datasets[i].scene_count for i in posed)
        expect = mixture_weights(datasets, cfg["video_prob"])
        for i, d in enumerate(datasets):
            p = 0.3 if not d.posed else 0.7 * d.scene_count / total
            assert abs(expect[i] - p) < 1e-12
            assert abs(counts[i] - n * p) <= 4 * math.sqrt(n * p * (1 - p)), (d.name, counts[i], n * p)


# 11 ------------------------------------------------------------------------


def test_11_guidance_sweep():
    with criterion(11, "two-stage sweep row counts match grids; w=1 on the Pareto front"):
        cfg = _config("sweep.json")
        start = time.perf_counter()
        world = toy_world(0)
        signals = toy_signals(world)
        metrics = posterior_metrics(world, signals)
        res = guidance_sweep(world, signals, cfg["stage1"], cfg["stage2"], cfg["stage2_signal"], metrics,
                             n_samples=cfg["n_samples"], seed=cfg["seed"], steps=cfg["steps"])
        n_configs = len(cfg["stage1"]) + len(cfg["stage2"])
        assert len(res.rows) == n_configs
        assert sum(r.stage == 1 for r in res.rows) == len(cfg["stage1"])
        rows = list(csv.reader(io.StringIO(res.to_csv())))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) - 1 == n_configs * len(metrics)
        stage1 = [r for r in res.rows if r.stage == 1]
        pts = np.array([[r.metrics["mean_distance"], r.metrics["spread"]] for r in stage1])
        idx = [r.weights for r in stage1].index((1.0, 1.0, 1.0))
        print("\n  " + " ".join(f"w={r.weights[0]}:({p[0]:.3f},{p[1]:.3f})" for r, p in zip(stage1, pts)))
        assert pareto_front(pts)[idx]
        assert time.perf_counter() - start < 300.0
