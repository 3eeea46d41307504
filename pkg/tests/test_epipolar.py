import numpy as np
import pytest

from nvs4d.epipolar import (
    MatchSet,
    TsedConfig,
    fundamental_from_poses,
    pair_sed,
    sed_many,
    symmetric_epipolar_distance,
    trajectory_pairs,
    tsed,
)
from nvs4d.errors import DegeneratePair, InvalidInput, NoValidPairs
from nvs4d.geometry import Intrinsics, Pose, axis_angle, project_points, relative_pose
from nvs4d.synthetic import make_scene, project_matches

Ka = Intrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
Kb = Intrinsics(450.0, 460.0, 300.0, 250.0, 600, 500)


def rig(rng, n=50):
    pa = Pose.identity()
    pb = Pose(axis_angle([0.1, 1.0, 0.2], 0.2), [-0.5, 0.05, 0.1])
    X = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(3, 6, n)])
    xa, _ = project_points(X, Ka, pa)
    xb, _ = project_points(X, Kb, pb)
    F = fundamental_from_poses(Ka, Kb, relative_pose(pa, pb))
    return F, np.hstack([xa, xb])


def brute_line_distance(line, point):
    # closest point on a x + b y + c = 0 found by minimising over the line parameter
    a, b, c = line
    p0 = np.array([-a * c, -b * c]) / (a * a + b * b)
    d = np.array([-b, a]) / np.hypot(a, b)
    ts = np.linspace(-1, 1, 3) * 1e4
    t = d @ (point - p0)  # exact minimiser of a quadratic; checked against the grid below
    best = np.linalg.norm(p0 + t * d - point)
    assert best <= min(np.linalg.norm(p0 + s * d - point) for s in ts) + 1e-9
    return best


def test_exact_rig_satisfies_epipolar_constraint(rng):
    F, m = rig(rng)
    xa = np.column_stack([m[:, :2], np.ones(len(m))])
    xb = np.column_stack([m[:, 2:], np.ones(len(m))])
    # normalise inputs so the residual is scale free
    xa /= np.linalg.norm(xa, axis=1, keepdims=True)
    xb /= np.linalg.norm(xb, axis=1, keepdims=True)
    assert np.max(np.abs(np.einsum("ni,ij,nj->n", xb, F, xa))) < 1e-6
    assert np.max(sed_many(F, m)) < 1e-6


def test_fundamental_is_rank_two_and_unit_norm(rng):
    F, _ = rig(rng)
    s = np.linalg.svd(F, compute_uv=False)
    assert s[-1] < 1e-9
    assert abs(np.linalg.norm(F) - 1) < 1e-12


def test_pure_rotation_is_degenerate():
    rel = Pose(axis_angle([0, 1, 0], 0.3), np.zeros(3))
    with pytest.raises(DegeneratePair):
        fundamental_from_poses(Ka, Kb, rel)


def test_perpendicular_shift_gives_three_plus_reverse_term(rng):
    F, m = rig(rng, 5)
    x1, x2 = m[0, :2], m[0, 2:]
    line2 = F @ np.array([*x1, 1.0])
    normal = line2[:2] / np.hypot(*line2[:2])
    x2s = x2 + 3.0 * normal
    d_forward = brute_line_distance(line2, x2s)
    d_reverse = brute_line_distance(F.T @ np.array([*x2s, 1.0]), x1)
    assert abs(d_forward - 3.0) < 1e-9
    got = symmetric_epipolar_distance(F, [*x1, *x2s])
    assert abs(got - (3.0 + d_reverse)) < 1e-9


def test_sed_symmetry(rng):
    F, m = rig(rng, 20)
    m = m + rng.normal(scale=2.0, size=m.shape)
    swapped = np.hstack([m[:, 2:], m[:, :2]])
    np.testing.assert_allclose(sed_many(F, m), sed_many(F.T, swapped), rtol=1e-12)


def test_pair_sed_min_matches(rng):
    F, m = rig(rng, 11)
    assert pair_sed(F, MatchSet((0, 1), m[:9])) is None
    assert pair_sed(F, MatchSet((0, 1), m)) < 1e-6


def test_pair_sed_median_of_constructed_distances(rng):
    # move each second point along the line normal so SEDs are 0..10 exactly known
    F, m = rig(rng, 11)
    shifted = m.copy()
    target = np.arange(11.0)
    for i, t in enumerate(target):
        x1 = m[i, :2]
        line2 = F @ np.array([*x1, 1.0])
        n = line2[:2] / np.hypot(*line2[:2])
        # solve for the forward shift s so that s + reverse(s) == t
        lo, hi = 0.0, t
        for _ in range(200):
            s = 0.5 * (lo + hi)
            val = symmetric_epipolar_distance(F, [*x1, *(m[i, 2:] + s * n)])
            lo, hi = (s, hi) if val < t else (lo, s)
        shifted[i, 2:] = m[i, 2:] + lo * n
    seds = sed_many(F, shifted)
    np.testing.assert_allclose(seds, target, atol=1e-9)
    assert abs(pair_sed(F, MatchSet((0, 1), shifted)) - 5.0) < 1e-9


def _pairs_with_medians(medians, rng):
    F, m = rig(rng, 10)
    pairs = []
    for med in medians:
        ms = m.copy()
        for i in range(10):
            x1 = m[i, :2]
            line2 = F @ np.array([*x1, 1.0])
            n = line2[:2] / np.hypot(*line2[:2])
            lo, hi = 0.0, med
            for _ in range(200):
                s = 0.5 * (lo + hi)
                val = symmetric_epipolar_distance(F, [*x1, *(m[i, 2:] + s * n)])
                lo, hi = (s, hi) if val < med else (lo, s)
            ms[i, 2:] = m[i, 2:] + lo * n
        pairs.append((F, MatchSet((0, 1), ms)))
    return pairs


def test_tsed_direct_count(rng):
    pairs = _pairs_with_medians([1.0, 1.9, 2.1, 5.0], rng)
    r = tsed(pairs, TsedConfig(2.0))
    assert r.score == 0.5
    assert r.n_valid == 4 and r.n_discarded == 0


def test_tsed_counts_discarded_pairs(rng):
    F, m = rig(rng, 30)
    pairs = [(F, MatchSet((0, 1), m)), (F, MatchSet((1, 2), m[:9])), (F, MatchSet((2, 3), m[:10]))]
    r = tsed(pairs)
    assert (r.score, r.n_valid, r.n_discarded) == (1.0, 2, 1)
    assert r.medians[1] is None
    with pytest.raises(NoValidPairs):
        tsed(pairs[1:2])


def test_clean_scene_against_itself_scores_one(rng):
    traj, pts = make_scene(rng, n_frames=6, n_points=60)
    pairs = trajectory_pairs(traj, project_matches(traj, pts))
    assert len(pairs) == 5
    assert tsed(pairs).score == 1.0


def test_trajectory_pairs_skips_non_contiguous_and_fills_missing(rng):
    traj, pts = make_scene(rng, n_frames=4, n_points=30)
    ms = project_matches(traj, pts, pairs=[(0, 1), (0, 2), (2, 3)])
    pairs = trajectory_pairs(traj, ms)
    assert [p[1].pair_id for p in pairs] == [(0, 1), (1, 2), (2, 3)]
    assert len(pairs[1][1]) == 0
    r = tsed(pairs)
    assert r.n_discarded == 1


def test_matchset_validation():
    with pytest.raises(InvalidInput):
        MatchSet((0, 1), np.zeros((3, 3)))
    with pytest.raises(InvalidInput):
        MatchSet((0, 1), np.array([[0.0, 0.0, np.nan, 1.0]]))
