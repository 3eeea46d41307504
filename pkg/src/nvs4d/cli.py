"""Command-line front end.

Subcommands: ``calibrate``, ``metrics``, ``toy-sample``, ``sweep`` and
``mixture-check``. Each reads one JSON config (``--config``); flags
override config keys. Exit codes: 0 success, 1 usage or config error, 2
partial failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .align import sfm_distances
from .calibrate import calibrate_scene, filter_scenes
from .epipolar import TsedConfig, trajectory_pairs, tsed
from .geometry import Trajectory
from .errors import ConfigError, Nvs4dError, UncalibratableScene
from .imgmetrics import keypoint_distance, psnr, ssim
from .ingest.colmap import parse_colmap, write_colmap
from .ingest.depth import read_depth
from .ingest.images import read_image
from .ingest.matches import read_matches
from .ingest.mixture import descriptors_from_config, mixture_sample, mixture_weights

log = logging.getLogger("nvs4d")

SEED_ENV = "NVS4D_SEED"
SCHEMA = "nvs4d.{}/1"
DEPTH_SUFFIXES = (".pgm", ".png", ".f32")
METRICS = ("tsed", "sfmd", "kd", "psnr-ssim")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# manifest


@dataclass
class SceneManifest:
    id: str
    colmap: Path | None = None
    depth_dir: Path | None = None
    target: Path | None = None
    predicted_sfm: Path | None = None
    reference_sfm: Path | None = None
    matches: Path | None = None
    reference_matches: Path | None = None
    generated_images: list[Path] = field(default_factory=list)
    reference_images: list[Path] = field(default_factory=list)
    conditioning: list[int] = field(default_factory=lambda: [0])


_PATH_KEYS = ("colmap", "depth_dir", "target", "predicted_sfm", "reference_sfm", "matches", "reference_matches")


def load_manifest(path) -> list[SceneManifest]:
    """Parse a scene manifest; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    base = path.parent
    scenes = []
    seen = set()
    for entry in doc.get("scenes", []):
        if "id" not in entry:
            raise ConfigError("every scene needs an 'id'")
        sid = str(entry["id"])
        if sid in seen:
            raise ConfigError(f"duplicate scene id {sid}")
        seen.add(sid)
        kw = {"id": sid}
        for key in _PATH_KEYS:
            if entry.get(key) is not None:
                kw[key] = base / entry[key]
        for key in ("generated_images", "reference_images"):
            kw[key] = [base / p for p in entry.get(key, [])]
        cond = entry.get("conditioning", [0])
        if not isinstance(cond, list) or not all(isinstance(i, int) and i >= 0 for i in cond) or not cond:
            raise ConfigError(f"scene {sid}: conditioning must be a non-empty list of frame indices")
        kw["conditioning"] = cond
        unknown = set(entry) - set(_PATH_KEYS) - {"id", "generated_images", "reference_images", "conditioning"}
        if unknown:
            raise ConfigError(f"scene {sid}: unknown keys {sorted(unknown)}")
        scenes.append(SceneManifest(**kw))
    return scenes


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_report(rows, columns, kind: str, out) -> str:
    """CSV with a ``# schema: ...`` line first; returns the text."""
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA.format(kind)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) if not isinstance(row.get(c), str) else row[c] for c in columns])
    text = buf.getvalue()
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    return text


def _map(fn, items, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --------------------------------------------------------------------------
# calibrate


def _find_depth(depth_dir: Path, image_name: str) -> Path | None:
    stem = Path(image_name).stem
    for suffix in DEPTH_SUFFIXES:
        p = depth_dir / f"{stem}{suffix}"
        if p.is_file():
            return p
    return None


def calibrate_one(scene: SceneManifest, min_points: int = 5):
    if scene.colmap is None or scene.depth_dir is None:
        raise ConfigError(f"scene {scene.id}: calibrate needs 'colmap' and 'depth_dir'")
    model = parse_colmap(scene.colmap)
    traj = model.trajectory()
    points = model.sparse_points()
    depths = []
    for frame in traj:
        p = _find_depth(scene.depth_dir, frame.name)
        depths.append(read_depth(p) if p is not None else None)
    calib, per_frame = calibrate_scene(traj, points, depths, min_points)
    return model, calib, per_frame


def cmd_calibrate(cfg: dict) -> int:
    scenes = load_manifest(cfg["manifest"])
    if not scenes:
        raise ConfigError("manifest lists no scenes")
    out_dir = Path(cfg["out"])
    fraction = float(cfg.get("discard_fraction", 0.30))
    min_points = int(cfg.get("min_points", 5))
    if cfg.get("dry_run"):
        return _print_plan("calibrate", cfg, [s.id for s in scenes])

    def work(scene):
        try:
            return calibrate_one(scene, min_points)
        except UncalibratableScene as exc:
            log.warning("scene %s: %s", scene.id, exc)
            return exc

    results = _map(work, scenes, int(cfg.get("jobs", 1)))
    ok = [i for i, r in enumerate(results) if not isinstance(r, Exception)]
    kept_local = filter_scenes([results[i][1] for i in ok], fraction)
    kept = {ok[k] for k in kept_local}
    rows = []
    for i, (scene, res) in enumerate(zip(scenes, results)):
        if isinstance(res, Exception):
            rows.append({"scene_id": scene.id, "status": "uncalibratable", "kept": False, "frames_used": 0})
            continue
        model, calib, _ = res
        rows.append(
            {
                "scene_id": scene.id,
                "mean_scale": calib.mean_scale,
                "variance": calib.variance,
                "frames_used": calib.n_frames,
                "kept": i in kept,
                "status": "ok",
            }
        )
        write_colmap(model.with_scale(calib.mean_scale), out_dir / scene.id / "sparse")
    cols = ["scene_id", "mean_scale", "variance", "frames_used", "kept", "status"]
    write_report(rows, cols, "calibration", out_dir / "calibration.csv")
    return EXIT_PARTIAL if len(ok) < len(scenes) else EXIT_OK


# --------------------------------------------------------------------------
# metrics


def _tsed_for(target_dir, match_path, cfg: TsedConfig):
    traj = parse_colmap(target_dir).trajectory()
    pairs = trajectory_pairs(traj, read_matches(match_path))
    return tsed(pairs, cfg)


def _sfmd_for(target_dir, sfm_dir, anchor: int):
    target = parse_colmap(target_dir).trajectory()
    sfm_model = parse_colmap(sfm_dir)
    sfm_traj = sfm_model.trajectory()
    by_name = {f.name: f for f in sfm_traj}
    keep = [i for i, f in enumerate(target) if f.name in by_name]
    if anchor not in keep:
        return None
    ref = Trajectory(tuple(target[i] for i in keep))
    pred = Trajectory(tuple(by_name[target[i].name] for i in keep))
    return sfm_distances(pred, ref, keep.index(anchor))


def metrics_one(scene: SceneManifest, which, tcfg: TsedConfig, min_matches: int) -> dict:
    row = {"scene_id": scene.id}

    def guard(fn, *args):
        try:
            return fn(*args)
        except (Nvs4dError, FileNotFoundError) as exc:
            log.warning("scene %s: %s", scene.id, exc)
            return None

    anchor = scene.conditioning[0]
    if "tsed" in which:
        for key, path in (("tsed", scene.matches), ("tsed_ref", scene.reference_matches)):
            r = guard(_tsed_for, scene.target, path, tcfg) if scene.target and path else None
            row[key] = r.score if r else None
            row[f"{key}_pairs"] = r.n_valid if r else None
            row[f"{key}_discarded"] = r.n_discarded if r else None
    if "sfmd" in which:
        for suffix, path in (("", scene.predicted_sfm), ("_ref", scene.reference_sfm)):
            r = guard(_sfmd_for, scene.target, path, anchor) if scene.target and path else None
            row[f"sfmd_pos{suffix}"] = r.sfmd_pos if r else None
            row[f"sfmd_rot{suffix}"] = r.sfmd_rot if r else None
            row[f"sfmd_frames{suffix}"] = r.n_frames if r else None
    if "kd" in which:
        for key, path in (("kd", scene.matches), ("kd_ref", scene.reference_matches)):
            r = guard(lambda p: keypoint_distance(read_matches(p), min_matches), path) if path else None
            row[key] = r.value if r else None
    if "psnr-ssim" in which:
        gen, ref = scene.generated_images, scene.reference_images
        if gen and len(gen) == len(ref):
            def pair_scores():
                ps, ss = [], []
                for g, r in zip(gen, ref):
                    a, b = read_image(g), read_image(r)
                    ps.append(psnr(a, b))
                    ss.append(ssim(a, b))
                return float(np.mean(ps)), float(np.mean(ss))

            r = guard(pair_scores)
        else:
            r = None
        row["psnr"], row["ssim"] = (r if r else (None, None))
    return row


def _metric_columns(which):
    cols = ["scene_id"]
    if "tsed" in which:
        cols += ["tsed", "tsed_ref", "tsed_pairs", "tsed_discarded", "tsed_ref_pairs", "tsed_ref_discarded"]
    if "sfmd" in which:
        cols += ["sfmd_pos", "sfmd_pos_ref", "sfmd_rot", "sfmd_rot_ref", "sfmd_frames", "sfmd_frames_ref"]
    if "kd" in which:
        cols += ["kd", "kd_ref"]
    if "psnr-ssim" in which:
        cols += ["psnr", "ssim"]
    return cols


def aggregate_row(rows, cols) -> dict:
    """Mean over scenes of every available value; TSED is pooled over pairs."""
    agg = {"scene_id": "ALL"}
    for c in cols[1:]:
        if c.endswith(("_pairs", "_discarded", "_frames", "_frames_ref")):
            vals = [r[c] for r in rows if r.get(c) is not None]
            agg[c] = int(sum(vals)) if vals else None
            continue
        if c in ("tsed", "tsed_ref"):
            num = sum(r[c] * r[f"{c}_pairs"] for r in rows if r.get(c) is not None)
            den = sum(r[f"{c}_pairs"] for r in rows if r.get(c) is not None)
            agg[c] = num / den if den else None
            continue
        vals = [r[c] for r in rows if r.get(c) is not None]
        agg[c] = float(np.mean(vals)) if vals else None
    return agg


def cmd_metrics(cfg: dict) -> int:
    scenes = load_manifest(cfg["manifest"])
    if not scenes:
        raise ConfigError("manifest lists no scenes")
    which = cfg.get("which") or list(METRICS)
    if isinstance(which, str):
        which = [w.strip() for w in which.split(",")]
    bad = set(which) - set(METRICS)
    if bad:
        raise ConfigError(f"unknown metrics {sorted(bad)}; choose from {METRICS}")
    tcfg = TsedConfig(float(cfg.get("threshold", 2.0)), int(cfg.get("min_matches", 10)))
    if cfg.get("dry_run"):
        return _print_plan("metrics", cfg, [s.id for s in scenes])
    rows = _map(lambda s: metrics_one(s, which, tcfg, tcfg.min_matches), scenes, int(cfg.get("jobs", 1)))
    cols = _metric_columns(which)
    rows.append(aggregate_row(rows, cols))
    write_report(rows, cols, "metrics", cfg.get("out"))
    return EXIT_OK


# --------------------------------------------------------------------------
# toy diffusion


def _require_seed(cfg: dict) -> int:
    seed = cfg.get("seed")
    if seed is None:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    if seed is None:
        raise ConfigError(f"a seed is required (config 'seed', --seed or ${SEED_ENV})")
    return int(seed)


def _toy_setup(cfg):
    from .diffusion import toy_signals, toy_world

    world = toy_world(int(cfg.get("world_seed", 0)))
    signals = toy_signals(world, float(cfg.get("signal_offset", 3.0)))
    return world, signals


def cmd_toy_sample(cfg: dict) -> int:
    from .diffusion import GuidanceSpec, ddim_sample, moment_report

    seed = _require_seed(cfg)
    weights = tuple(cfg.get("weights", (1.0, 1.0, 1.0)))
    plan = {
        "seed": seed,
        "weights": list(weights),
        "steps": int(cfg.get("steps", 256)),
        "n_samples": int(cfg.get("n_samples", 20000)),
        "rule": cfg.get("rule", "ddim"),
        "level": int(cfg.get("level", 3)),
    }
    if cfg.get("dry_run"):
        return _print_plan("toy-sample", {**cfg, **plan}, [])
    world, signals = _toy_setup(cfg)
    x = ddim_sample(
        world, GuidanceSpec(weights), signals, plan["n_samples"], seed,
        steps=plan["steps"], rule=plan["rule"], jobs=int(cfg.get("jobs", 1)),
    )
    m, S = world.conditional(plan["level"], signals)
    rep = moment_report(x, m, S)
    rows = []
    for i in range(world.dim):
        rows.append({"stat": "mean", "i": i, "j": "", "empirical": rep["empirical_mean"][i], "exact": m[i]})
    for i in range(world.dim):
        for j in range(world.dim):
            rows.append({"stat": "cov", "i": i, "j": j, "empirical": rep["empirical_cov"][i, j], "exact": S[i, j]})
    rows.append({"stat": "mean_abs_err_max", "i": "", "j": "", "empirical": rep["mean_abs_err_max"], "exact": 0.0})
    rows.append({"stat": "cov_frobenius_err", "i": "", "j": "", "empirical": rep["cov_frobenius_err"], "exact": 0.0})
    out = cfg.get("out")
    write_report(rows, ["stat", "i", "j", "empirical", "exact"], "toy-moments", out)
    if cfg.get("save_samples"):
        np.save(cfg["save_samples"], x)
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    from .diffusion import guidance_sweep, posterior_metrics

    seed = _require_seed(cfg)
    stage1 = [float(w) for w in cfg.get("stage1", [0.5, 1.0, 1.5, 2.0])]
    stage2 = [float(w) for w in cfg.get("stage2", [])]
    if not stage1:
        raise ConfigError("stage1 grid must not be empty")
    signal = cfg.get("stage2_signal", "pose")
    if cfg.get("dry_run"):
        return _print_plan("sweep", {**cfg, "seed": seed, "stage1": stage1, "stage2": stage2}, [])
    world, signals = _toy_setup(cfg)
    res = guidance_sweep(
        world, signals, stage1, stage2, signal, posterior_metrics(world, signals),
        n_samples=int(cfg.get("n_samples", 4096)), seed=seed, steps=int(cfg.get("steps", 256)),
        jobs=int(cfg.get("jobs", 1)),
    )
    text = f"# schema: {SCHEMA.format('sweep')}\n" + res.to_csv()
    out = cfg.get("out")
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# mixture


def cmd_mixture_check(cfg: dict) -> int:
    seed = _require_seed(cfg)
    datasets = descriptors_from_config(cfg.get("datasets", []))
    if not datasets:
        raise ConfigError("config lists no datasets")
    video_prob = float(cfg.get("video_prob", 0.3))
    draws = int(cfg.get("draws", 100_000))
    expected = mixture_weights(datasets, video_prob)
    if cfg.get("dry_run"):
        return _print_plan("mixture-check", {**cfg, "seed": seed}, [d.name for d in datasets])
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(datasets), dtype=np.int64)
    window_ok = np.ones(len(datasets), dtype=bool)
    for _ in range(draws):
        d = mixture_sample(datasets, rng, video_prob)
        counts[d.dataset] += 1
        if d.window is not None:
            K = datasets[d.dataset].window
            w = d.window
            if len(w) != K or list(w) != list(range(w[0], w[0] + K)) or w[-1] >= datasets[d.dataset].scene_length:
                window_ok[d.dataset] = False
    rows = []
    for i, d in enumerate(datasets):
        p = expected[i]
        freq = counts[i] / draws
        sd = math.sqrt(p * (1 - p) / draws) if 0 < p < 1 else 0.0
        z = (freq - p) / sd if sd > 0 else (0.0 if freq == p else math.inf)
        rows.append(
            {
                "dataset": d.name,
                "kind": d.kind.value,
                "expected": p,
                "observed": freq,
                "z": z,
                "within_4sigma": abs(z) <= 4,
                "window_ok": bool(window_ok[i]),
            }
        )
    write_report(rows, ["dataset", "kind", "expected", "observed", "z", "within_4sigma", "window_ok"],
                 "mixture", cfg.get("out"))
    return EXIT_OK if all(r["within_4sigma"] and r["window_ok"] for r in rows) else EXIT_PARTIAL


# --------------------------------------------------------------------------
# entry point


def _print_plan(command, cfg, items) -> int:
    plan = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items() if k != "dry_run"}
    plan = {"command": command, "config": plan, "items": items}
    sys.stdout.write(json.dumps(plan, indent=2, sort_keys=True, default=str) + "\n")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "metrics": cmd_metrics,
    "toy-sample": cmd_toy_sample,
    "sweep": cmd_sweep,
    "mixture-check": cmd_mixture_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nvs4d", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nvs4d {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, manifest=False, seed=False):
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", help="output path ('-' for stdout)")
        sp.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
        sp.add_argument("--jobs", type=int, help="parallel workers")
        if manifest:
            sp.add_argument("--manifest", type=Path, help="scene manifest JSON")
        if seed:
            sp.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV})")

    sp = sub.add_parser("calibrate", help="metric-scale calibration of SfM scenes")
    common(sp, manifest=True)
    sp.add_argument("--discard-fraction", type=float)
    sp.add_argument("--min-points", type=int)

    sp = sub.add_parser("metrics", help="TSED, SfM distances, KD, PSNR/SSIM reports")
    common(sp, manifest=True)
    sp.add_argument("--which", help=f"comma separated subset of {','.join(METRICS)}")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--min-matches", type=int)

    sp = sub.add_parser("toy-sample", help="guided sampling on the Gaussian toy world")
    common(sp, seed=True)
    sp.add_argument("--weights", type=float, nargs="+")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--n-samples", type=int)
    sp.add_argument("--rule", choices=("ddim", "ancestral"))
    sp.add_argument("--save-samples")

    sp = sub.add_parser("sweep", help="two-stage guidance sweep on the toy world")
    common(sp, seed=True)
    sp.add_argument("--stage1", type=float, nargs="+")
    sp.add_argument("--stage2", type=float, nargs="*")
    sp.add_argument("--stage2-signal", choices=("image", "pose", "time"))
    sp.add_argument("--n-samples", type=int)
    sp.add_argument("--steps", type=int)

    sp = sub.add_parser("mixture-check", help="empirical check of the data-mixture sampler")
    common(sp, seed=True)
    sp.add_argument("--draws", type=int)
    sp.add_argument("--video-prob", type=float)
    return p


def resolve_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        base = Path(args.config).parent
        for key in ("manifest", "out", "save_samples"):
            if isinstance(cfg.get(key), str) and cfg[key] != "-":
                cfg[key] = str(base / cfg[key])
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        if key == "dry_run" and not value:
            continue
        cfg[key] = value
    if args.command in ("calibrate", "metrics") and not cfg.get("manifest"):
        raise ConfigError("a scene manifest is required (--manifest or config 'manifest')")
    if args.command == "calibrate" and not cfg.get("out"):
        raise ConfigError("calibrate needs an output directory (--out)")
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except Nvs4dError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
