"""Command-line pipeline: ``simulate | train | localize | evaluate``.

Stages hand data between each other through files only: a dataset
directory with a manifest, checkpoint files, trajectory CSVs, and report
JSON/CSV tables.  Every command resolves its configuration (JSON file
plus flag overrides), logs it next to its outputs, and funnels all
randomness through one per-run seed.

Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 non-finite training loss, 5 schema mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import data as dataio
from . import evaluate as evalmod
from . import learn, sim
from .data import GroundTruthLeakage, InsufficientEpisodes, MissingColumn
from .estimators import ModelNotTrained, SchemaMismatch, parse_groups
from .evaluate import MethodSpec, displacement_errors
from .ekf import Trajectory
from .learn import NonFiniteLoss, ShapeMismatch, TrainConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NONFINITE = 4
EXIT_SCHEMA = 5


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    return obj


def _write_resolved_config(out_dir: Path, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True), encoding="utf-8"
    )


def _prepare_out_dir(out: str, force: bool) -> Path:
    out_dir = Path(out)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise OSError(f"output directory {out_dir} is not empty (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _train_config(config: dict, seed: int) -> TrainConfig:
    cfg = TrainConfig.from_json(config.get("train", {}))
    return replace(cfg, seed=seed)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_dir = _prepare_out_dir(args.out or config.get("out", "dataset"), args.force)

    noise_override = config.get("noise")
    if config.get("scenarios"):
        scenarios = [sim.Scenario.from_json(obj) for obj in config["scenarios"]]
    else:
        scenarios = sim.default_suite(
            replicates=int(config.get("replicates", 3)),
            base_seed=seed,
            duration_s=float(config.get("duration_s", 40.0)),
            bu_only_signature=bool(config.get("bu_only_signature", False)),
        )
    if noise_override:
        noise = sim.SimNoise.from_json(noise_override)
        scenarios = [replace(sc, noise=noise) for sc in scenarios]

    entries = []
    for index, scenario in enumerate(scenarios):
        episode_id = f"{index:03d}"
        episode = sim.generate_episode(scenario)
        files = sim.export_episode(episode, out_dir, episode_id)
        entries.append(
            dataio.ManifestEntry(
                episode_id=episode_id,
                scenario=scenario.name,
                files=files,
                rows={"100hz": episode.frame_count, "10hz": len(episode.times_10hz)},
            )
        )
        log.info("episode %s (%s): %d frames", episode_id, scenario.name, episode.frame_count)

    manifest = dataio.build_splits(entries, seed)
    dataio.save_manifest(manifest, out_dir / "manifest.json")
    _write_resolved_config(
        out_dir,
        {
            "command": "simulate",
            "seed": seed,
            "out": str(out_dir),
            "scenarios": [sc.to_json() for sc in scenarios],
        },
    )
    print(f"wrote {len(entries)} episodes to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _ingest_split(dataset_dir: Path, manifest: dataio.DatasetManifest, split: str, schema=None):
    entries = manifest.by_split(split)
    if not entries:
        raise ConfigError(f"manifest has no {split!r} episodes")
    return [(e, dataio.ingest_entry(dataset_dir, e, schema=schema)) for e in entries]


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    kind = args.model or config.get("model", "mlp")
    groups = parse_groups(args.groups or config.get("groups", "ic+ve+bu"))
    dataset_dir = Path(args.dataset or config.get("dataset", "dataset"))
    out_path = Path(args.out or config.get("out", f"{kind}.ckpt"))

    manifest = dataio.load_manifest(dataset_dir / "manifest.json")
    schema = dataio.default_schema().subset(groups)
    train_eps = [raw for _, raw in _ingest_split(dataset_dir, manifest, "train", schema)]
    val_eps = [raw for _, raw in _ingest_split(dataset_dir, manifest, "val", schema)]

    cfg = _train_config(config, seed)
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)

    data = evalmod.build_regression_data(train_eps, val_eps, groups=groups)
    started = time.perf_counter()
    result = learn.train(kind, data, cfg)
    elapsed = time.perf_counter() - started

    out_path.parent.mkdir(parents=True, exist_ok=True)
    learn.save_checkpoint(result.checkpoint, out_path, binary=not args.json_checkpoint)
    curve_path = out_path.with_suffix(out_path.suffix + ".curve.csv")
    with open(curve_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for row in result.curve:
            fh.write(f"{row['epoch']},{row['train_loss']:.17g},{row['val_loss']:.17g}\n")
    _write_resolved_config(
        out_path.parent,
        {
            "command": "train",
            "seed": seed,
            "model": kind,
            "groups": "+".join(groups),
            "dataset": str(dataset_dir),
            "out": str(out_path),
            "train": cfg.to_json(),
        },
    )
    print(
        f"trained {kind} ({'+'.join(groups)}): best val MSE {result.checkpoint.val_loss:.6g} "
        f"at epoch {result.best_epoch} in {elapsed:.1f}s -> {out_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# localize
# ---------------------------------------------------------------------------


def _write_trajectory_csv(path: Path, trajectory: Trajectory) -> None:
    dataio.write_table(
        path,
        trajectory.times,
        {
            "x": trajectory.poses[:, 0],
            "y": trajectory.poses[:, 1],
            "z": trajectory.poses[:, 2],
            "roll": trajectory.poses[:, 3],
            "pitch": trajectory.poses[:, 4],
            "yaw": trajectory.poses[:, 5],
        },
    )


def cmd_localize(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    method = args.method or config.get("method", "learned-ekf")
    dataset_dir = Path(args.dataset or config.get("dataset", "dataset"))
    episode_id = args.episode or config.get("episode")
    if episode_id is None:
        raise ConfigError("an episode id is required (--episode)")
    out_dir = Path(args.out or config.get("out", "localize_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = dataio.load_manifest(dataset_dir / "manifest.json")
    entry = next((e for e in manifest.entries if e.episode_id == episode_id), None)
    if entry is None:
        raise ConfigError(f"episode {episode_id!r} not in manifest")
    raw = dataio.ingest_entry(dataset_dir, entry)

    accel_gate = config.get("accel_gate_g")  # optional update gate, m/s^2
    started = time.perf_counter()
    v_est = None
    if method == "crawler":
        trajectory = evalmod.crawler_odometry(raw)
    elif method == "kinematic-ekf":
        trajectory = evalmod.kinematics_ekf(raw, accel_gate_g=accel_gate)
    elif method == "learned-ekf":
        ckpt_path = (args.checkpoint or [None])[0] or config.get("checkpoint")
        if not ckpt_path:
            raise ConfigError("learned-ekf requires --checkpoint")
        checkpoint = learn.load_checkpoint(ckpt_path)
        trajectory, v_est = evalmod.learned_ekf(raw, checkpoint, accel_gate_g=accel_gate)
    else:
        raise ConfigError(f"unknown method {method!r}")
    elapsed = time.perf_counter() - started

    traj_path = out_dir / f"trajectory_{episode_id}_{method}.csv"
    _write_trajectory_csv(traj_path, trajectory)

    summary = {
        "episode": episode_id,
        "method": method,
        "frames": len(trajectory),
        "timing": {"total_s": elapsed, "per_frame_s": elapsed / max(len(trajectory), 1)},
    }
    if raw.truth is not None:
        truth_traj = Trajectory(raw.times_100hz, raw.truth.poses)
        summary["ade_m"] = evalmod.ade(trajectory, truth_traj)
    if v_est is not None and raw.truth is not None:
        summary["velocity_rmse"] = list(evalmod.velocity_rmse(v_est, raw.truth.v_local))
    (out_dir / f"summary_{episode_id}_{method}.json").write_text(
        json.dumps(summary, indent=2), encoding="utf-8"
    )
    _write_resolved_config(
        out_dir,
        {
            "command": "localize",
            "dataset": str(dataset_dir),
            "episode": episode_id,
            "method": method,
            "checkpoint": str((args.checkpoint or [None])[0] or config.get("checkpoint") or ""),
            "out": str(out_dir),
        },
    )
    ade_note = f", ADE {summary['ade_m']:.4g} m" if "ade_m" in summary else ""
    print(f"{method} on episode {episode_id}: {len(trajectory)} frames{ade_note} -> {traj_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _write_report(out_dir: Path, name: str, report) -> None:
    (out_dir / f"{name}.json").write_text(
        json.dumps(report.to_json(), indent=2), encoding="utf-8"
    )
    rows = report.table_rows()
    with open(out_dir / f"{name}.csv", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(row) + "\n")


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    dataset_dir = Path(args.dataset or config.get("dataset", "dataset"))
    out_dir = Path(args.out or config.get("out", "eval_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    split = args.split or config.get("split", "test")
    trials = args.trials if args.trials is not None else int(config.get("trials", 5))

    manifest = dataio.load_manifest(dataset_dir / "manifest.json")
    episodes = _ingest_split(dataset_dir, manifest, split)

    checkpoint_paths = list(args.checkpoint or config.get("checkpoints", []))
    methods = [
        MethodSpec("crawler", "crawler"),
        MethodSpec("kinematic-ekf", "kinematic-ekf"),
    ]
    if checkpoint_paths:
        if args.trials is not None and len(checkpoint_paths) != trials:
            raise ConfigError(
                f"--trials {trials} but {len(checkpoint_paths)} checkpoints supplied"
            )
        methods.append(
            MethodSpec("learned-ekf", "learned-ekf", tuple(checkpoint_paths))
        )

    report = evalmod.compare(methods, episodes)
    _write_report(out_dir, "report", report)

    # Per-episode position-error-vs-time traces for external plotting.
    for entry, raw in episodes:
        if raw.truth is None:
            continue
        frames = evalmod.assemble_frames(raw)
        truth_traj = Trajectory(frames.times, frames.truth_poses, frames.slip_flags)
        columns: dict[str, np.ndarray] = {}
        for spec in methods:
            ckpt = (
                learn.load_checkpoint(spec.checkpoints[0])
                if spec.kind == "learned-ekf"
                else None
            )
            traj, _, _ = evalmod.run_method_on_episode(spec, frames, ckpt)
            columns[f"err_{spec.name}"] = displacement_errors(traj, truth_traj)
        if frames.slip_flags is not None:
            columns["slip_flag"] = frames.slip_flags.astype(float)
        dataio.write_table(out_dir / f"errors_{entry.episode_id}.csv", frames.times, columns)

    if args.ablate:
        kind = args.model or config.get("model", "mlp")
        groups_cfg = config.get(
            "ablate_groups", [["ic"], ["ic", "ve"], ["ic", "ve", "bu"]]
        )
        cfg = _train_config(config, seed)
        train_eps = [raw for _, raw in _ingest_split(dataset_dir, manifest, "train")]
        val_eps = [raw for _, raw in _ingest_split(dataset_dir, manifest, "val")]
        seeds = [seed + i for i in range(trials)]
        ablation = evalmod.ablate_feature_groups(
            kind, train_eps, val_eps, episodes, cfg, seeds, group_sets=groups_cfg
        )
        _write_report(out_dir, "ablation", ablation)

    _write_resolved_config(
        out_dir,
        {
            "command": "evaluate",
            "seed": seed,
            "dataset": str(dataset_dir),
            "split": split,
            "trials": trials,
            "checkpoints": [str(p) for p in checkpoint_paths],
            "ablate": bool(args.ablate),
            "out": str(out_dir),
        },
    )
    any_cell = any(cell.values for m in report.methods for cell in m.scenario_ade.values())
    print(f"evaluated {len(report.methods)} methods on {len(episodes)} episodes -> {out_dir}")
    return EXIT_OK if any_cell else EXIT_CONFIG


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackpose",
        description="Slip-aware self-localization pipeline for tracked vehicles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None, help="run seed")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_train = sub.add_parser("train", help="train a velocity model")
    common(p_train)
    p_train.add_argument("--dataset", help="dataset directory with manifest.json")
    p_train.add_argument("--model", choices=["mlp", "lstm"], help="model kind")
    p_train.add_argument("--groups", help="feature groups, e.g. ic+ve+bu")
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--json-checkpoint", action="store_true",
                         help="write the pure-JSON checkpoint encoding")
    p_train.set_defaults(func=cmd_train)

    p_loc = sub.add_parser("localize", help="run one localizer on one episode")
    common(p_loc)
    p_loc.add_argument("--dataset", help="dataset directory")
    p_loc.add_argument("--episode", help="episode id from the manifest")
    p_loc.add_argument("--method", choices=["crawler", "kinematic-ekf", "learned-ekf"])
    p_loc.add_argument("--checkpoint", action="append", help="trained checkpoint path")
    p_loc.set_defaults(func=cmd_localize)

    p_eval = sub.add_parser("evaluate", help="compare methods over a split")
    common(p_eval)
    p_eval.add_argument("--dataset", help="dataset directory")
    p_eval.add_argument("--split", choices=["train", "val", "test"])
    p_eval.add_argument("--checkpoint", action="append",
                        help="learned-ekf checkpoint (repeat for trials)")
    p_eval.add_argument("--trials", type=int, default=None)
    p_eval.add_argument("--ablate", action="store_true",
                        help="train and evaluate cumulative feature-group sets")
    p_eval.add_argument("--model", choices=["mlp", "lstm"], help="model kind for --ablate")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InsufficientEpisodes) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLoss as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (SchemaMismatch, ShapeMismatch, GroundTruthLeakage, MissingColumn, ModelNotTrained) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
