"""Evaluation harness: metrics, baseline localizers, and method comparison.

Three localization methods share one episode interface:

    crawler        planar dead reckoning from the track encoders alone
    kinematic-ekf  the pose filter fed with encoder forward speed
    learned-ekf    the pose filter fed with a trained velocity model

Reports follow a scenario-by-method table with per-trial means and
standard deviations, a slip/non-slip breakdown, pooled velocity RMSE,
and wall-clock throughput.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import learn
from .data import (
    ManifestEntry,
    MissingColumn,
    RawEpisode,
    check_no_leakage,
    default_schema,
)
from .ekf import (
    GRAVITY,
    AttitudeObservation,
    ControlInput,
    DegenerateAcceleration,
    FilterStepError,
    NoiseConfig,
    Trajectory,
    attitude_from_accel,
    initial_filter_state,
    run_filter,
)
from .estimators import (
    FeatureSchema,
    TREAD_M,
    align_to_master_clock,
    clamp_speed,
    crawler_kinematics,
    feature_matrix,
    fit_standardizer,
    local_velocity_targets,
    sliding_windows,
)

log = logging.getLogger(__name__)

#: Frame budget for "real-time capable": one master-clock interval.
REALTIME_FRAME_S = 0.01

INFERENCE_CHUNK = 1024


class LengthMismatch(ValueError):
    """Two streams that must align have different lengths."""


def thread_cap() -> int:
    """Worker cap for embarrassingly parallel evaluation cells."""
    try:
        return max(1, int(os.environ.get("TRACKPOSE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def velocity_rmse(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-axis root-mean-square error between two velocity streams."""
    est = np.asarray(est, float).reshape(-1, 3)
    truth = np.asarray(truth, float).reshape(-1, 3)
    if len(est) != len(truth):
        raise LengthMismatch(f"{len(est)} estimated vs {len(truth)} truth samples")
    return np.sqrt(np.mean((est - truth) ** 2, axis=0))


def displacement_errors(est: Trajectory, truth: Trajectory, planar: bool = False) -> np.ndarray:
    """Per-frame Euclidean position error between aligned trajectories."""
    if len(est) != len(truth):
        raise LengthMismatch(f"{len(est)} estimated vs {len(truth)} truth poses")
    diff = est.positions - truth.positions
    if planar:
        diff = diff[:, :2]
    return np.linalg.norm(diff, axis=1)


def ade(est: Trajectory, truth: Trajectory, planar: bool = False) -> float:
    """Average displacement error: mean position error over the run.

    3-D by default; ``planar=True`` restricts to x/y for comparing against
    the planar crawler baseline.
    """
    return float(np.mean(displacement_errors(est, truth, planar)))


# ---------------------------------------------------------------------------
# Episode frame assembly
# ---------------------------------------------------------------------------


@dataclass
class Frames:
    """Master-clock aligned channels an episode exposes to the localizers."""

    times: np.ndarray  # (n,)
    aligned: dict[str, np.ndarray]
    gyro: np.ndarray  # (n, 3)
    accel: np.ndarray  # (n, 3)
    crawler_v: np.ndarray  # (n,) forward speed from the encoders
    crawler_omega: np.ndarray  # (n,) yaw rate from the encoders
    truth_poses: Optional[np.ndarray] = None  # (n, 6)
    truth_v_local: Optional[np.ndarray] = None  # (n, 3)
    slip_flags: Optional[np.ndarray] = None  # (n,) bool

    @property
    def frame_count(self) -> int:
        return len(self.times)


def assemble_frames(raw: RawEpisode, tread: float = TREAD_M) -> Frames:
    """Align all channels onto the master clock and pull the filter inputs."""
    aligned = align_to_master_clock(raw.channel_tables(), raw.times_100hz)
    for needed in ("gyro_x", "gyro_y", "gyro_z", "accel_x", "accel_y", "accel_z",
                   "crawler_right", "crawler_left"):
        if needed not in aligned:
            raise MissingColumn(f"episode {raw.episode_id!r}: channel {needed!r} absent")
    gyro = np.column_stack([aligned["gyro_x"], aligned["gyro_y"], aligned["gyro_z"]])
    accel = np.column_stack([aligned["accel_x"], aligned["accel_y"], aligned["accel_z"]])
    crawler_v, crawler_omega = crawler_kinematics(
        aligned["crawler_right"], aligned["crawler_left"], tread
    )
    return Frames(
        times=raw.times_100hz,
        aligned=aligned,
        gyro=gyro,
        accel=accel,
        crawler_v=crawler_v,
        crawler_omega=crawler_omega,
        truth_poses=raw.truth.poses if raw.truth else None,
        truth_v_local=raw.truth.v_local if raw.truth else None,
        slip_flags=raw.truth.slip_flag if raw.truth else None,
    )


def _initial_pose(frames: Frames) -> np.ndarray:
    if frames.truth_poses is not None:
        return frames.truth_poses[0].copy()
    return np.zeros(6)


# ---------------------------------------------------------------------------
# Localizers
# ---------------------------------------------------------------------------


def crawler_odometry(raw: RawEpisode | Frames, tread: float = TREAD_M) -> Trajectory:
    """Planar dead reckoning from the crawler encoders.

    Each step advances along the current yaw by the forward speed, then
    rotates the yaw; lateral/vertical velocity and roll/pitch rates are
    taken as zero.
    """
    frames = raw if isinstance(raw, Frames) else assemble_frames(raw, tread)
    times = frames.times
    n = len(times)
    start = _initial_pose(frames)
    dts = np.diff(times)
    yaw = np.empty(n)
    yaw[0] = start[5]
    yaw[1:] = start[5] + np.cumsum(frames.crawler_omega[:-1] * dts)
    poses = np.empty((n, 6))
    poses[:, 2] = start[2]
    poses[:, 3] = start[3]
    poses[:, 4] = start[4]
    poses[:, 5] = yaw
    step_v = frames.crawler_v[:-1] * dts
    poses[0, 0], poses[0, 1] = start[0], start[1]
    poses[1:, 0] = start[0] + np.cumsum(step_v * np.cos(yaw[:-1]))
    poses[1:, 1] = start[1] + np.cumsum(step_v * np.sin(yaw[:-1]))
    return Trajectory(times, poses, frames.slip_flags)


def _run_pose_filter(
    frames: Frames,
    v_est: np.ndarray,
    noise: Optional[NoiseConfig] = None,
    accel_gate_g: Optional[float] = None,
) -> Trajectory:
    """Drive the pose filter over the episode with the given velocity stream."""
    times = frames.times
    n = len(times)
    v_est = np.asarray(v_est, float).reshape(n, 3)

    steps: list[tuple[ControlInput, Optional[AttitudeObservation]]] = []
    for k in range(1, n):
        control = ControlInput(v_est[k - 1], frames.gyro[k - 1], float(times[k] - times[k - 1]))
        obs: Optional[AttitudeObservation]
        accel_k = frames.accel[k]
        if accel_gate_g is not None and abs(np.linalg.norm(accel_k) - GRAVITY) > accel_gate_g:
            obs = None
        else:
            try:
                obs = attitude_from_accel(accel_k)
            except DegenerateAcceleration as exc:
                if accel_gate_g is not None:
                    obs = None
                else:
                    raise FilterStepError(k - 1, str(exc)) from exc
        steps.append((control, obs))

    init = initial_filter_state(_initial_pose(frames))
    trajectory = run_filter(init, steps, noise=noise, t0=float(times[0]))
    trajectory.slip_flags = frames.slip_flags
    return trajectory


def kinematics_ekf(
    raw: RawEpisode | Frames,
    noise: Optional[NoiseConfig] = None,
    tread: float = TREAD_M,
    accel_gate_g: Optional[float] = None,
) -> Trajectory:
    """Pose filter with encoder forward speed as the local velocity."""
    frames = raw if isinstance(raw, Frames) else assemble_frames(raw, tread)
    v_est = np.zeros((frames.frame_count, 3))
    v_est[:, 0] = frames.crawler_v
    return _run_pose_filter(frames, v_est, noise, accel_gate_g)


def model_velocities(frames: Frames, checkpoint: learn.Checkpoint) -> np.ndarray:
    """Batched per-frame velocity inference for a trained checkpoint."""
    schema = checkpoint.standardizer.input_schema
    check_no_leakage(schema)
    features = feature_matrix(frames.aligned, schema)
    standardized = checkpoint.standardizer.transform(features)
    model = checkpoint.build_model()
    n = len(standardized)
    out = np.empty((n, 3))
    if model.window > 0:
        windows = sliding_windows(standardized, model.window)
        for start in range(0, n, INFERENCE_CHUNK):
            stop = min(start + INFERENCE_CHUNK, n)
            out[start:stop] = model.predict(np.ascontiguousarray(windows[start:stop]))
    else:
        out = model.predict(standardized)
    return clamp_speed(out)


def learned_ekf(
    raw: RawEpisode | Frames,
    checkpoint: learn.Checkpoint,
    noise: Optional[NoiseConfig] = None,
    accel_gate_g: Optional[float] = None,
) -> tuple[Trajectory, np.ndarray]:
    """Pose filter with the learned local-velocity estimate; returns both."""
    frames = raw if isinstance(raw, Frames) else assemble_frames(raw)
    v_est = model_velocities(frames, checkpoint)
    trajectory = _run_pose_filter(frames, v_est, noise, accel_gate_g)
    return trajectory, v_est


# ---------------------------------------------------------------------------
# Training-data assembly
# ---------------------------------------------------------------------------


def build_regression_data(
    train_eps: Sequence[RawEpisode],
    val_eps: Sequence[RawEpisode],
    schema: Optional[FeatureSchema] = None,
    groups: Sequence[str] = ("ic", "ve", "bu"),
) -> learn.RegressionData:
    """Aligned, standardized feature/target arrays for the two splits.

    The standardizer is fit on the training split only.  Targets are body
    velocities differenced from the ground-truth poses, so every episode
    needs a truth table.
    """
    full = schema if schema is not None else default_schema()
    selected = check_no_leakage(full.subset(groups))

    def episode_arrays(raw: RawEpisode) -> tuple[np.ndarray, np.ndarray]:
        if raw.truth is None:
            raise MissingColumn(f"episode {raw.episode_id!r} has no truth table for targets")
        frames_aligned = align_to_master_clock(raw.channel_tables(), raw.times_100hz)
        features = feature_matrix(frames_aligned, selected)
        targets = local_velocity_targets(raw.times_100hz, raw.truth.poses)
        return features, targets

    train_raw = [episode_arrays(ep) for ep in train_eps]
    val_raw = [episode_arrays(ep) for ep in val_eps]
    standardizer = fit_standardizer(
        selected, np.concatenate([f for f, _ in train_raw], axis=0)
    )
    train = [(standardizer.transform(f), tg) for f, tg in train_raw]
    val = [(standardizer.transform(f), tg) for f, tg in val_raw]
    return learn.RegressionData(
        train=train,
        val=val,
        schema=standardizer.schema,
        standardizer=standardizer,
        groups=tuple(groups),
    )


# ---------------------------------------------------------------------------
# Method comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """One comparable method; learned methods carry one checkpoint per trial."""

    name: str
    kind: str  # "crawler" | "kinematic-ekf" | "learned-ekf"
    checkpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in ("crawler", "kinematic-ekf", "learned-ekf"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "learned-ekf" and not self.checkpoints:
            raise ValueError("learned-ekf methods need at least one checkpoint")


def _json_number(value):
    """NaN is not valid JSON; represent missing metrics as null."""
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return None
    return value


@dataclass
class ScenarioCell:
    values: list[float] = field(default_factory=list)  # one per trial

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.values)) if self.values else float("nan")


@dataclass
class MethodResult:
    name: str
    kind: str
    trials: int
    scenario_ade: dict[str, ScenarioCell]
    overall: ScenarioCell
    slip_ade: float
    noslip_ade: float
    velocity_rmse_mean: Optional[np.ndarray]
    velocity_rmse_std: Optional[np.ndarray]
    total_time_s: float
    frames_processed: int
    velocity_rmse_trials: list = field(default_factory=list)  # one (3,) array per trial
    errors: list[str] = field(default_factory=list)

    @property
    def per_frame_s(self) -> float:
        return self.total_time_s / self.frames_processed if self.frames_processed else float("nan")

    @property
    def realtime_capable(self) -> bool:
        return self.per_frame_s < REALTIME_FRAME_S

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "trials": self.trials,
            "scenario_ade": {
                s: {"mean": _json_number(c.mean), "std": _json_number(c.std), "values": c.values}
                for s, c in self.scenario_ade.items()
            },
            "overall_ade": {
                "mean": _json_number(self.overall.mean),
                "std": _json_number(self.overall.std),
            },
            "slip_ade": _json_number(self.slip_ade),
            "noslip_ade": _json_number(self.noslip_ade),
            "velocity_rmse_mean": None
            if self.velocity_rmse_mean is None
            else list(self.velocity_rmse_mean),
            "velocity_rmse_std": None
            if self.velocity_rmse_std is None
            else list(self.velocity_rmse_std),
            "velocity_rmse_trials": [list(r) for r in self.velocity_rmse_trials],
            "errors": self.errors,
        }

    def timing_json(self) -> dict:
        return {
            "total_time_s": self.total_time_s,
            "frames_processed": self.frames_processed,
            "per_frame_s": self.per_frame_s,
            "realtime_capable": self.realtime_capable,
        }


@dataclass
class MetricReport:
    scenarios: list[str]
    methods: list[MethodResult]

    def method(self, name: str) -> MethodResult:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_json(self, include_timing: bool = True) -> dict:
        out = {
            "scenarios": self.scenarios,
            "methods": [m.to_json() for m in self.methods],
        }
        if include_timing:
            out["timing"] = {m.name: m.timing_json() for m in self.methods}
        return out

    def table_rows(self) -> list[list[str]]:
        """Scenario-by-method ADE table plus the overall average row."""
        header = ["scenario"]
        for m in self.methods:
            header += [f"{m.name}_ade_mean", f"{m.name}_ade_std"]
        rows = [header]
        for scenario in self.scenarios:
            row = [scenario]
            for m in self.methods:
                cell = m.scenario_ade.get(scenario, ScenarioCell())
                row += [f"{cell.mean:.6g}", f"{cell.std:.6g}"]
            rows.append(row)
        avg = ["average"]
        for m in self.methods:
            avg += [f"{m.overall.mean:.6g}", f"{m.overall.std:.6g}"]
        rows.append(avg)
        return rows


def _trial_checkpoints(spec: MethodSpec) -> list[Optional[learn.Checkpoint]]:
    if spec.kind != "learned-ekf":
        return [None]
    loaded = []
    for ck in spec.checkpoints:
        loaded.append(ck if isinstance(ck, learn.Checkpoint) else learn.load_checkpoint(ck))
    return loaded


def run_method_on_episode(
    spec: MethodSpec,
    frames: Frames,
    checkpoint: Optional[learn.Checkpoint] = None,
    noise: Optional[NoiseConfig] = None,
) -> tuple[Trajectory, Optional[np.ndarray], float]:
    """One (method, episode) cell: trajectory, velocity stream, wall time."""
    begin = time.perf_counter()
    if spec.kind == "crawler":
        traj = crawler_odometry(frames)
        v_est = np.column_stack(
            [frames.crawler_v, np.zeros(frames.frame_count), np.zeros(frames.frame_count)]
        )
    elif spec.kind == "kinematic-ekf":
        traj = kinematics_ekf(frames, noise)
        v_est = np.column_stack(
            [frames.crawler_v, np.zeros(frames.frame_count), np.zeros(frames.frame_count)]
        )
    else:
        traj, v_est = learned_ekf(frames, checkpoint, noise)
    return traj, v_est, time.perf_counter() - begin


def compare(
    methods: Sequence[MethodSpec],
    episodes: Sequence[tuple[ManifestEntry, RawEpisode]],
    noise: Optional[NoiseConfig] = None,
) -> MetricReport:
    """Evaluate every method on every episode; per-cell failures are recorded.

    Pure given (methods, episodes) apart from the wall-clock fields.
    """
    scenario_order: list[str] = []
    for entry, _ in episodes:
        if entry.scenario not in scenario_order:
            scenario_order.append(entry.scenario)

    prepared = [(entry, assemble_frames(raw)) for entry, raw in episodes]
    workers = thread_cap()

    results: list[MethodResult] = []
    for spec in methods:
        checkpoints = _trial_checkpoints(spec)
        trials = len(checkpoints)
        per_scenario: dict[str, list[list[float]]] = {s: [[] for _ in range(trials)] for s in scenario_order}
        slip_errs: list[np.ndarray] = []
        noslip_errs: list[np.ndarray] = []
        rmse_trials: list[np.ndarray] = []
        total_time = 0.0
        frames_processed = 0
        errors: list[str] = []

        for trial, ckpt in enumerate(checkpoints):
            cells: list[tuple[ManifestEntry, Frames, tuple]] = []

            def run_cell(item, _ckpt=ckpt, _trial=trial):
                entry, frames = item
                try:
                    return entry, frames, run_method_on_episode(spec, frames, _ckpt, noise)
                except Exception as exc:  # recorded, not fatal
                    return entry, frames, exc

            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    outcomes = [pool.submit(run_cell, item) for item in prepared]
                    raw_cells = [fut.result() for fut in outcomes]
            else:
                raw_cells = [run_cell(item) for item in prepared]
            for entry, frames, outcome in raw_cells:
                if isinstance(outcome, Exception):
                    errors.append(f"{entry.episode_id}/trial{trial}: {outcome}")
                else:
                    cells.append((entry, frames, outcome))

            sq_err = np.zeros(3)
            sample_count = 0
            for entry, frames, (traj, v_est, elapsed) in cells:
                total_time += elapsed
                frames_processed += len(traj)
                if frames.truth_poses is None:
                    errors.append(f"{entry.episode_id}: no truth table, skipping metrics")
                    continue
                truth_traj = Trajectory(frames.times, frames.truth_poses, frames.slip_flags)
                disp = displacement_errors(traj, truth_traj)
                per_scenario[entry.scenario][trial].append(float(np.mean(disp)))
                if frames.slip_flags is not None and frames.slip_flags.any():
                    slip_errs.append(disp[frames.slip_flags])
                    noslip_errs.append(disp[~frames.slip_flags])
                else:
                    noslip_errs.append(disp)
                if v_est is not None and frames.truth_v_local is not None:
                    sq_err += np.sum((v_est - frames.truth_v_local) ** 2, axis=0)
                    sample_count += len(v_est)
            if sample_count:
                rmse_trials.append(np.sqrt(sq_err / sample_count))

        scenario_ade = {}
        overall = ScenarioCell()
        for trial in range(trials):
            scen_means = []
            for s in scenario_order:
                if per_scenario[s][trial]:
                    scen_means.append(float(np.mean(per_scenario[s][trial])))
            if scen_means:
                overall.values.append(float(np.mean(scen_means)))
        for s in scenario_order:
            cell = ScenarioCell()
            for trial in range(trials):
                if per_scenario[s][trial]:
                    cell.values.append(float(np.mean(per_scenario[s][trial])))
            scenario_ade[s] = cell

        slip_all = np.concatenate(slip_errs) if slip_errs else np.array([])
        noslip_all = np.concatenate(noslip_errs) if noslip_errs else np.array([])
        results.append(
            MethodResult(
                name=spec.name,
                kind=spec.kind,
                trials=trials,
                scenario_ade=scenario_ade,
                overall=overall,
                slip_ade=float(np.mean(slip_all)) if slip_all.size else float("nan"),
                noslip_ade=float(np.mean(noslip_all)) if noslip_all.size else float("nan"),
                velocity_rmse_mean=np.mean(rmse_trials, axis=0) if rmse_trials else None,
                velocity_rmse_std=np.std(rmse_trials, axis=0) if rmse_trials else None,
                total_time_s=total_time,
                frames_processed=frames_processed,
                velocity_rmse_trials=rmse_trials,
                errors=errors,
            )
        )
    return MetricReport(scenarios=scenario_order, methods=results)


def ablate_feature_groups(
    kind: str,
    train_eps: Sequence[RawEpisode],
    val_eps: Sequence[RawEpisode],
    test_episodes: Sequence[tuple[ManifestEntry, RawEpisode]],
    cfg: learn.TrainConfig,
    seeds: Sequence[int],
    group_sets: Sequence[Sequence[str]] = (("ic",), ("ic", "ve"), ("ic", "ve", "bu")),
    schema: Optional[FeatureSchema] = None,
    noise: Optional[NoiseConfig] = None,
) -> MetricReport:
    """Train and evaluate one model per cumulative feature-group set.

    Every group set uses the same seeds and config, so differences come
    from the input channels alone.
    """
    specs = []
    for groups in group_sets:
        label = "+".join(groups)
        checkpoints = []
        for seed in seeds:
            data = build_regression_data(train_eps, val_eps, schema=schema, groups=groups)
            result = learn.train(kind, data, replace(cfg, seed=int(seed)))
            checkpoints.append(result.checkpoint)
        specs.append(MethodSpec(name=f"{kind}-{label}", kind="learned-ekf", checkpoints=tuple(checkpoints)))
    return compare(specs, test_episodes, noise=noise)
