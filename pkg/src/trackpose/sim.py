"""Synthetic tracked-vehicle data generator.

Produces episodes with ground-truth kinematics, injected track slip, and
the full sensor channel catalog at native 100/10 Hz rates.  The truth
pose is integrated with the same forward-Euler kinematic model the
filter uses, so model mismatch comes only from injected slip and noise.

Slip model: the drawbar load combines rolling resistance, blade
engagement, turning drag, grade load, and seeded Poisson load bursts;
the slip ratio is a first-order low-pass response to that load.  Track
encoders report the commanded (slipping) speeds, so they over-read
whenever slip is active.  Hydraulic pressures rise with load ahead of
slip onset and sag once slip develops, which is the signature a learned
estimator can exploit.

Episode generation is pure given (scenario, seed); multiple episodes may
be generated in parallel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import data as dataio
from .ekf import GRAVITY, transition
from .estimators import TREAD_M
from .geometry import euler_rates_to_body

log = logging.getLogger(__name__)

SCENARIO_NAMES = (
    "straight",
    "low_slalom",
    "high_slalom",
    "slalom_carrying",
    "climb_slope",
    "cross_slope",
    "excavation",
    "turn",
    "grading",
    "random",
)

DT = 0.01  # master clock step, s
SLOW_EVERY = 10  # slow channels sample every 10th master tick

#: A frame is flagged as slipping when the encoder-vs-truth speed ratio
#: error exceeds this threshold.
SLIP_FLAG_THRESHOLD = 0.1

DURATION_MIN_S = 30.0
DURATION_MAX_S = 200.0


@dataclass(frozen=True)
class SoilProfile:
    """Phenomenological slip behavior of the ground."""

    base_slip: float = 0.05
    burst_rate_per_min: float = 2.0
    burst_gain: float = 0.2
    coupling: float = 0.1  # load-to-slip coefficient

    def __post_init__(self):
        if not 0.0 <= self.base_slip < 1.0:
            raise ValueError("base_slip must be in [0, 1)")
        if self.base_slip + self.burst_gain >= 1.0:
            raise ValueError("base_slip + burst_gain must stay below 1")
        if self.burst_rate_per_min < 0 or self.burst_gain < 0 or self.coupling < 0:
            raise ValueError("soil parameters must be non-negative")

    @classmethod
    def zero_slip(cls) -> "SoilProfile":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def mild(cls) -> "SoilProfile":
        return cls(0.05, 2.5, 0.22, 0.12)

    @classmethod
    def harsh(cls) -> "SoilProfile":
        return cls(0.18, 8.0, 0.35, 0.30)

    def to_json(self) -> dict:
        return {
            "base_slip": self.base_slip,
            "burst_rate_per_min": self.burst_rate_per_min,
            "burst_gain": self.burst_gain,
            "coupling": self.coupling,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SoilProfile":
        return cls(**{k: float(v) for k, v in obj.items()})


@dataclass(frozen=True)
class SimNoise:
    """Sensor corruption levels; ``zero()`` disables everything."""

    gyro_noise: float = 0.02  # rad/s rms white noise
    accel_noise: float = 0.3  # m/s^2 rms white noise
    accel_vibration: float = 1.0  # m/s^2 engine-band sinusoid amplitude
    gyro_vibration: float = 0.05  # rad/s engine-band sinusoid amplitude
    vibration_hz: float = 30.0
    gyro_bias: float = 0.002  # rad/s per-episode constant, rms
    accel_bias: float = 0.05  # m/s^2 per-episode constant, rms
    attitude_noise: float = 0.005  # rad rms on reported posture
    encoder_noise: float = 0.004  # m/s rms on crawler speeds
    pressure_noise: float = 0.1  # MPa rms on hydraulic channels
    channel_noise: float = 1.0  # scale on miscellaneous channel noise

    @classmethod
    def zero(cls) -> "SimNoise":
        return cls(0.0, 0.0, 0.0, 0.0, 30.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SimNoise":
        return cls(**{k: float(v) for k, v in obj.items()})


@dataclass(frozen=True)
class Scenario:
    """One driving scenario instance: shape, duration, soil, and seed."""

    name: str
    duration_s: float = 60.0
    seed: int = 0
    soil: SoilProfile = field(default_factory=SoilProfile)
    noise: SimNoise = field(default_factory=SimNoise)
    bu_only_signature: bool = False  # restrict the slip signature to bu channels

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES}")
        if not DURATION_MIN_S <= self.duration_s <= DURATION_MAX_S:
            raise ValueError(
                f"duration {self.duration_s}s outside [{DURATION_MIN_S}, {DURATION_MAX_S}]"
            )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "soil": self.soil.to_json(),
            "noise": self.noise.to_json(),
            "bu_only_signature": self.bu_only_signature,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Scenario":
        return cls(
            name=obj["name"],
            duration_s=float(obj.get("duration_s", 60.0)),
            seed=int(obj.get("seed", 0)),
            soil=SoilProfile.from_json(obj["soil"]) if "soil" in obj else SoilProfile(),
            noise=SimNoise.from_json(obj["noise"]) if "noise" in obj else SimNoise(),
            bu_only_signature=bool(obj.get("bu_only_signature", False)),
        )


@dataclass
class Episode:
    """Generated episode: truth streams plus native-rate sensor channels."""

    scenario: Scenario
    times: np.ndarray  # (n,) master clock
    truth_pose: np.ndarray  # (n, 6)
    truth_v_local: np.ndarray  # (n, 3)
    slip_ratio: np.ndarray  # (n,)
    slip_flag: np.ndarray  # (n,) bool
    load: np.ndarray  # (n,) drawbar load, arbitrary units
    channels_100hz: dict[str, np.ndarray]
    times_10hz: np.ndarray
    channels_10hz: dict[str, np.ndarray]

    @property
    def frame_count(self) -> int:
        return len(self.times)


# ---------------------------------------------------------------------------
# Command profiles per scenario
# ---------------------------------------------------------------------------


def _lowpass(x: np.ndarray, tau: float, dt: float = DT) -> np.ndarray:
    """First-order low-pass, initialized at the first sample."""
    if tau <= 0:
        return np.array(x, float)
    alpha = dt / (tau + dt)
    out = np.empty_like(np.asarray(x, float))
    acc = float(x[0])
    for i, value in enumerate(x):
        acc += alpha * (float(value) - acc)
        out[i] = acc
    return out


def _piecewise(t: np.ndarray, knots: list[tuple[float, float]], tau: float = 1.0) -> np.ndarray:
    xp = [k[0] for k in knots]
    fp = [k[1] for k in knots]
    return _lowpass(np.interp(t, xp, fp), tau)


def _shaped_noise(rng: np.random.Generator, n: int, tau: float) -> np.ndarray:
    sig = _lowpass(rng.normal(0.0, 1.0, n), tau)
    scale = float(np.std(sig))
    return sig / scale if scale > 0 else sig


def _profile_straight(t, rng):
    n = len(t)
    return dict(v=np.full(n, 1.0), omega=np.zeros(n), blade=np.zeros(n),
                roll=np.zeros(n), pitch=np.zeros(n))


def _profile_low_slalom(t, rng):
    n = len(t)
    return dict(v=np.full(n, 1.0), omega=0.12 * np.sin(2 * np.pi * 0.05 * t),
                blade=np.zeros(n), roll=np.zeros(n), pitch=np.zeros(n))


def _profile_high_slalom(t, rng):
    n = len(t)
    return dict(v=np.full(n, 1.0), omega=0.35 * np.sin(2 * np.pi * 0.18 * t),
                blade=np.zeros(n), roll=np.zeros(n), pitch=np.zeros(n))


def _profile_slalom_carrying(t, rng):
    n = len(t)
    blade = 0.5 + 0.1 * np.sin(2 * np.pi * 0.03 * t)
    return dict(v=np.full(n, 0.8), omega=0.25 * np.sin(2 * np.pi * 0.12 * t),
                blade=blade, roll=np.zeros(n), pitch=np.zeros(n))


def _profile_climb_slope(t, rng):
    n = len(t)
    T = t[-1]
    pitch = _piecewise(t, [(0, 0), (0.2 * T, 0), (0.35 * T, 0.14), (0.7 * T, 0.14), (0.9 * T, 0), (T, 0)])
    return dict(v=np.full(n, 0.8), omega=np.zeros(n), blade=np.zeros(n),
                roll=np.zeros(n), pitch=pitch)


def _profile_cross_slope(t, rng):
    n = len(t)
    T = t[-1]
    roll = _piecewise(t, [(0, 0), (0.15 * T, 0), (0.3 * T, 0.10), (0.5 * T, 0.10),
                          (0.65 * T, -0.10), (0.85 * T, -0.10), (T, 0)])
    return dict(v=np.full(n, 0.8), omega=np.zeros(n), blade=np.zeros(n),
                roll=roll, pitch=np.zeros(n))


def _profile_excavation(t, rng):
    phase = np.mod(t, 20.0)
    v = np.where(phase < 5.0, 0.8, np.where(phase < 12.0, 0.3, np.where(phase < 17.0, -0.6, 0.0)))
    blade = np.where(phase < 5.0, 0.05, np.where(phase < 12.0, 0.2 + 0.8 * (phase - 5.0) / 7.0,
                                                 np.where(phase < 17.0, 0.1, 0.05)))
    n = len(t)
    return dict(v=_lowpass(v, 0.4), omega=np.zeros(n), blade=_lowpass(blade, 0.3),
                roll=np.zeros(n), pitch=np.zeros(n))


def _profile_turn(t, rng):
    phase = np.mod(t, 16.0)
    pivot = (np.mod(phase, 8.0) >= 4.0)
    sign = np.where(phase < 8.0, 1.0, -1.0)
    v = np.where(pivot, 0.05, 0.8)
    omega = np.where(pivot, 0.35 * sign, 0.0)
    n = len(t)
    return dict(v=_lowpass(v, 0.3), omega=_lowpass(omega, 0.3), blade=np.zeros(n),
                roll=np.zeros(n), pitch=np.zeros(n))


def _profile_grading(t, rng):
    n = len(t)
    blade = 0.35 + 0.1 * np.sin(2 * np.pi * 0.05 * t)
    return dict(v=np.full(n, 0.6), omega=0.03 * np.sin(2 * np.pi * 0.02 * t),
                blade=blade, roll=np.zeros(n), pitch=np.zeros(n))


def _profile_random(t, rng):
    n = len(t)
    v = np.clip(0.5 + 0.6 * _shaped_noise(rng, n, 3.0), -0.5, 1.5)
    omega = np.clip(0.2 * _shaped_noise(rng, n, 2.0), -0.35, 0.35)
    blade = np.clip(0.25 + 0.25 * _shaped_noise(rng, n, 5.0), 0.0, 1.0)
    return dict(v=_lowpass(v, 0.5), omega=_lowpass(omega, 0.5), blade=_lowpass(blade, 0.8),
                roll=np.zeros(n), pitch=np.zeros(n))


_PROFILES: dict[str, Callable] = {
    "straight": _profile_straight,
    "low_slalom": _profile_low_slalom,
    "high_slalom": _profile_high_slalom,
    "slalom_carrying": _profile_slalom_carrying,
    "climb_slope": _profile_climb_slope,
    "cross_slope": _profile_cross_slope,
    "excavation": _profile_excavation,
    "turn": _profile_turn,
    "grading": _profile_grading,
    "random": _profile_random,
}


def _burst_envelope(t: np.ndarray, rng: np.random.Generator, rate_per_min: float) -> np.ndarray:
    """Sum of seeded Poisson load pulses with fast rise and ~1 s decay."""
    env = np.zeros_like(t)
    if rate_per_min <= 0:
        return env
    duration = float(t[-1]) if len(t) else 0.0
    count = int(rng.poisson(rate_per_min * duration / 60.0))
    starts = np.sort(rng.uniform(0.0, duration, count))
    amps = rng.uniform(0.5, 1.0, count)
    for start, amp in zip(starts, amps):
        rel = t - start
        mask = rel >= 0
        env[mask] += amp * (1.0 - np.exp(-rel[mask] / 0.15)) * np.exp(-rel[mask] / 1.2)
    return np.clip(env, 0.0, 1.5)


# ---------------------------------------------------------------------------
# Episode generation
# ---------------------------------------------------------------------------


def generate_episode(scenario: Scenario) -> Episode:
    """Generate one deterministic episode for the scenario and its seed."""
    rng = np.random.default_rng([scenario.seed, SCENARIO_NAMES.index(scenario.name)])
    n = int(round(scenario.duration_s / DT))
    t = np.arange(n) * DT
    soil = scenario.soil
    noise = scenario.noise

    prof = _PROFILES[scenario.name](t, rng)
    v_cmd, omega_cmd = prof["v"], prof["omega"]
    blade = prof["blade"]
    terrain_roll, terrain_pitch = prof["roll"], prof["pitch"]

    # Drawbar load and the slip it provokes.
    burst = _burst_envelope(t, rng, soil.burst_rate_per_min)
    load_steady_raw = (
        0.25 * np.abs(v_cmd)
        + 1.1 * blade
        + 0.9 * np.abs(omega_cmd * v_cmd)
        + 0.6 * np.abs(omega_cmd)  # pivot drag: tracks shear the ground
        + 1.5 * np.maximum(terrain_pitch, 0.0) * np.abs(v_cmd)
    )
    load_steady = _lowpass(load_steady_raw, 0.15)
    load = _lowpass(load_steady_raw + burst, 0.15)
    slip_target = np.clip(
        soil.base_slip + soil.burst_gain * np.clip(burst, 0.0, 1.0) + soil.coupling * load_steady,
        0.0,
        0.9,
    )
    slip = np.clip(_lowpass(slip_target, 0.25), 0.0, 0.9)

    # True body motion: commanded kinematics scaled by (1 - slip), plus a
    # small lateral skid proportional to the turning rate.
    v_true = (1.0 - slip) * v_cmd
    omega_true = (1.0 - slip) * omega_cmd
    v_body = np.column_stack([v_true, 0.15 * omega_true * v_true, np.zeros(n)])

    # Desired Euler-angle rates: terrain attitude tracking plus the true
    # yaw rate; converted to body rates so the integrated pose follows.
    droll = np.zeros(n)
    dpitch = np.zeros(n)
    droll[:-1] = np.diff(terrain_roll) / DT
    dpitch[:-1] = np.diff(terrain_pitch) / DT
    euler_rates = np.column_stack([droll, dpitch, omega_true])

    pose = np.empty((n, 6))
    pose[0] = (0.0, 0.0, 0.0, terrain_roll[0], terrain_pitch[0], 0.0)
    omega_body = np.empty((n, 3))
    for k in range(n):
        omega_body[k] = euler_rates_to_body(pose[k, 3:]) @ euler_rates[k]
        if k + 1 < n:
            pose[k + 1] = transition(pose[k], v_body[k], omega_body[k], DT)

    # Slip flag: encoder-vs-truth relative speed error above threshold.
    enc_speed = v_cmd
    ratio_err = np.abs(enc_speed - v_true) / np.maximum(np.abs(enc_speed), 0.1)
    slip_flag = ratio_err > SLIP_FLAG_THRESHOLD

    # --- IMU -------------------------------------------------------------
    accel_bias = rng.normal(0.0, noise.accel_bias, 3)
    gyro_bias = rng.normal(0.0, noise.gyro_bias, 3)
    vib_phase = rng.uniform(0.0, 2 * np.pi, 6)
    roll_t, pitch_t = pose[:, 3], pose[:, 4]
    g_dir = GRAVITY * np.column_stack(
        [np.sin(pitch_t), np.cos(pitch_t) * np.sin(roll_t), np.cos(pitch_t) * np.cos(roll_t)]
    )
    a_lin = np.zeros((n, 3))
    a_lin[:-1] = np.diff(v_body, axis=0) / DT
    a_lin += np.cross(omega_body, v_body)

    def vib(amp: float, phase: float) -> np.ndarray:
        if amp == 0.0:
            return np.zeros(n)
        return amp * np.sin(2 * np.pi * noise.vibration_hz * t + phase) + 0.25 * amp * rng.normal(
            0.0, 1.0, n
        )

    accel = g_dir + a_lin + accel_bias
    gyro = omega_body + gyro_bias
    for axis in range(3):
        accel[:, axis] += vib(noise.accel_vibration, vib_phase[axis])
        gyro[:, axis] += vib(noise.gyro_vibration, vib_phase[3 + axis])
    accel += rng.normal(0.0, 1.0, (n, 3)) * noise.accel_noise
    gyro += rng.normal(0.0, 1.0, (n, 3)) * noise.gyro_noise
    imu_rpy = pose[:, 3:] + rng.normal(0.0, 1.0, (n, 3)) * noise.attitude_noise

    # --- Fast (100 Hz) channels ------------------------------------------
    cn = noise.channel_noise
    dblade = np.zeros(n)
    dblade[:-1] = np.diff(blade) / DT
    load_eng = load_steady if scenario.bu_only_signature else load
    depth = 0.45 * blade

    ch100 = {
        "dt": np.full(n, DT),
        "accel_x": accel[:, 0],
        "accel_y": accel[:, 1],
        "accel_z": accel[:, 2],
        "gyro_x": gyro[:, 0],
        "gyro_y": gyro[:, 1],
        "gyro_z": gyro[:, 2],
        "imu_roll": imu_rpy[:, 0],
        "imu_pitch": imu_rpy[:, 1],
        "imu_yaw": imu_rpy[:, 2],
        "fnr_gear": np.where(v_cmd > 0.02, 0.0, np.where(v_cmd < -0.02, 2.0, 1.0)),
        "steer_stroke": 100.0 * np.clip(np.abs(omega_cmd) / 0.5, 0.0, 1.0)
        + cn * 0.8 * rng.normal(0.0, 1.0, n),
        "engine_speed": 1050.0 + 420.0 * np.clip(np.abs(v_cmd), 0.0, 1.5) + 260.0 * load_eng
        + cn * 15.0 * rng.normal(0.0, 1.0, n),
        "engine_torque": 160.0 + 540.0 * load_eng + cn * 20.0 * rng.normal(0.0, 1.0, n),
        "blade_lift_stroke": np.clip(100.0 * blade, 0.0, 100.0) + cn * rng.normal(0.0, 1.0, n),
        "blade_tilt_stroke": 8.0 * blade * (1.0 + 0.5 * np.sin(2 * np.pi * 0.07 * t))
        + cn * 0.5 * rng.normal(0.0, 1.0, n),
        "cmd_current_lift": 250.0 * np.abs(dblade) + 80.0 * blade + cn * 5.0 * rng.normal(0.0, 1.0, n),
        "cmd_current_tilt": 120.0 * blade * np.abs(np.sin(2 * np.pi * 0.07 * t))
        + cn * 4.0 * rng.normal(0.0, 1.0, n),
        "cmd_current_angle": 60.0 * blade + cn * 3.0 * rng.normal(0.0, 1.0, n),
        "blade_edge_rx": 3.05 - 0.12 * blade + cn * 0.004 * rng.normal(0.0, 1.0, n),
        "blade_edge_ry": np.full(n, -1.98) + cn * 0.004 * rng.normal(0.0, 1.0, n),
        "blade_edge_rz": 0.15 - depth + cn * 0.004 * rng.normal(0.0, 1.0, n),
        "blade_edge_lx": 3.05 - 0.12 * blade + cn * 0.004 * rng.normal(0.0, 1.0, n),
        "blade_edge_ly": np.full(n, 1.98) + cn * 0.004 * rng.normal(0.0, 1.0, n),
        "blade_edge_lz": 0.15 - depth + cn * 0.004 * rng.normal(0.0, 1.0, n),
    }

    # --- Slow (10 Hz) channels -------------------------------------------
    slow = slice(None, None, SLOW_EVERY)
    t10 = t[slow]
    m = len(t10)
    v_r_cmd = v_cmd + 0.5 * TREAD_M * omega_cmd
    v_l_cmd = v_cmd - 0.5 * TREAD_M * omega_cmd
    omega_press = 2.0 * omega_cmd[slow]
    load10 = load[slow]
    slip10 = slip[slow]
    blade10 = blade[slow]
    pn = noise.pressure_noise

    p_rf = 8.0 + 11.0 * load10 - 9.0 * slip10 + 1.2 * omega_press + pn * rng.normal(0.0, 1.0, m)
    p_lf = 8.0 + 11.0 * load10 - 9.0 * slip10 - 1.2 * omega_press + pn * rng.normal(0.0, 1.0, m)
    p_rr = 7.0 + 9.0 * load10 + 1.0 * omega_press + pn * rng.normal(0.0, 1.0, m)
    p_lr = 7.0 + 9.0 * load10 - 1.0 * omega_press + pn * rng.normal(0.0, 1.0, m)
    blade_pump = 13.0 + 27.0 * blade10 * (0.7 + 0.5 * np.clip(load10, 0.0, 2.0)) + pn * rng.normal(
        0.0, 1.0, m
    )
    if scenario.bu_only_signature:
        traction = (16.0 + 20.0 * load_steady[slow]) * np.clip(np.abs(v_cmd[slow]), 0.0, 2.0)
    else:
        traction = 0.5 * (p_rf + p_lf + p_rr + p_lr) * np.clip(np.abs(v_cmd[slow]), 0.0, 2.0)
    traction = traction + cn * 4.0 * rng.normal(0.0, 1.0, m)

    ch10 = {
        "crawler_right": v_r_cmd[slow] + noise.encoder_noise * rng.normal(0.0, 1.0, m),
        "crawler_left": v_l_cmd[slow] + noise.encoder_noise * rng.normal(0.0, 1.0, m),
        "speed_gear": np.digitize(np.abs(v_cmd[slow]), [0.7, 1.2]).astype(float),
        "steer_state": np.where(omega_cmd[slow] < -0.03, 1.0, np.where(omega_cmd[slow] > 0.03, 2.0, 0.0)),
        "traction_force": traction,
        "blade_state": np.where(dblade[slow] < -0.02, 1.0, np.where(dblade[slow] > 0.02, 2.0, 0.0)),
        "hst_pressure_rf": p_rf,
        "hst_pressure_lf": p_lf,
        "hst_pressure_rr": p_rr,
        "hst_pressure_lr": p_lr,
        "blade_pump_pressure": blade_pump,
        "relief_level": (blade_pump >= 36.0).astype(float),
        "blade_lift_angle": 12.0 - 16.0 * blade10 + cn * 0.25 * rng.normal(0.0, 1.0, m),
    }

    return Episode(
        scenario=scenario,
        times=t,
        truth_pose=pose,
        truth_v_local=v_body,
        slip_ratio=slip,
        slip_flag=slip_flag,
        load=load,
        channels_100hz=ch100,
        times_10hz=t10,
        channels_10hz=ch10,
    )


def export_episode(episode: Episode, out_dir: Path | str, episode_id: str) -> dict[str, str]:
    """Write the episode's three CSV files; returns relative file paths."""
    out_dir = Path(out_dir)
    rel = {
        "100hz": f"ep{episode_id}_100hz.csv",
        "10hz": f"ep{episode_id}_10hz.csv",
        "truth": f"ep{episode_id}_truth.csv",
    }
    dataio.write_table(out_dir / rel["100hz"], episode.times, episode.channels_100hz)
    dataio.write_table(out_dir / rel["10hz"], episode.times_10hz, episode.channels_10hz)
    truth_cols = {
        "x": episode.truth_pose[:, 0],
        "y": episode.truth_pose[:, 1],
        "z": episode.truth_pose[:, 2],
        "roll": episode.truth_pose[:, 3],
        "pitch": episode.truth_pose[:, 4],
        "yaw": episode.truth_pose[:, 5],
        "vx": episode.truth_v_local[:, 0],
        "vy": episode.truth_v_local[:, 1],
        "vz": episode.truth_v_local[:, 2],
        "slip_flag": episode.slip_flag.astype(float),
        "slip_ratio": episode.slip_ratio,
    }
    dataio.write_table(out_dir / rel["truth"], episode.times, truth_cols)
    return rel


def default_suite(
    replicates: int = 3,
    base_seed: int = 0,
    duration_s: float = 40.0,
    bu_only_signature: bool = False,
) -> list[Scenario]:
    """One scenario instance per (name, replicate) with scenario-matched soils."""
    harsh = {"high_slalom", "slalom_carrying", "excavation", "random"}
    scenarios = []
    for idx, name in enumerate(SCENARIO_NAMES):
        if name == "straight":
            soil = SoilProfile.zero_slip()
        elif name in harsh:
            soil = SoilProfile.harsh()
        else:
            soil = SoilProfile.mild()
        for rep in range(replicates):
            scenarios.append(
                Scenario(
                    name=name,
                    duration_s=duration_s,
                    seed=base_seed * 10000 + idx * 100 + rep,
                    soil=soil,
                    bu_only_signature=bu_only_signature,
                )
            )
    return scenarios
