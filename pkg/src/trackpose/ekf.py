"""Extended Kalman filter for pose tracking from body velocity and IMU data.

State vector (6 elements)
-------------------------
    s[0:3] = global position [x, y, z]          (m)
    s[3:6] = attitude [roll, pitch, yaw]        (rad, wrapped to (-pi, pi])

The prediction step advances the position with the body-to-global
rotation applied to an externally supplied local velocity, and the
attitude with the Euler-rate mapping applied to the gyro rates.  The
update step corrects roll and pitch from the tilt implied by the
accelerometer, assuming the vehicle is at rest or in (near) constant
velocity motion; the measurement noise absorbs violations.

All steps are pure ``FilterState -> FilterState`` functions.  A single
filter instance is advanced sequentially; distinct instances may run on
distinct threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .geometry import PITCH_LIMIT, PitchSingularity, wrap_angle

GRAVITY = 9.80665  # m/s^2

#: Condition-number limit for the 2x2 innovation covariance.
INNOVATION_COND_LIMIT = 1e12

#: Constant observation Jacobian: the measurement selects (roll, pitch).
J_H = np.array(
    [
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    ]
)


class NonFiniteInput(ValueError):
    """A state, covariance, or control contains NaN or infinity."""


class DegenerateAcceleration(ValueError):
    """Accelerometer vector unusable for deriving roll/pitch."""


class SingularInnovation(ValueError):
    """Innovation covariance is numerically singular."""


class FilterStepError(RuntimeError):
    """A filter step failed; carries the offending frame index."""

    def __init__(self, frame: int, message: str):
        super().__init__(f"frame {frame}: {message}")
        self.frame = frame


def _require_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteInput(f"{what} contains non-finite values: {arr!r}")
    return arr


@dataclass(frozen=True)
class ControlInput:
    """Local velocity, body angular velocity, and the step interval."""

    v: np.ndarray  # (3,) m/s, body frame
    omega: np.ndarray  # (3,) rad/s, body frame
    dt: float  # s
    dt_max: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "v", _require_finite(np.asarray(self.v, float).reshape(3), "control velocity"))
        object.__setattr__(self, "omega", _require_finite(np.asarray(self.omega, float).reshape(3), "control angular velocity"))
        if not (0.0 < self.dt <= self.dt_max):
            raise ValueError(f"dt = {self.dt} outside (0, {self.dt_max}]")


@dataclass(frozen=True)
class AttitudeObservation:
    """Roll/pitch derived from the accelerometer, radians."""

    roll: float
    pitch: float

    def __post_init__(self):
        if not (np.isfinite(self.roll) and np.isfinite(self.pitch)):
            raise NonFiniteInput("attitude observation is non-finite")
        if not -np.pi < self.roll <= np.pi:
            raise ValueError(f"roll observation {self.roll} outside (-pi, pi]")
        if not abs(self.pitch) < np.pi / 2:
            raise ValueError(f"pitch observation {self.pitch} outside (-pi/2, pi/2)")


@dataclass(frozen=True)
class NoiseConfig:
    """Process (6x6) and measurement (2x2) noise covariances."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _require_finite(np.asarray(self.Q, float), "Q")
        R = _require_finite(np.asarray(self.R, float), "R")
        for name, mat, dim in (("Q", Q, 6), ("R", R, 2)):
            if mat.shape != (dim, dim):
                raise ValueError(f"{name} must be {dim}x{dim}, got {mat.shape}")
            diag = np.diagonal(mat)
            if (mat == np.diag(diag)).all():
                # Diagonal fast path: constructed per filter step in the
                # default configuration.
                if diag.min() < -1e-9:
                    raise ValueError(f"{name} is not positive semidefinite")
                continue
            if np.abs(mat - mat.T).max() > 1e-9:
                raise ValueError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(mat).min() < -1e-9:
                raise ValueError(f"{name} is not positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass
class FilterState:
    """State estimate and its 6x6 error covariance.

    Takes ownership of the arrays passed in (no defensive copy); the
    filter steps always construct from freshly computed arrays.
    """

    state: np.ndarray  # (6,) [x, y, z, roll, pitch, yaw]
    cov: np.ndarray  # (6, 6)

    def __post_init__(self):
        self.state = _require_finite(np.asarray(self.state, dtype=float).reshape(6), "state")
        self.cov = _require_finite(np.asarray(self.cov, dtype=float).reshape(6, 6), "covariance")

    def validate(self, atol: float = 1e-9) -> None:
        """Check symmetry and positive semidefiniteness of the covariance."""
        if not np.allclose(self.cov, self.cov.T, atol=atol):
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -atol:
            raise ValueError("covariance is not positive semidefinite")


@dataclass
class Trajectory:
    """Time-indexed pose sequence, optionally annotated with slip flags."""

    times: np.ndarray  # (n,) s, strictly increasing
    poses: np.ndarray  # (n, 6)
    slip_flags: Optional[np.ndarray] = None  # (n,) bool

    def __post_init__(self):
        self.times = np.asarray(self.times, float).reshape(-1)
        self.poses = np.asarray(self.poses, float).reshape(-1, 6)
        if len(self.times) != len(self.poses):
            raise ValueError("times and poses lengths differ")
        if len(self.times) == 0:
            raise ValueError("trajectory must contain at least one pose")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("timestamps must strictly increase")
        if self.slip_flags is not None:
            self.slip_flags = np.asarray(self.slip_flags, bool).reshape(-1)
            if len(self.slip_flags) != len(self.times):
                raise ValueError("slip flags length differs from times")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :3]


def initial_filter_state(pose, position_var: float = 1e-4, angle_var: float = 1e-4) -> FilterState:
    """Filter state anchored at a known pose with a small diagonal covariance."""
    p = np.array(pose, dtype=float).reshape(6)
    p[3:] = wrap_angle(p[3:])
    cov = np.diag([position_var] * 3 + [angle_var] * 3)
    return FilterState(p, cov)


def default_noise(dt: float) -> NoiseConfig:
    """Default diagonal noise covariances scaled by the step interval."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    q_pos = 0.1 * dt * dt
    q_ang = 0.01 * dt * dt
    return NoiseConfig(
        Q=np.diag([q_pos, q_pos, q_pos, q_ang, q_ang, q_ang]),
        R=np.diag([0.01, 0.01]),
    )


def transition(pose: np.ndarray, v, omega, dt: float) -> np.ndarray:
    """One forward-Euler step of the kinematic motion model.

    Position advances by the body velocity rotated into the global frame;
    attitude advances by the body rates mapped to Euler-angle rates.
    Angles are re-wrapped.  Runs per frame, so the rotation formulas are
    expanded inline; equivalence with the matrix helpers is pinned by the
    dead-reckoning oracle tests.
    """
    roll, pitch, yaw = float(pose[3]), float(pose[4]), float(pose[5])
    if not (math.isfinite(roll) and math.isfinite(pitch) and math.isfinite(yaw)):
        raise NonFiniteInput(f"attitude contains non-finite entries: {pose[3:]}")
    if not abs(pitch) < PITCH_LIMIT:
        raise PitchSingularity(
            f"|pitch| = {abs(pitch):.6f} rad is within the guard band of pi/2"
        )
    vx, vy, vz = float(v[0]) * dt, float(v[1]) * dt, float(v[2]) * dt
    wx, wy, wz = float(omega[0]) * dt, float(omega[1]) * dt, float(omega[2]) * dt
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            float(pose[0]) + cp * cy * vx + (sr * sp * cy - cr * sy) * vy + (cr * sp * cy + sr * sy) * vz,
            float(pose[1]) + cp * sy * vx + (sr * sp * sy + cr * cy) * vy + (cr * sp * sy - sr * cy) * vz,
            float(pose[2]) - sp * vx + sr * cp * vy + cr * cp * vz,
            wrap_angle(roll + wx + sr * sp / cp * wy + cr * sp / cp * wz),
            wrap_angle(pitch + cr * wy - sr * wz),
            wrap_angle(yaw + sr / cp * wy + cr / cp * wz),
        ]
    )


def transition_jacobian(pose: np.ndarray, v, omega, dt: float) -> np.ndarray:
    """Analytic Jacobian of :func:`transition` with respect to the state."""
    roll, pitch, yaw = float(pose[3]), float(pose[4]), float(pose[5])
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    tp = sp / cp
    sec2 = 1.0 / (cp * cp)
    gate = sr * wy + cr * wz

    # Identity plus dt-scaled partials of the rotated velocity (position
    # rows) and of the Euler-rate mapping (attitude rows) w.r.t. attitude.
    return np.array(
        [
            [1, 0, 0,
             ((cr * sp * cy + sr * sy) * vy + (cr * sy - sr * sp * cy) * vz) * dt,
             (-sp * cy * vx + sr * cp * cy * vy + cr * cp * cy * vz) * dt,
             (-cp * sy * vx - (sr * sp * sy + cr * cy) * vy + (sr * cy - cr * sp * sy) * vz) * dt],
            [0, 1, 0,
             ((cr * sp * sy - sr * cy) * vy - (sr * sp * sy + cr * cy) * vz) * dt,
             (-sp * sy * vx + sr * cp * sy * vy + cr * cp * sy * vz) * dt,
             (cp * cy * vx + (sr * sp * cy - cr * sy) * vy + (cr * sp * cy + sr * sy) * vz) * dt],
            [0, 0, 1,
             (cr * cp * vy - sr * cp * vz) * dt,
             (-cp * vx - sr * sp * vy - cr * sp * vz) * dt,
             0],
            [0, 0, 0,
             1 + (cr * tp * wy - sr * tp * wz) * dt,
             gate * sec2 * dt,
             0],
            [0, 0, 0, (-sr * wy - cr * wz) * dt, 1, 0],
            [0, 0, 0,
             ((cr * wy - sr * wz) / cp) * dt,
             gate * sp * sec2 * dt,
             1],
        ]
    )


def predict(fs: FilterState, u: ControlInput, noise: NoiseConfig) -> FilterState:
    """EKF prediction: propagate the state and covariance through one step.

    Non-finite inputs surface as :class:`NonFiniteInput` when the
    resulting state is validated at construction.
    """
    state = transition(fs.state, u.v, u.omega, u.dt)
    jac = transition_jacobian(fs.state, u.v, u.omega, u.dt)
    cov = jac @ fs.cov @ jac.T + noise.Q
    return FilterState(state, cov)


def attitude_from_accel(accel) -> AttitudeObservation:
    """Roll/pitch implied by the accelerometer under (near) static motion.

    Roll is ``atan2(a_y, a_z)``; pitch is ``atan(a_x / hypot(a_y, a_z))``.
    """
    a = np.asarray(accel, float).reshape(3)
    _require_finite(a, "acceleration")
    norm = float(np.linalg.norm(a))
    if norm <= 0.1 * GRAVITY:
        raise DegenerateAcceleration(
            f"|a| = {norm:.4f} m/s^2 too small to define a tilt direction"
        )
    lateral = float(np.hypot(a[1], a[2]))
    if lateral == 0.0:
        raise DegenerateAcceleration("acceleration parallel to the x-axis")
    roll = float(np.arctan2(a[1], a[2]))
    pitch = float(np.arctan2(a[0], lateral))
    return AttitudeObservation(roll, pitch)


def update(fs: FilterState, z: AttitudeObservation, noise: NoiseConfig) -> FilterState:
    """EKF update: correct roll/pitch from the attitude observation."""
    cov = fs.cov

    # Innovation covariance is symmetric 2x2: closed-form eigenvalues give
    # the condition number and the inverse without an SVD.
    s_a = cov[3, 3] + noise.R[0, 0]
    s_b = cov[3, 4] + noise.R[0, 1]
    s_d = cov[4, 4] + noise.R[1, 1]
    half_gap = np.hypot(0.5 * (s_a - s_d), s_b)
    eig_hi = 0.5 * (s_a + s_d) + half_gap
    eig_lo = 0.5 * (s_a + s_d) - half_gap
    if not np.isfinite(eig_hi) or eig_hi <= 0.0 or eig_hi > INNOVATION_COND_LIMIT * abs(eig_lo):
        raise SingularInnovation(
            f"innovation covariance condition number exceeds {INNOVATION_COND_LIMIT:g}"
        )
    det = s_a * s_d - s_b * s_b
    inv_innovation = np.array([[s_d, -s_b], [-s_b, s_a]]) / det
    gain = cov[:, 3:5] @ inv_innovation

    innovation = np.array(
        [wrap_angle(z.roll - fs.state[3]), wrap_angle(z.pitch - fs.state[4])]
    )

    state = fs.state + gain @ innovation
    state[3] = wrap_angle(state[3])
    state[4] = wrap_angle(state[4])
    state[5] = wrap_angle(state[5])
    cov = cov - gain @ cov[3:5, :]  # (I - K J_h) P with J_h a row selector
    cov = 0.5 * (cov + cov.T)
    return FilterState(state, cov)


def run_filter(
    init: FilterState,
    steps: Iterable[tuple[ControlInput, Optional[AttitudeObservation]]],
    noise: Optional[NoiseConfig] = None,
    t0: float = 0.0,
) -> Trajectory:
    """Run predict/update over a stream of per-frame inputs.

    Each element of ``steps`` is a control plus an optional attitude
    observation (``None`` skips the update for that frame).  With
    ``noise=None`` the default covariances are recomputed from each
    frame's interval.  Errors are re-raised with the frame index.
    """
    fs = init
    times = [t0]
    poses = [init.state.copy()]
    cached_dt: Optional[float] = None
    cached_noise: Optional[NoiseConfig] = None
    for frame, (u, obs) in enumerate(steps):
        try:
            if noise is not None:
                frame_noise = noise
            else:
                if u.dt != cached_dt:
                    cached_dt, cached_noise = u.dt, default_noise(u.dt)
                frame_noise = cached_noise
            fs = predict(fs, u, frame_noise)
            if obs is not None:
                fs = update(fs, obs, frame_noise)
        except (PitchSingularity, NonFiniteInput, SingularInnovation, ValueError) as exc:
            raise FilterStepError(frame, str(exc)) from exc
        times.append(times[-1] + u.dt)
        poses.append(fs.state.copy())
    return Trajectory(np.array(times), np.vstack(poses))
