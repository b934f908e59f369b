"""Local-velocity estimation: feature pipeline and the estimator interface.

Covers the path from raw mixed-rate sensor channels to a model-consumable
input: zero-order-hold alignment onto the master clock, train-set
standardization, fixed-length windowing for sequence models, and the
kinematic crawler-encoder model used both as a baseline and as the
fallback estimator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

#: Lateral distance between the crawler tracks, meters.
TREAD_M = 2.77

#: Master clock rate for all aligned feature streams, Hz.
MASTER_RATE_HZ = 100.0

#: Recognized feature groups, in cumulative ablation order:
#: "ic" = IMU + crawler encoder, "ve" = generic vehicle sensors,
#: "bu" = machine-specific blade/hydraulic sensors.
FEATURE_GROUPS = ("ic", "ve", "bu")

#: Defensive bound on estimated speed, m/s; far above the machine's top speed.
V_MAX_DEFAULT = 5.0


class SchemaMismatch(ValueError):
    """Input width or channel ordering does not match the expected schema."""


class ModelNotTrained(RuntimeError):
    """No usable model is available for inference."""


class EmptyChannel(ValueError):
    """A sensor channel carries no samples."""


@dataclass(frozen=True)
class ChannelSpec:
    """One named input channel with its feature-group tag."""

    name: str
    group: str
    categorical: bool = False
    standardize: bool = True

    def __post_init__(self):
        if self.group not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group {self.group!r} for {self.name!r}")


class FeatureSchema:
    """Ordered list of input channels; the contract between data and models."""

    def __init__(self, channels: Sequence[ChannelSpec]):
        names = [c.name for c in channels]
        if len(set(names)) != len(names):
            raise ValueError("duplicate channel names in schema")
        self.channels: tuple[ChannelSpec, ...] = tuple(channels)

    def __len__(self) -> int:
        return len(self.channels)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self.channels == other.channels

    def __repr__(self) -> str:
        return f"FeatureSchema({len(self.channels)} channels)"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(sorted({c.group for c in self.channels}, key=FEATURE_GROUPS.index))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def subset(self, groups: Sequence[str]) -> "FeatureSchema":
        """Channels whose group is in ``groups``, original order preserved."""
        wanted = set(groups)
        unknown = wanted - set(FEATURE_GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups: {sorted(unknown)}")
        return FeatureSchema([c for c in self.channels if c.group in wanted])

    def select(self, names: Sequence[str]) -> "FeatureSchema":
        by_name = {c.name: c for c in self.channels}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise SchemaMismatch(f"channels not in schema: {missing}")
        return FeatureSchema([by_name[n] for n in names])

    def to_json(self) -> list[dict]:
        return [
            {
                "name": c.name,
                "group": c.group,
                "categorical": c.categorical,
                "standardize": c.standardize,
            }
            for c in self.channels
        ]

    @classmethod
    def from_json(cls, obj: Sequence[Mapping]) -> "FeatureSchema":
        return cls(
            [
                ChannelSpec(
                    name=d["name"],
                    group=d["group"],
                    categorical=bool(d.get("categorical", False)),
                    standardize=bool(d.get("standardize", True)),
                )
                for d in obj
            ]
        )


def parse_groups(spec: str) -> tuple[str, ...]:
    """Parse a group selector like ``"ic+ve"`` into a validated tuple."""
    groups = tuple(g.strip().lower() for g in spec.split("+") if g.strip())
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group {g!r} in {spec!r}")
    return groups


def crawler_kinematics(v_right, v_left, tread: float = TREAD_M):
    """Forward speed and yaw rate from the two crawler-encoder speeds.

    ``v_x = (v_right + v_left) / 2`` and ``omega_z = (v_right - v_left) / tread``.
    Accepts scalars or arrays.
    """
    if tread <= 0:
        raise ValueError(f"tread must be positive, got {tread}")
    v_right = np.asarray(v_right, float)
    v_left = np.asarray(v_left, float)
    v_x = 0.5 * (v_right + v_left)
    omega_z = (v_right - v_left) / tread
    if v_x.ndim == 0:
        return float(v_x), float(omega_z)
    return v_x, omega_z


def align_to_master_clock(
    channels: Mapping[str, tuple[np.ndarray, np.ndarray]],
    master_times: np.ndarray,
) -> dict[str, np.ndarray]:
    """Zero-order-hold every channel onto the master clock.

    ``channels`` maps a name to ``(timestamps, values)`` at the channel's
    native rate.  Every master tick carries the most recent value of every
    channel; ticks before a channel's first sample carry its first value.
    The result is independent of the mapping's iteration order.
    """
    master_times = np.asarray(master_times, float)
    aligned: dict[str, np.ndarray] = {}
    for name in sorted(channels):
        ts, values = channels[name]
        ts = np.asarray(ts, float)
        values = np.asarray(values, float)
        if ts.size == 0:
            raise EmptyChannel(f"channel {name!r} has no samples")
        if ts.size != values.size:
            raise ValueError(f"channel {name!r}: timestamp/value lengths differ")
        if ts.size > 1 and not (np.diff(ts) > 0).all():
            raise ValueError(f"channel {name!r}: timestamps not strictly increasing")
        idx = np.searchsorted(ts, master_times, side="right") - 1
        aligned[name] = values[np.clip(idx, 0, None)]
    return aligned


def feature_matrix(aligned: Mapping[str, np.ndarray], schema: FeatureSchema) -> np.ndarray:
    """Stack aligned channels into an (n, len(schema)) matrix in schema order."""
    missing = [c.name for c in schema.channels if c.name not in aligned]
    if missing:
        raise SchemaMismatch(f"aligned channels missing from input: {missing}")
    return np.column_stack([np.asarray(aligned[c.name], float) for c in schema.channels])


@dataclass
class Standardizer:
    """Per-channel shift/scale fit on the training split only.

    Channels flagged ``standardize=False`` pass through unchanged; channels
    with zero variance are dropped from the retained schema (reported via
    ``dropped``).  ``transform`` consumes full-width rows matching
    ``input_schema`` and emits retained, standardized columns.
    """

    input_schema: FeatureSchema
    mean: np.ndarray  # (len(input_schema),)
    std: np.ndarray  # (len(input_schema),)
    keep: np.ndarray  # (len(input_schema),) bool
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        self.mean = np.asarray(self.mean, float).reshape(len(self.input_schema))
        self.std = np.asarray(self.std, float).reshape(len(self.input_schema))
        self.keep = np.asarray(self.keep, bool).reshape(len(self.input_schema))
        if (self.std[self.keep] <= 0).any():
            raise ValueError("retained channels must have positive scale")

    @property
    def schema(self) -> FeatureSchema:
        """Schema of the retained (model-facing) channels."""
        return FeatureSchema([c for c, k in zip(self.input_schema.channels, self.keep) if k])

    def _check_width(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values, float)
        if arr.shape[-1] != len(self.input_schema):
            raise SchemaMismatch(
                f"expected {len(self.input_schema)} channels, got {arr.shape[-1]}"
            )
        return arr

    def transform(self, values: np.ndarray) -> np.ndarray:
        arr = self._check_width(values)
        scaled = (arr - self.mean) / self.std
        return scaled[..., self.keep]

    def inverse(self, standardized: np.ndarray) -> np.ndarray:
        arr = np.asarray(standardized, float)
        if arr.shape[-1] != int(self.keep.sum()):
            raise SchemaMismatch(
                f"expected {int(self.keep.sum())} retained channels, got {arr.shape[-1]}"
            )
        return arr * self.std[self.keep] + self.mean[self.keep]

    def to_json(self) -> dict:
        return {
            "input_schema": self.input_schema.to_json(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "keep": self.keep.astype(int).tolist(),
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Standardizer":
        return cls(
            input_schema=FeatureSchema.from_json(obj["input_schema"]),
            mean=np.asarray(obj["mean"], float),
            std=np.asarray(obj["std"], float),
            keep=np.asarray(obj["keep"], bool),
            dropped=tuple(obj.get("dropped", ())),
        )


def fit_standardizer(schema: FeatureSchema, values: np.ndarray) -> Standardizer:
    """Fit per-channel mean and population standard deviation.

    ``values`` is (n, len(schema)) over the training split only.
    Zero-variance channels are dropped from the retained schema and logged.
    """
    arr = np.asarray(values, float)
    if arr.ndim != 2 or arr.shape[1] != len(schema):
        raise SchemaMismatch(f"expected (n, {len(schema)}) training matrix, got {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 samples to fit a standardizer")
    if not np.isfinite(arr).all():
        raise ValueError("training matrix contains non-finite values")

    mean = arr.mean(axis=0)
    std = arr.std(axis=0)  # population std (divide by n)
    keep = np.ones(len(schema), dtype=bool)
    dropped: list[str] = []
    for j, ch in enumerate(schema.channels):
        if not ch.standardize:
            mean[j] = 0.0
            std[j] = 1.0
        elif std[j] == 0.0:
            keep[j] = False
            std[j] = 1.0
            dropped.append(ch.name)
    if dropped:
        log.warning("dropping zero-variance channels: %s", dropped)
    return Standardizer(schema, mean, std, keep, tuple(dropped))


def apply_standardizer(standardizer: Standardizer, values: np.ndarray) -> np.ndarray:
    """Standardize one feature row or an (n, k) matrix."""
    return standardizer.transform(values)


class VelocityModel(Protocol):
    """Anything that maps a standardized feature input to a local velocity.

    ``window == 0`` means the model consumes one feature vector per frame;
    ``window > 0`` means it consumes a ``(window, input_width)`` block.
    """

    window: int
    input_width: int

    def predict(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class KinematicVelocityModel:
    """Fallback estimator wrapping the crawler kinematics: v = (v_x, 0, 0)."""

    tread: float = TREAD_M
    window: int = 0
    input_width: int = 2  # [v_right, v_left], raw m/s

    def predict(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, float)
        v_x, _ = crawler_kinematics(arr[..., 0], arr[..., 1], self.tread)
        v = np.zeros(arr.shape[:-1] + (3,))
        v[..., 0] = v_x
        return v


class WindowBuffer:
    """Per-stream sliding window; repeats the first frame until filled."""

    def __init__(self, length: int, width: int):
        if length < 1:
            raise ValueError("window length must be >= 1")
        self._buf = np.zeros((length, width))
        self._seen = 0

    def push(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, float).reshape(-1)
        if frame.shape[0] != self._buf.shape[1]:
            raise SchemaMismatch(
                f"frame width {frame.shape[0]} != buffer width {self._buf.shape[1]}"
            )
        if self._seen == 0:
            self._buf[:] = frame
        else:
            self._buf[:-1] = self._buf[1:]
            self._buf[-1] = frame
        self._seen += 1
        return self._buf.copy()


def sliding_windows(features: np.ndarray, length: int) -> np.ndarray:
    """All per-frame windows of ``features`` (n, k) as an (n, length, k) view.

    Frame ``i``'s window covers frames ``[i-length+1, i]``; frames before the
    start are front-padded with the first frame.
    """
    feats = np.asarray(features, float)
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {feats.shape}")
    if length < 1:
        raise ValueError("window length must be >= 1")
    padded = np.concatenate([np.repeat(feats[:1], length - 1, axis=0), feats], axis=0)
    view = np.lib.stride_tricks.sliding_window_view(padded, length, axis=0)
    return view.transpose(0, 2, 1)  # (n, length, k)


def estimate_velocity(model: VelocityModel, x: np.ndarray, v_max: float = V_MAX_DEFAULT) -> np.ndarray:
    """Run one inference and apply the sanity clamp on speed.

    ``x`` is a feature vector for frame models or a ``(window, width)``
    block for sequence models.  Outputs with norm above ``v_max`` are
    rescaled onto the bound (and logged).
    """
    if model is None:
        raise ModelNotTrained("no velocity model loaded")
    arr = np.asarray(x, float)
    if model.window > 0:
        if arr.shape != (model.window, model.input_width):
            raise SchemaMismatch(
                f"expected window ({model.window}, {model.input_width}), got {arr.shape}"
            )
    else:
        if arr.shape != (model.input_width,):
            raise SchemaMismatch(
                f"expected feature vector ({model.input_width},), got {arr.shape}"
            )
    v = np.asarray(model.predict(arr), float).reshape(3)
    if not np.isfinite(v).all():
        raise ValueError(f"model produced non-finite velocity: {v}")
    return clamp_speed(v, v_max)


def clamp_speed(v: np.ndarray, v_max: float = V_MAX_DEFAULT) -> np.ndarray:
    """Rescale velocity vectors whose norm exceeds the sanity bound."""
    v = np.asarray(v, float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    over = norm > v_max
    if over.any():
        log.warning("clamping %d velocity estimate(s) above %.1f m/s", int(over.sum()), v_max)
        scale = np.where(over, v_max / np.maximum(norm, 1e-12), 1.0)
        v = v * scale
    return v


def local_velocity_targets(times: np.ndarray, poses: np.ndarray) -> np.ndarray:
    """Training targets: body-frame velocity differenced from true poses.

    Central-differences the global positions, rotates each sample into the
    body frame of its own attitude, then smooths with a centered 5-tap
    moving average (shrinking at the edges).
    """
    times = np.asarray(times, float).reshape(-1)
    poses = np.asarray(poses, float)
    n = len(times)
    if poses.shape != (n, 6) or n < 3:
        raise ValueError("need (n, 6) poses with n >= 3 matching times")

    pos = poses[:, :3]
    v_global = np.empty_like(pos)
    v_global[1:-1] = (pos[2:] - pos[:-2]) / (times[2:] - times[:-2])[:, None]
    v_global[0] = (pos[1] - pos[0]) / (times[1] - times[0])
    v_global[-1] = (pos[-1] - pos[-2]) / (times[-1] - times[-2])

    roll, pitch, yaw = poses[:, 3], poses[:, 4], poses[:, 5]
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    gx, gy, gz = v_global[:, 0], v_global[:, 1], v_global[:, 2]
    # Rows of rot_xyz(rpy)^T applied sample-wise.
    v_local = np.column_stack(
        [
            cp * cy * gx + cp * sy * gy - sp * gz,
            (sr * sp * cy - cr * sy) * gx + (sr * sp * sy + cr * cy) * gy + sr * cp * gz,
            (cr * sp * cy + sr * sy) * gx + (cr * sp * sy - sr * cy) * gy + cr * cp * gz,
        ]
    )

    # Centered 5-tap moving average with clamped edges.
    csum = np.cumsum(v_local, axis=0)
    smoothed = np.empty_like(v_local)
    for i in range(n):
        lo = max(0, i - 2)
        hi = min(n - 1, i + 2)
        total = csum[hi] - (csum[lo - 1] if lo > 0 else 0.0)
        smoothed[i] = total / (hi - lo + 1)
    return smoothed
