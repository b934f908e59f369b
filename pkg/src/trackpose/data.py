"""Dataset layout, ingestion, and split construction.

An episode is three CSV files sharing one clock:

    ``ep<id>_100hz.csv``  fast sensor channels, one row per master tick
    ``ep<id>_10hz.csv``   slow sensor channels
    ``ep<id>_truth.csv``  reference pose / velocity / slip (optional at
                          inference time; required for training and scoring)

All files are UTF-8 with a header row, a ``t`` seconds column first, and
floats printed with 17 significant digits so values round-trip exactly.
A dataset directory also carries ``manifest.json`` listing its episodes
and their train/val/test assignment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .estimators import ChannelSpec, FeatureSchema

log = logging.getLogger(__name__)

RATE_FAST_HZ = 100.0
RATE_SLOW_HZ = 10.0

#: Columns reserved for the ground-truth table; they must never appear in
#: a sensor file or in a model input schema.
TRUTH_COLUMNS = ("x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "slip_flag", "slip_ratio")

# Sensor channel catalog: (name, group, categorical).  The ``dt`` channel
# feeds the filter's step interval and is passed through unstandardized.
CHANNELS_100HZ = (
    ("dt", "ic", False),
    ("accel_x", "ic", False),
    ("accel_y", "ic", False),
    ("accel_z", "ic", False),
    ("gyro_x", "ic", False),
    ("gyro_y", "ic", False),
    ("gyro_z", "ic", False),
    ("imu_roll", "ic", False),
    ("imu_pitch", "ic", False),
    ("imu_yaw", "ic", False),
    ("fnr_gear", "ve", True),
    ("steer_stroke", "ve", False),
    ("engine_speed", "ve", False),
    ("engine_torque", "ve", False),
    ("blade_lift_stroke", "bu", False),
    ("blade_tilt_stroke", "bu", False),
    ("cmd_current_lift", "bu", False),
    ("cmd_current_tilt", "bu", False),
    ("cmd_current_angle", "bu", False),
    ("blade_edge_rx", "bu", False),
    ("blade_edge_ry", "bu", False),
    ("blade_edge_rz", "bu", False),
    ("blade_edge_lx", "bu", False),
    ("blade_edge_ly", "bu", False),
    ("blade_edge_lz", "bu", False),
)
CHANNELS_10HZ = (
    ("crawler_right", "ic", False),
    ("crawler_left", "ic", False),
    ("speed_gear", "ve", True),
    ("steer_state", "ve", True),
    ("traction_force", "ve", False),
    ("blade_state", "bu", True),
    ("hst_pressure_rf", "bu", False),
    ("hst_pressure_lf", "bu", False),
    ("hst_pressure_rr", "bu", False),
    ("hst_pressure_lr", "bu", False),
    ("blade_pump_pressure", "bu", False),
    ("relief_level", "bu", True),
    ("blade_lift_angle", "bu", False),
)

FILE_KEYS = ("100hz", "10hz", "truth")


class MissingColumn(ValueError):
    """A required column is absent from a dataset file."""


class NonMonotoneTime(ValueError):
    """Timestamps in a dataset file do not strictly increase."""


class RateMismatch(ValueError):
    """A file's sample spacing disagrees with its nominal rate."""


class InsufficientEpisodes(ValueError):
    """Not enough episodes of a scenario to build the requested splits."""


class GroundTruthLeakage(ValueError):
    """A ground-truth column would reach the model input path."""


def default_schema() -> FeatureSchema:
    """Full input schema over the canonical sensor channels."""
    specs = [
        ChannelSpec(name, group, categorical, standardize=(name != "dt"))
        for name, group, categorical in CHANNELS_100HZ + CHANNELS_10HZ
    ]
    return FeatureSchema(specs)


def check_no_leakage(schema: FeatureSchema) -> FeatureSchema:
    """Reject schemas whose channels collide with ground-truth columns."""
    bad = sorted(set(schema.names) & set(TRUTH_COLUMNS))
    if bad:
        raise GroundTruthLeakage(f"ground-truth columns in model schema: {bad}")
    return schema


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def write_table(path: Path, times: np.ndarray, columns: Mapping[str, np.ndarray]) -> None:
    """Write one rate-group table; ``t`` first, 17-significant-digit floats."""
    frame = pd.DataFrame({"t": np.asarray(times, float)})
    for name, values in columns.items():
        arr = np.asarray(values, float)
        if arr.shape != frame["t"].shape:
            raise ValueError(f"column {name!r}: length {arr.shape} != {frame['t'].shape}")
        frame[name] = arr
    try:
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def _read_table(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=float)
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    if frame.columns[0] != "t":
        raise MissingColumn(f"{path}: first column must be 't', got {frame.columns[0]!r}")
    times = frame["t"].to_numpy()
    gaps = np.diff(times)
    if (gaps <= 0).any():
        row = int(np.argmax(gaps <= 0)) + 1
        raise NonMonotoneTime(f"{path}: timestamp does not increase at data row {row}")
    return frame

def _check_rate(path: Path, times: np.ndarray, nominal_hz: float, tol: float = 0.05) -> None:
    if len(times) < 2:
        return
    median_gap = float(np.median(np.diff(times)))
    nominal_gap = 1.0 / nominal_hz
    if abs(median_gap - nominal_gap) > tol * nominal_gap:
        raise RateMismatch(
            f"{path}: median sample gap {median_gap:.6g}s vs nominal {nominal_gap:.6g}s"
        )


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------


@dataclass
class TruthTable:
    """Reference pose and velocity at the master rate."""

    times: np.ndarray  # (n,)
    poses: np.ndarray  # (n, 6)
    v_local: np.ndarray  # (n, 3)
    slip_flag: np.ndarray  # (n,) bool
    slip_ratio: np.ndarray  # (n,)


@dataclass
class RawEpisode:
    """One parsed, validated episode; read-only after ingest."""

    episode_id: str
    times_100hz: np.ndarray
    channels_100hz: dict[str, np.ndarray]
    times_10hz: np.ndarray
    channels_10hz: dict[str, np.ndarray]
    truth: Optional[TruthTable] = None

    @property
    def frame_count(self) -> int:
        return len(self.times_100hz)

    def channel_tables(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """All sensor channels as name -> (timestamps, values)."""
        out = {name: (self.times_100hz, vals) for name, vals in self.channels_100hz.items()}
        out.update({name: (self.times_10hz, vals) for name, vals in self.channels_10hz.items()})
        return out


def ingest_episode(
    files: Mapping[str, Path | str],
    episode_id: str = "",
    schema: Optional[FeatureSchema] = None,
) -> RawEpisode:
    """Parse and validate one episode from its per-rate CSV files.

    ``files`` maps ``"100hz"``/``"10hz"`` (required) and ``"truth"``
    (optional) to paths.  With a ``schema``, every schema channel must be
    present in a sensor file.  Ground-truth column names in a sensor file
    or in the schema are a hard error.
    """
    for key in ("100hz", "10hz"):
        if key not in files:
            raise MissingColumn(f"episode {episode_id!r}: missing {key} file entry")

    fast_path = Path(files["100hz"])
    slow_path = Path(files["10hz"])
    fast = _read_table(fast_path)
    slow = _read_table(slow_path)
    _check_rate(fast_path, fast["t"].to_numpy(), RATE_FAST_HZ)
    _check_rate(slow_path, slow["t"].to_numpy(), RATE_SLOW_HZ)

    for path, frame in ((fast_path, fast), (slow_path, slow)):
        leaked = sorted(set(frame.columns) & set(TRUTH_COLUMNS))
        if leaked:
            raise GroundTruthLeakage(f"{path}: ground-truth columns in sensor file: {leaked}")

    channels_fast = {c: fast[c].to_numpy() for c in fast.columns if c != "t"}
    channels_slow = {c: slow[c].to_numpy() for c in slow.columns if c != "t"}

    if schema is not None:
        check_no_leakage(schema)
        available = set(channels_fast) | set(channels_slow)
        missing = [n for n in schema.names if n not in available]
        if missing:
            raise MissingColumn(f"episode {episode_id!r}: schema channels absent: {missing}")

    truth = None
    if files.get("truth"):
        truth_path = Path(files["truth"])
        table = _read_table(truth_path)
        missing = [c for c in TRUTH_COLUMNS if c not in table.columns]
        if missing:
            raise MissingColumn(f"{truth_path}: missing columns {missing}")
        truth = TruthTable(
            times=table["t"].to_numpy(),
            poses=table[["x", "y", "z", "roll", "pitch", "yaw"]].to_numpy(),
            v_local=table[["vx", "vy", "vz"]].to_numpy(),
            slip_flag=table["slip_flag"].to_numpy() > 0.5,
            slip_ratio=table["slip_ratio"].to_numpy(),
        )
        if len(truth.times) != len(fast):
            raise RateMismatch(
                f"{truth_path}: {len(truth.times)} rows vs {len(fast)} master ticks"
            )

    return RawEpisode(
        episode_id=episode_id,
        times_100hz=fast["t"].to_numpy(),
        channels_100hz=channels_fast,
        times_10hz=slow["t"].to_numpy(),
        channels_10hz=channels_slow,
        truth=truth,
    )


# ---------------------------------------------------------------------------
# Manifest and splits
# ---------------------------------------------------------------------------


@dataclass
class ManifestEntry:
    episode_id: str
    scenario: str
    files: dict[str, str]  # file key -> path relative to the dataset dir
    rows: dict[str, int] = field(default_factory=dict)
    split: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "id": self.episode_id,
            "scenario": self.scenario,
            "files": dict(self.files),
            "rows": dict(self.rows),
            "split": self.split,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ManifestEntry":
        return cls(
            episode_id=obj["id"],
            scenario=obj["scenario"],
            files=dict(obj["files"]),
            rows={k: int(v) for k, v in obj.get("rows", {}).items()},
            split=obj.get("split"),
        )


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    seed: int = 0

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def scenarios(self) -> list[str]:
        return sorted({e.scenario for e in self.entries})

    def to_json(self) -> dict:
        return {"seed": self.seed, "episodes": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "DatasetManifest":
        return cls(
            entries=[ManifestEntry.from_json(e) for e in obj["episodes"]],
            seed=int(obj.get("seed", 0)),
        )


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2), encoding="utf-8")


def load_manifest(path: Path | str) -> DatasetManifest:
    return DatasetManifest.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def ingest_entry(
    dataset_dir: Path | str,
    entry: ManifestEntry,
    schema: Optional[FeatureSchema] = None,
) -> RawEpisode:
    base = Path(dataset_dir)
    files = {key: base / rel for key, rel in entry.files.items()}
    return ingest_episode(files, episode_id=entry.episode_id, schema=schema)


def build_splits(
    entries: Sequence[ManifestEntry],
    seed: int,
    val_per_scenario: int = 1,
    test_per_scenario: int = 1,
) -> DatasetManifest:
    """Assign disjoint train/val/test splits, one val+test episode per scenario.

    Deterministic for a given seed regardless of input order.  Scenarios
    without enough episodes to fill val and test raise
    :class:`InsufficientEpisodes`.
    """
    rng = np.random.default_rng(seed)
    by_scenario: dict[str, list[ManifestEntry]] = {}
    for entry in entries:
        by_scenario.setdefault(entry.scenario, []).append(entry)

    assigned: list[ManifestEntry] = []
    need = val_per_scenario + test_per_scenario
    for scenario in sorted(by_scenario):
        group = sorted(by_scenario[scenario], key=lambda e: e.episode_id)
        if len(group) < need:
            raise InsufficientEpisodes(
                f"scenario {scenario!r} has {len(group)} episode(s); "
                f"needs >= {need} for val+test"
            )
        order = rng.permutation(len(group))
        for pos, idx in enumerate(order):
            if pos < val_per_scenario:
                split = "val"
            elif pos < need:
                split = "test"
            else:
                split = "train"
            group[idx].split = split
        assigned.extend(group)

    assigned.sort(key=lambda e: e.episode_id)
    ids = [e.episode_id for e in assigned]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate episode ids")
    return DatasetManifest(entries=assigned, seed=seed)
