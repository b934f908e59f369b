"""From-scratch training of the velocity regressors.

Implements the two learned estimators (feed-forward ReLU network and a
stacked LSTM over fixed windows) with exact backpropagation, an Adam
optimizer, an epoch loop with periodic validation checkpointing, and a
self-describing checkpoint format.

All math is 64-bit.  Per-batch gradients are reduced by the matrix
products themselves (samples stacked along the batch axis), so a fixed
seed reproduces runs exactly on one machine.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .estimators import FeatureSchema, ModelNotTrained, Standardizer

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"TRACKPOSE-CKPT-1\n"
CHECKPOINT_JSON_FORMAT = "trackpose-checkpoint-json-1"

OUTPUT_WIDTH = 3  # local velocity (x, y, z)


class ShapeMismatch(ValueError):
    """Model input does not match the expected width or window."""


class NonFiniteLoss(RuntimeError):
    """Training produced a NaN/inf loss; aborts the run with diagnostics."""


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# Feed-forward model
# ---------------------------------------------------------------------------


@dataclass
class MlpModel:
    """Fully connected ReLU network with a linear 3-wide output head."""

    input_width: int
    hidden_size: int
    hidden_layers: int
    params: dict[str, np.ndarray]
    window: int = 0  # frame model: consumes one feature vector

    def __post_init__(self):
        widths = [self.input_width] + [self.hidden_size] * self.hidden_layers
        for i in range(self.hidden_layers):
            self._expect(f"h{i}.W", (widths[i], widths[i + 1]))
            self._expect(f"h{i}.b", (widths[i + 1],))
        self._expect("out.W", (widths[-1], OUTPUT_WIDTH))
        self._expect("out.b", (OUTPUT_WIDTH,))
        for name, value in self.params.items():
            if not np.isfinite(value).all():
                raise ValueError(f"parameter {name} contains non-finite values")

    def _expect(self, name: str, shape: tuple) -> None:
        if name not in self.params:
            raise ModelNotTrained(f"missing parameter tensor {name!r}")
        if self.params[name].shape != shape:
            raise ShapeMismatch(
                f"{name}: expected shape {shape}, got {self.params[name].shape}"
            )

    @classmethod
    def create(
        cls,
        input_width: int,
        hidden_size: int = 256,
        hidden_layers: int = 4,
        rng: np.random.Generator | None = None,
    ) -> "MlpModel":
        rng = rng or np.random.default_rng(0)
        widths = [input_width] + [hidden_size] * hidden_layers
        params: dict[str, np.ndarray] = {}
        for i in range(hidden_layers):
            params[f"h{i}.W"] = _glorot(rng, widths[i], widths[i + 1], (widths[i], widths[i + 1]))
            params[f"h{i}.b"] = np.zeros(widths[i + 1])
        params["out.W"] = _glorot(rng, widths[-1], OUTPUT_WIDTH, (widths[-1], OUTPUT_WIDTH))
        params["out.b"] = np.zeros(OUTPUT_WIDTH)
        return cls(input_width, hidden_size, hidden_layers, params)

    def predict(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, float)
        single = arr.ndim == 1
        out, _ = _mlp_forward_cache(self, arr[None, :] if single else arr, keep_cache=False)
        return out[0] if single else out


def _mlp_forward_cache(model: MlpModel, X: np.ndarray, keep_cache: bool = True):
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise ShapeMismatch(f"expected (n, {model.input_width}) input, got {X.shape}")
    activations = [X]
    pre = []
    a = X
    for i in range(model.hidden_layers):
        z = a @ model.params[f"h{i}.W"] + model.params[f"h{i}.b"]
        a = np.maximum(z, 0.0)
        if keep_cache:
            pre.append(z)
            activations.append(a)
    y = a @ model.params["out.W"] + model.params["out.b"]
    cache = {"pre": pre, "act": activations, "last": a} if keep_cache else None
    return y, cache


def _mlp_backward(model: MlpModel, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    grads["out.W"] = cache["last"].T @ dY
    grads["out.b"] = dY.sum(axis=0)
    da = dY @ model.params["out.W"].T
    for i in reversed(range(model.hidden_layers)):
        dz = da * (cache["pre"][i] > 0.0)
        grads[f"h{i}.W"] = cache["act"][i].T @ dz
        grads[f"h{i}.b"] = dz.sum(axis=0)
        da = dz @ model.params[f"h{i}.W"].T
    return grads


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Forward pass for one feature vector (or a batch of them)."""
    return model.predict(x)


# ---------------------------------------------------------------------------
# LSTM model
# ---------------------------------------------------------------------------
#
# Gate layout in the fused weight matrices is [input, forget, cell, output]
# along the last axis.  Hidden and cell states start at zero for every
# window (stateless windows); the output head reads the final hidden state
# of the top layer.


@dataclass
class LstmModel:
    input_width: int
    hidden_size: int
    hidden_layers: int
    window: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        h = self.hidden_size
        d_in = self.input_width
        for layer in range(self.hidden_layers):
            self._expect(f"l{layer}.Wx", (d_in, 4 * h))
            self._expect(f"l{layer}.Wh", (h, 4 * h))
            self._expect(f"l{layer}.b", (4 * h,))
            d_in = h
        self._expect("out.W", (h, OUTPUT_WIDTH))
        self._expect("out.b", (OUTPUT_WIDTH,))
        for name, value in self.params.items():
            if not np.isfinite(value).all():
                raise ValueError(f"parameter {name} contains non-finite values")

    def _expect(self, name: str, shape: tuple) -> None:
        if name not in self.params:
            raise ModelNotTrained(f"missing parameter tensor {name!r}")
        if self.params[name].shape != shape:
            raise ShapeMismatch(
                f"{name}: expected shape {shape}, got {self.params[name].shape}"
            )

    @classmethod
    def create(
        cls,
        input_width: int,
        hidden_size: int = 256,
        hidden_layers: int = 4,
        window: int = 40,
        rng: np.random.Generator | None = None,
    ) -> "LstmModel":
        rng = rng or np.random.default_rng(0)
        h = hidden_size
        params: dict[str, np.ndarray] = {}
        d_in = input_width
        for layer in range(hidden_layers):
            params[f"l{layer}.Wx"] = _glorot(rng, d_in, 4 * h, (d_in, 4 * h))
            params[f"l{layer}.Wh"] = _glorot(rng, h, 4 * h, (h, 4 * h))
            bias = np.zeros(4 * h)
            bias[h : 2 * h] = 1.0  # forget gate opens by default
            params[f"l{layer}.b"] = bias
            d_in = h
        params["out.W"] = _glorot(rng, h, OUTPUT_WIDTH, (h, OUTPUT_WIDTH))
        params["out.b"] = np.zeros(OUTPUT_WIDTH)
        return cls(input_width, hidden_size, hidden_layers, window, params)

    def predict(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, float)
        single = arr.ndim == 2
        if single:
            arr = arr[None, :, :]
        out, _ = _lstm_forward_cache(self, arr, keep_cache=False)
        return out[0] if single else out


def _lstm_forward_cache(model: LstmModel, X: np.ndarray, keep_cache: bool = True):
    if X.ndim != 3 or X.shape[1] != model.window or X.shape[2] != model.input_width:
        raise ShapeMismatch(
            f"expected (n, {model.window}, {model.input_width}) windows, got {X.shape}"
        )
    batch, steps, _ = X.shape
    h_size = model.hidden_size
    cache: list[list[dict]] = [] if keep_cache else None
    layer_input = X
    for layer in range(model.hidden_layers):
        Wx = model.params[f"l{layer}.Wx"]
        Wh = model.params[f"l{layer}.Wh"]
        b = model.params[f"l{layer}.b"]
        h = np.zeros((batch, h_size))
        c = np.zeros((batch, h_size))
        outputs = np.empty((batch, steps, h_size))
        step_cache: list[dict] = [] if keep_cache else None
        for t in range(steps):
            x_t = layer_input[:, t, :]
            z = x_t @ Wx + h @ Wh + b
            gi = _sigmoid(z[:, :h_size])
            gf = _sigmoid(z[:, h_size : 2 * h_size])
            gg = np.tanh(z[:, 2 * h_size : 3 * h_size])
            go = _sigmoid(z[:, 3 * h_size :])
            c_new = gf * c + gi * gg
            hc = np.tanh(c_new)
            h_new = go * hc
            if keep_cache:
                step_cache.append(
                    {"x": x_t, "h_prev": h, "c_prev": c, "i": gi, "f": gf, "g": gg, "o": go, "hc": hc}
                )
            h, c = h_new, c_new
            outputs[:, t, :] = h
        if keep_cache:
            cache.append(step_cache)
        layer_input = outputs
    y = layer_input[:, -1, :] @ model.params["out.W"] + model.params["out.b"]
    full_cache = {"layers": cache, "last_hidden": layer_input[:, -1, :]} if keep_cache else None
    return y, full_cache


def _lstm_backward(model: LstmModel, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    batch = dY.shape[0]
    steps = model.window
    h_size = model.hidden_size

    grads = {name: np.zeros_like(value) for name, value in model.params.items()}
    grads["out.W"] = cache["last_hidden"].T @ dY
    grads["out.b"] = dY.sum(axis=0)

    # Gradient flowing into each layer's hidden outputs; top layer only
    # receives it at the final step (the head reads h[N-1]).
    d_above = np.zeros((batch, steps, h_size))
    d_above[:, -1, :] = dY @ model.params["out.W"].T

    for layer in reversed(range(model.hidden_layers)):
        Wx = model.params[f"l{layer}.Wx"]
        Wh = model.params[f"l{layer}.Wh"]
        step_cache = cache["layers"][layer]
        d_input = np.zeros((batch, steps, Wx.shape[0]))
        dh_carry = np.zeros((batch, h_size))
        dc = np.zeros((batch, h_size))
        g_Wx, g_Wh, g_b = grads[f"l{layer}.Wx"], grads[f"l{layer}.Wh"], grads[f"l{layer}.b"]
        for t in reversed(range(steps)):
            sc = step_cache[t]
            dh = dh_carry + d_above[:, t, :]
            dc = dc + dh * sc["o"] * (1.0 - sc["hc"] ** 2)
            d_gate_o = dh * sc["hc"] * sc["o"] * (1.0 - sc["o"])
            d_gate_i = dc * sc["g"] * sc["i"] * (1.0 - sc["i"])
            d_gate_f = dc * sc["c_prev"] * sc["f"] * (1.0 - sc["f"])
            d_gate_g = dc * sc["i"] * (1.0 - sc["g"] ** 2)
            dz = np.concatenate([d_gate_i, d_gate_f, d_gate_g, d_gate_o], axis=1)
            g_Wx += sc["x"].T @ dz
            g_Wh += sc["h_prev"].T @ dz
            g_b += dz.sum(axis=0)
            d_input[:, t, :] = dz @ Wx.T
            dh_carry = dz @ Wh.T
            dc = dc * sc["f"]
        d_above = d_input
    return grads


def lstm_forward(model: LstmModel, window: np.ndarray) -> np.ndarray:
    """Forward pass for one window (or a batch of windows)."""
    return model.predict(window)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule, and architecture settings for a training run."""

    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 2048
    val_period: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden_size: int = 256
    hidden_layers: int = 4
    window: int = 40
    sample_stride: int = 1  # take every k-th frame as a training sample

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.val_period < 1:
            raise ValueError("learning rate, batch size, and val period must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if min(self.hidden_size, self.hidden_layers, self.window, self.sample_stride) < 1:
            raise ValueError("architecture sizes and stride must be >= 1")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TrainConfig":
        known = {k: obj[k] for k in cls.__dataclass_fields__ if k in obj}
        return cls(**known)


class Adam:
    """Adam optimizer with bias correction, one slot pair per tensor."""

    def __init__(self, params: Mapping[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        correct1 = 1.0 - cfg.beta1**self.t
        correct2 = 1.0 - cfg.beta2**self.t
        for name, grad in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad * grad
            params[name] -= cfg.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + cfg.eps)


def model_forward_backward(model, X: np.ndarray, targets: np.ndarray):
    """Batch MSE and exact parameter gradients (BPTT for window models).

    Raises :class:`NonFiniteLoss` before the backward pass if the loss
    has already diverged.
    """
    if isinstance(model, LstmModel):
        y, cache = _lstm_forward_cache(model, X)
    else:
        y, cache = _mlp_forward_cache(model, X)
    diff = y - targets
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss became non-finite ({loss})")
    dY = 2.0 * diff / diff.size
    if isinstance(model, LstmModel):
        grads = _lstm_backward(model, cache, dY)
    else:
        grads = _mlp_backward(model, cache, dY)
    return loss, grads


def backward_and_step(model, X: np.ndarray, targets: np.ndarray, optimizer: Adam) -> float:
    """One optimization step; returns the batch MSE before the step."""
    if len(X) == 0:
        raise ValueError("batch must be nonempty")
    loss, grads = model_forward_backward(model, X, targets)
    optimizer.step(model.params, grads)
    return loss


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class RegressionData:
    """Standardized per-episode feature/target arrays plus their schema."""

    train: list[tuple[np.ndarray, np.ndarray]]
    val: list[tuple[np.ndarray, np.ndarray]]
    schema: FeatureSchema
    standardizer: Standardizer
    groups: tuple[str, ...] = ("ic", "ve", "bu")


class _SampleIndex:
    """Flat (episode, frame) index over windowed training samples."""

    def __init__(self, episodes: Sequence[tuple[np.ndarray, np.ndarray]], window: int, stride: int):
        self.episodes = episodes
        self.window = max(window, 1)
        pairs = []
        for ep, (feats, _) in enumerate(episodes):
            first = self.window - 1
            pairs.extend((ep, k) for k in range(first, len(feats), stride))
        if not pairs:
            raise ValueError("no usable training samples (episodes shorter than the window?)")
        self.pairs = np.array(pairs, dtype=np.int64)
        # Per-episode full-window views; index j covers frames [j, j+window-1].
        self._views = [
            np.lib.stride_tricks.sliding_window_view(feats, self.window, axis=0).transpose(0, 2, 1)
            for feats, _ in episodes
        ]

    def __len__(self) -> int:
        return len(self.pairs)

    def gather(self, order: np.ndarray, windowed: bool):
        chosen = self.pairs[order]
        chosen = chosen[np.lexsort((chosen[:, 1], chosen[:, 0]))]
        xs, ts = [], []
        for ep in np.unique(chosen[:, 0]):
            frames = chosen[chosen[:, 0] == ep, 1]
            feats, targets = self.episodes[ep]
            if windowed:
                xs.append(self._views[ep][frames - (self.window - 1)])
            else:
                xs.append(feats[frames])
            ts.append(targets[frames])
        return np.concatenate(xs, axis=0), np.concatenate(ts, axis=0)


def _evaluate_mse(model, index: _SampleIndex, batch_size: int, windowed: bool) -> float:
    total = 0.0
    count = 0
    for start in range(0, len(index), batch_size):
        order = np.arange(start, min(start + batch_size, len(index)))
        X, T = index.gather(order, windowed)
        y = model.predict(X)
        total += float(np.sum((y - T) ** 2))
        count += T.size
    return total / count


@dataclass
class TrainResult:
    checkpoint: "Checkpoint"
    curve: list[dict]  # per epoch: {"epoch", "train_loss", "val_loss"}
    best_epoch: int


def train(kind: str, data: RegressionData, cfg: TrainConfig) -> TrainResult:
    """Train one model kind on pre-standardized episode arrays.

    Mini-batches are reshuffled each epoch from the run seed; the
    checkpoint keeps the weights with the lowest validation MSE across
    all validation evaluations (including the initial one, so zero
    epochs yields the initial weights).
    """
    if kind not in ("mlp", "lstm"):
        raise ValueError(f"unknown model kind {kind!r}")
    if not data.train or not data.val:
        raise ValueError("training and validation splits must both be nonempty")

    rng = np.random.default_rng(cfg.seed)
    width = len(data.schema)
    windowed = kind == "lstm"
    if windowed:
        model = LstmModel.create(width, cfg.hidden_size, cfg.hidden_layers, cfg.window, rng)
    else:
        model = MlpModel.create(width, cfg.hidden_size, cfg.hidden_layers, rng)

    window = cfg.window if windowed else 1
    train_index = _SampleIndex(data.train, window, cfg.sample_stride)
    val_index = _SampleIndex(data.val, window, cfg.sample_stride)

    def snapshot() -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in model.params.items()}

    best_val = _evaluate_mse(model, val_index, cfg.batch_size, windowed)
    best_params = snapshot()
    best_epoch = 0
    curve = [{"epoch": 0, "train_loss": float("nan"), "val_loss": best_val}]
    log.info("%s: %d train samples, %d val samples, initial val MSE %.6g",
             kind, len(train_index), len(val_index), best_val)

    optimizer = Adam(model.params, cfg)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_index))
        total = 0.0
        seen = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            X, T = train_index.gather(batch, windowed)
            try:
                loss = backward_and_step(model, X, T, optimizer)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(
                    f"{exc} at epoch {epoch}, batch starting {start}"
                ) from exc
            total += loss * len(batch)
            seen += len(batch)
        train_loss = total / seen
        val_loss = float("nan")
        if epoch % cfg.val_period == 0 or epoch == cfg.epochs:
            val_loss = _evaluate_mse(model, val_index, cfg.batch_size, windowed)
            if val_loss < best_val:
                best_val = val_loss
                best_params = snapshot()
                best_epoch = epoch
        curve.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})

    checkpoint = Checkpoint(
        kind=kind,
        params=best_params,
        schema=data.schema,
        standardizer=data.standardizer,
        window=cfg.window if windowed else 0,
        hidden_size=cfg.hidden_size,
        hidden_layers=cfg.hidden_layers,
        val_loss=best_val,
        seed=cfg.seed,
        groups=tuple(data.groups),
    )
    return TrainResult(checkpoint, curve, best_epoch)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    """Self-describing snapshot: weights plus everything inference needs."""

    kind: str
    params: dict[str, np.ndarray]
    schema: FeatureSchema
    standardizer: Standardizer
    window: int
    hidden_size: int
    hidden_layers: int
    val_loss: float
    seed: int
    groups: tuple[str, ...] = ("ic", "ve", "bu")

    def build_model(self):
        params = {name: np.array(value, dtype=float) for name, value in self.params.items()}
        if self.kind == "mlp":
            return MlpModel(len(self.schema), self.hidden_size, self.hidden_layers, params)
        if self.kind == "lstm":
            return LstmModel(len(self.schema), self.hidden_size, self.hidden_layers, self.window, params)
        raise ModelNotTrained(f"checkpoint has unknown model kind {self.kind!r}")

    def _header(self) -> dict:
        return {
            "kind": self.kind,
            "hidden_size": self.hidden_size,
            "hidden_layers": self.hidden_layers,
            "window": self.window,
            "val_loss": self.val_loss,
            "seed": self.seed,
            "groups": list(self.groups),
            "schema": self.schema.to_json(),
            "standardizer": self.standardizer.to_json(),
            "tensors": [
                {"name": name, "shape": list(value.shape)} for name, value in self.params.items()
            ],
        }


def save_checkpoint(ckpt: Checkpoint, path: str | Path, binary: bool = True) -> Path:
    """Write a checkpoint; binary layout by default, pure JSON otherwise.

    Binary layout: magic line, one-line JSON header, then the tensors as
    raw little-endian float64 in header order.
    """
    path = Path(path)
    header = ckpt._header()
    if binary:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(json.dumps(header).encode("utf-8"))
            fh.write(b"\n")
            for entry in header["tensors"]:
                fh.write(ckpt.params[entry["name"]].astype("<f8").tobytes())
    else:
        payload = {"format": CHECKPOINT_JSON_FORMAT, **header}
        payload["tensors"] = [
            {"name": name, "shape": list(value.shape), "data": value.ravel().tolist()}
            for name, value in ckpt.params.items()
        ]
        path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read either checkpoint encoding; validates tensor completeness."""
    path = Path(path)
    blob = path.read_bytes()
    if blob.startswith(CHECKPOINT_MAGIC):
        rest = blob[len(CHECKPOINT_MAGIC) :]
        newline = rest.index(b"\n")
        header = json.loads(rest[:newline].decode("utf-8"))
        data = rest[newline + 1 :]
        params: dict[str, np.ndarray] = {}
        offset = 0
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * 8
            if offset + nbytes > len(data):
                raise ModelNotTrained(f"checkpoint truncated while reading {entry['name']!r}")
            params[entry["name"]] = (
                np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
            )
            offset += nbytes
    else:
        header = json.loads(blob.decode("utf-8"))
        if header.get("format") != CHECKPOINT_JSON_FORMAT:
            raise ModelNotTrained(f"{path} is not a recognized checkpoint")
        params = {
            entry["name"]: np.asarray(entry["data"], float).reshape(entry["shape"])
            for entry in header["tensors"]
        }

    ckpt = Checkpoint(
        kind=header["kind"],
        params=params,
        schema=FeatureSchema.from_json(header["schema"]),
        standardizer=Standardizer.from_json(header["standardizer"]),
        window=int(header["window"]),
        hidden_size=int(header["hidden_size"]),
        hidden_layers=int(header["hidden_layers"]),
        val_loss=float(header["val_loss"]),
        seed=int(header["seed"]),
        groups=tuple(header.get("groups", ("ic", "ve", "bu"))),
    )
    ckpt.build_model()  # validates tensor completeness and shapes
    return ckpt
