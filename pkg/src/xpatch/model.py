"""The dual-stream patch network.

Channel-flattened rows are instance-normalized, split into trend and
seasonal parts by exponential smoothing, routed through an MLP stream
(trend) and a patched depthwise-separable CNN stream (seasonal), and the
two forecasts are fused by a final linear layer before the instance
statistics are restored.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ops
from .autograd import Tensor, concat, no_grad, reshape
from .decompose import ema_weight_matrix
from .errors import ConfigError, DataError, DimensionError
from .validation import check_alpha, check_positive_int

FLOWS = ("dual", "reversed", "linear_only", "nonlinear_only")


@dataclass(frozen=True)
class PatchConfig:
    patch_len: int = 16
    stride: int = 8

    def n_patches(self, lookback: int) -> int:
        if lookback < self.patch_len:
            raise ConfigError(
                f"lookback {lookback} is shorter than patch length {self.patch_len}"
            )
        return (lookback - self.patch_len) // self.stride + 2


@dataclass(frozen=True)
class ModelConfig:
    lookback: int
    horizon: int
    n_channels: int
    patch_len: int = 16
    stride: int = 8
    alpha: float = 0.3
    flow: str = "dual"
    revin_eps: float = 1e-5

    def __post_init__(self):
        check_positive_int(self.lookback, "lookback")
        check_positive_int(self.horizon, "horizon")
        check_positive_int(self.n_channels, "n_channels")
        check_positive_int(self.patch_len, "patch_len")
        check_positive_int(self.stride, "stride")
        check_alpha(self.alpha, allow_one=False)
        if self.lookback % 4 != 0:
            suggestion = round(self.lookback / 4) * 4 or 4
            raise ConfigError(
                f"lookback must be divisible by 4 (two halving pools); "
                f"got {self.lookback}, nearest valid value is {suggestion}"
            )
        if self.lookback < self.patch_len:
            raise ConfigError(
                f"lookback {self.lookback} is shorter than patch length {self.patch_len}"
            )
        if self.flow not in FLOWS:
            raise ConfigError(f"flow must be one of {FLOWS}, got {self.flow!r}")

    @property
    def patches(self) -> PatchConfig:
        return PatchConfig(self.patch_len, self.stride)

    @property
    def n_patches(self) -> int:
        return self.patches.n_patches(self.lookback)


def shape_table(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every learnable tensor's shape as a pure function of the config."""
    L, T, M = cfg.lookback, cfg.horizon, cfg.n_channels
    P, N = cfg.patch_len, cfg.n_patches
    half, quarter = L // 2, L // 4
    return {
        "revin_gamma": (M,),
        "revin_beta": (M,),
        "lin_fc1_w": (L, L),
        "lin_fc1_b": (L,),
        "lin_ln1_gamma": (half,),
        "lin_ln1_beta": (half,),
        "lin_fc2_w": (half, half),
        "lin_fc2_b": (half,),
        "lin_ln2_gamma": (quarter,),
        "lin_ln2_beta": (quarter,),
        "lin_expand_w": (quarter, T),
        "lin_expand_b": (T,),
        "nl_embed_w": (P, P * P),
        "nl_embed_b": (P * P,),
        "nl_bn1_gamma": (N,),
        "nl_bn1_beta": (N,),
        "nl_depthwise_w": (N, 1, P),
        "nl_depthwise_b": (N,),
        "nl_bn2_gamma": (N,),
        "nl_bn2_beta": (N,),
        "nl_residual_w": (P * P, P),
        "nl_residual_b": (P,),
        "nl_pointwise_w": (N, N, 1),
        "nl_pointwise_b": (N,),
        "nl_bn3_gamma": (N,),
        "nl_bn3_beta": (N,),
        "nl_head1_w": (N * P, 2 * N * P),
        "nl_head1_b": (2 * N * P,),
        "nl_head2_w": (2 * N * P, T),
        "nl_head2_b": (T,),
        "fusion_w": (2 * T, T),
        "fusion_b": (T,),
    }


_UNIFORM_FAN_IN = {
    # weight name -> name of the paired weight whose fan-in bounds the draw
    "lin_fc1_b": "lin_fc1_w",
    "lin_fc2_b": "lin_fc2_w",
    "lin_expand_b": "lin_expand_w",
    "nl_embed_b": "nl_embed_w",
    "nl_depthwise_b": "nl_depthwise_w",
    "nl_residual_b": "nl_residual_w",
    "nl_pointwise_b": "nl_pointwise_w",
    "nl_head1_b": "nl_head1_w",
    "nl_head2_b": "nl_head2_w",
    "fusion_b": "fusion_w",
}


def _fan_in(name: str, shape: tuple[int, ...]) -> int:
    if name.endswith("_w"):
        if len(shape) == 3:  # conv kernel (C_out, C/g, k)
            return shape[1] * shape[2]
        return shape[0]
    raise ValueError(name)


class XPatchParams:
    """Named learnable tensors plus batch-norm running statistics."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.tensors: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        for name, shape in shape_table(cfg).items():
            if "gamma" in name:
                data = np.ones(shape)
            elif "beta" in name:
                data = np.zeros(shape)
            elif name in _UNIFORM_FAN_IN:
                ref = shape_table(cfg)[_UNIFORM_FAN_IN[name]]
                bound = 1.0 / np.sqrt(_fan_in(_UNIFORM_FAN_IN[name], ref))
                data = rng.uniform(-bound, bound, size=shape)
            else:
                bound = 1.0 / np.sqrt(_fan_in(name, shape))
                data = rng.uniform(-bound, bound, size=shape)
            self.tensors[name] = Tensor(data, requires_grad=True)
        self.bn_states = {
            f"nl_bn{i}": ops.BatchNormState(cfg.n_patches) for i in (1, 2, 3)
        }

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def values(self):
        return self.tensors.values()

    def zero_grads(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def copy_data(self) -> dict[str, np.ndarray]:
        snap = {name: t.data.copy() for name, t in self.tensors.items()}
        for key, state in self.bn_states.items():
            snap[f"{key}_running_mean"] = state.running_mean.copy()
            snap[f"{key}_running_var"] = state.running_var.copy()
            snap[f"{key}_batches_seen"] = np.array([float(state.batches_seen)])
        return snap

    def load_data(self, snap: dict[str, np.ndarray]) -> None:
        for name, t in self.tensors.items():
            t.data = snap[name].copy()
        for key, state in self.bn_states.items():
            state.running_mean = snap[f"{key}_running_mean"].copy()
            state.running_var = snap[f"{key}_running_var"].copy()
            state.batches_seen = int(snap[f"{key}_batches_seen"][0])

    def audit(self) -> dict:
        """Check every tensor against the config-derived shape table."""
        expected = shape_table(self.cfg)
        for name, shape in expected.items():
            actual = self.tensors[name].shape
            if actual != shape:
                raise ConfigError(
                    f"parameter {name!r} has shape {actual}, expected {shape}"
                )
        count = int(sum(np.prod(s) for s in expected.values()))
        return {"parameter_count": count, "shapes": expected}


@dataclass
class RevInState:
    """Per-row statistics captured at normalization time."""

    mean: np.ndarray  # (R, 1)
    std: np.ndarray  # (R, 1)
    eps: float


def make_patches(x: Tensor, cfg: PatchConfig) -> Tensor:
    """Replicate the final value ``stride`` times, then unfold into patches."""
    lookback = x.shape[-1]
    n = cfg.n_patches(lookback)
    padded = ops.replicate_last(x, cfg.stride)
    patches = ops.unfold_last(padded, cfg.patch_len, cfg.stride)
    if patches.shape[-2] != n:
        raise DimensionError(
            f"unfold produced {patches.shape[-2]} patches, expected {n}"
        )
    return patches


class XPatchModel:
    """Forward network over channel-flattened rows of shape (B*M, L)."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, params: XPatchParams | None = None):
        self.cfg = cfg
        self.params = params if params is not None else XPatchParams(cfg, seed=seed)
        self.params.audit()
        self.scaler = None  # training Scaler, attached for raw-scale forecasting
        self._ema_mat = Tensor(ema_weight_matrix(cfg.lookback, cfg.alpha).T)

    # -- RevIN ----------------------------------------------------------

    def revin_normalize(self, x: Tensor) -> tuple[Tensor, RevInState]:
        cfg = self.cfg
        mean = x.data.mean(axis=-1, keepdims=True)
        std = np.sqrt(x.data.var(axis=-1, keepdims=True) + cfg.revin_eps)
        state = RevInState(mean=mean, std=std, eps=cfg.revin_eps)
        normalized = (x - Tensor(mean)) / Tensor(std)
        rows = x.shape[0]
        if rows % cfg.n_channels:
            raise DimensionError(
                f"{rows} rows are not a whole number of {cfg.n_channels}-channel blocks"
            )
        grouped = reshape(normalized, (rows // cfg.n_channels, cfg.n_channels, -1))
        gamma = reshape(self.params["revin_gamma"], (1, cfg.n_channels, 1))
        beta = reshape(self.params["revin_beta"], (1, cfg.n_channels, 1))
        affine = grouped * gamma + beta
        return reshape(affine, (rows, -1)), state

    def revin_denormalize(self, y: Tensor, state: RevInState) -> Tensor:
        cfg = self.cfg
        rows = y.shape[0]
        grouped = reshape(y, (rows // cfg.n_channels, cfg.n_channels, -1))
        gamma = reshape(self.params["revin_gamma"], (1, cfg.n_channels, 1))
        beta = reshape(self.params["revin_beta"], (1, cfg.n_channels, 1))
        # eps^2 keeps the division defined if the affine weight reaches zero
        plain = (grouped - beta) / (gamma + cfg.revin_eps**2)
        flat = reshape(plain, (rows, -1))
        return flat * Tensor(state.std) + Tensor(state.mean)

    # -- streams ----------------------------------------------------------

    def linear_stream(self, x: Tensor) -> Tensor:
        p = self.params
        h = ops.linear(x, p["lin_fc1_w"], p["lin_fc1_b"])
        h = ops.avg_pool1d(h, kernel=2, stride=2)
        h = ops.layer_norm(h, p["lin_ln1_gamma"], p["lin_ln1_beta"])
        h = ops.linear(h, p["lin_fc2_w"], p["lin_fc2_b"])
        h = ops.avg_pool1d(h, kernel=2, stride=2)
        h = ops.layer_norm(h, p["lin_ln2_gamma"], p["lin_ln2_beta"])
        return ops.linear(h, p["lin_expand_w"], p["lin_expand_b"])

    def nonlinear_stream(self, x: Tensor, training: bool) -> Tensor:
        p = self.params
        cfg = self.cfg
        patches = make_patches(x, cfg.patches)
        embedded = ops.linear(patches, p["nl_embed_w"], p["nl_embed_b"])
        embedded = ops.gelu(embedded)
        embedded = ops.batch_norm(
            embedded, p["nl_bn1_gamma"], p["nl_bn1_beta"],
            self.params.bn_states["nl_bn1"], training,
        )
        deep = ops.grouped_conv1d(
            embedded, p["nl_depthwise_w"], p["nl_depthwise_b"],
            stride=cfg.patch_len, groups=cfg.n_patches,
        )
        deep = ops.gelu(deep)
        deep = ops.batch_norm(
            deep, p["nl_bn2_gamma"], p["nl_bn2_beta"],
            self.params.bn_states["nl_bn2"], training,
        )
        residual = ops.linear(embedded, p["nl_residual_w"], p["nl_residual_b"])
        merged = deep + residual
        pointwise = ops.grouped_conv1d(
            merged, p["nl_pointwise_w"], p["nl_pointwise_b"], stride=1, groups=1,
        )
        pointwise = ops.gelu(pointwise)
        pointwise = ops.batch_norm(
            pointwise, p["nl_bn3_gamma"], p["nl_bn3_beta"],
            self.params.bn_states["nl_bn3"], training,
        )
        flat = ops.gelu(ops.linear(
            reshape(pointwise, (pointwise.shape[0], -1)),
            p["nl_head1_w"], p["nl_head1_b"],
        ))
        return ops.linear(flat, p["nl_head2_w"], p["nl_head2_b"])

    # -- full forward ------------------------------------------------------

    def forward(self, x_rows: np.ndarray, training: bool = False) -> Tensor:
        cfg = self.cfg
        x = Tensor(np.asarray(x_rows, dtype=np.float64))
        if x.ndim != 2 or x.shape[1] != cfg.lookback:
            raise DimensionError(
                f"expected input rows of shape (R, {cfg.lookback}), got {x.shape}"
            )
        normalized, state = self.revin_normalize(x)
        trend = normalized @ self._ema_mat
        seasonal = normalized - trend

        if cfg.flow == "dual":
            first = self.linear_stream(trend)
            second = self.nonlinear_stream(seasonal, training)
        elif cfg.flow == "reversed":
            first = self.nonlinear_stream(trend, training)
            second = self.linear_stream(seasonal)
        elif cfg.flow == "linear_only":
            first = self.linear_stream(trend)
            second = self.linear_stream(seasonal)
        else:  # nonlinear_only
            first = self.nonlinear_stream(trend, training)
            second = self.nonlinear_stream(seasonal, training)

        fused = ops.linear(
            concat([first, second], axis=-1),
            self.params["fusion_w"], self.params["fusion_b"],
        )
        return self.revin_denormalize(fused, state)

    def predict(self, x_rows: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward(x_rows, training=False).data


# -- checkpoint container ----------------------------------------------


def save_checkpoint(model: XPatchModel, stem) -> Path:
    """Write ``<stem>.bin`` (flat float64 buffers) and ``<stem>.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    snap = model.params.copy_data()
    if model.scaler is not None:
        snap["scaler_mean"] = np.asarray(model.scaler.mean)
        snap["scaler_std"] = np.asarray(model.scaler.std)
    manifest = []
    offset = 0
    chunks = []
    for name in sorted(snap):
        arr = np.ascontiguousarray(snap[name], dtype=np.float64)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    blob = b"".join(chunks)
    bin_path = stem.with_suffix(".bin")
    tmp = bin_path.with_suffix(".bin.tmp")
    tmp.write_bytes(blob)
    tmp.replace(bin_path)
    meta = {
        "format": 1,
        "config": asdict(model.cfg),
        "tensors": manifest,
        "bin_sha256": hashlib.sha256(blob).hexdigest(),
    }
    json_path = stem.with_suffix(".json")
    tmp = json_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(meta, indent=1, sort_keys=True))
    tmp.replace(json_path)
    return json_path


def checkpoint_hash(stem) -> str:
    return hashlib.sha256(Path(stem).with_suffix(".bin").read_bytes()).hexdigest()


def load_checkpoint(stem) -> XPatchModel:
    """Rebuild a model, validating every stored shape against its config."""
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    bin_path = stem.with_suffix(".bin")
    if not json_path.exists() or not bin_path.exists():
        raise DataError(f"checkpoint not found at {stem}.json / {stem}.bin")
    meta = json.loads(json_path.read_text())
    cfg = ModelConfig(**meta["config"])
    blob = bin_path.read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != meta["bin_sha256"]:
        raise DataError(f"checkpoint {bin_path} is corrupt (sha256 mismatch)")
    flat = np.frombuffer(blob, dtype=np.float64)
    model = XPatchModel(cfg, seed=0)
    expected = model.params.copy_data()
    expected["scaler_mean"] = np.empty(cfg.n_channels)
    expected["scaler_std"] = np.empty(cfg.n_channels)
    snap = {}
    for entry in meta["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in expected:
            raise DataError(f"checkpoint holds unknown tensor {name!r}")
        if shape != expected[name].shape:
            raise ConfigError(
                f"checkpoint tensor {name!r} has shape {shape}, config implies "
                f"{expected[name].shape}"
            )
        size = int(np.prod(shape)) if shape else 1
        snap[name] = flat[offset : offset + size].reshape(shape).copy()
    scaler_mean = snap.pop("scaler_mean", None)
    scaler_std = snap.pop("scaler_std", None)
    missing = set(expected) - set(snap) - {"scaler_mean", "scaler_std"}
    if missing:
        raise DataError(f"checkpoint is missing tensors: {sorted(missing)}")
    model.params.load_data(snap)
    if scaler_mean is not None and scaler_std is not None:
        from .datasets import Scaler

        scaler = Scaler()
        scaler.mean = scaler_mean
        scaler.std = scaler_std
        model.scaler = scaler
    return model
