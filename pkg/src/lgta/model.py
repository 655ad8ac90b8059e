"""Conditional variational recurrent autoencoder with variational attention.

Pipeline for one batch of windows ``z`` (B, T, D) with conditions ``c`` (B, C)::

    z -> affine embed + sinusoidal positions -> Bi-LSTM (c appended)
      -> variational multi-head attention (residual) -> (mu_t, log var_t)
      -> v_t -> Bi-LSTM decoder over [v_t; c] -> affine head -> z_hat

All arrays are batch-first. Parameters live in a flat ``dict[str, ndarray]``
so they can be checkpointed, gradient-checked and optimised uniformly.
"""

from __future__ import annotations

import io
import json
import math
import time
import zipfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from . import numerics as nx
from .numerics import Tensor

CHECKPOINT_FORMAT = "lgta-checkpoint"
CHECKPOINT_VERSION = "1.0"


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"loss became non-finite at epoch {epoch}")


class CheckpointError(ValueError):
    pass


@dataclass
class ModelConfig:
    window_length: int
    input_dim: int = 1
    condition_dim: int = 0
    hidden_units: int = 256
    latent_dim: int = 4
    num_heads: int = 4
    dropout_rate: float = 0.1
    kl_weight_latent: float = 1.0
    kl_weight_attention: float = 1.0
    learning_rate: float = 0.001
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        for name in ("window_length", "input_dim", "hidden_units", "latent_dim", "num_heads",
                     "epochs", "batch_size"):
            value = getattr(self, name)
            if value < 1 and not (name == "epochs" and value == 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if self.condition_dim < 0:
            raise ValueError("condition_dim must be nonnegative")
        if self.hidden_units % 2:
            raise ValueError("hidden_units must be even (positional encoding width)")
        if self.attention_width % self.num_heads:
            raise ValueError(
                f"num_heads={self.num_heads} does not divide attention width {self.attention_width}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.kl_weight_latent < 0 or self.kl_weight_attention < 0:
            raise ValueError("KL weights must be nonnegative")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")

    @property
    def attention_width(self) -> int:
        return 2 * self.hidden_units

    @property
    def head_width(self) -> int:
        return self.attention_width // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ModelConfig keys: {sorted(unknown)}")
        return cls(**data)


# parameters --------------------------------------------------------------

def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Declared shape of every trainable tensor."""
    H, C, D = config.hidden_units, config.condition_dim, config.input_dim
    W, dh, L = config.attention_width, config.head_width, config.latent_dim
    shapes: dict[str, tuple[int, ...]] = {"embed.w": (D, H), "embed.b": (H,)}
    for direction in ("fw", "bw"):
        shapes[f"enc.{direction}.wx"] = (H + C, 4 * H)
        shapes[f"enc.{direction}.wh"] = (H, 4 * H)
        shapes[f"enc.{direction}.b"] = (4 * H,)
    for k in range(config.num_heads):
        for stat in ("mu", "lv"):
            shapes[f"att.{k}.{stat}.w"] = (dh + C, dh)
            shapes[f"att.{k}.{stat}.b"] = (dh,)
    shapes["att.out.w"] = (W, W)
    shapes["att.out.b"] = (W,)
    for stat in ("mu", "lv"):
        shapes[f"latent.{stat}.w"] = (W, L)
        shapes[f"latent.{stat}.b"] = (L,)
    for direction in ("fw", "bw"):
        shapes[f"dec.{direction}.wx"] = (L + C, 4 * H)
        shapes[f"dec.{direction}.wh"] = (H, 4 * H)
        shapes[f"dec.{direction}.b"] = (4 * H,)
    shapes["out.w"] = (W, D)
    shapes["out.b"] = (D,)
    return shapes


def init_params(config: ModelConfig, rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, LSTM forget-gate bias of one."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    H = config.hidden_units
    params = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 2:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
        if name.endswith(".b") and shape == (4 * H,):
            params[name][H:2 * H] = 1.0
    return params


# building blocks ---------------------------------------------------------

def positional_encoding(length: int, width: int) -> np.ndarray:
    """Sinusoidal table: sin at even columns, cos at odd, position t from 0."""
    if width % 2:
        raise ValueError(f"positional encoding width must be even, got {width}")
    t = np.arange(length, dtype=np.float64)[:, None]
    rates = 10000.0 ** (np.arange(0, width, 2, dtype=np.float64) / width)
    table = np.empty((length, width))
    table[:, 0::2] = np.sin(t / rates)
    table[:, 1::2] = np.cos(t / rates)
    return table


def _with_condition(x: Tensor, c: np.ndarray | None) -> Tensor:
    if c is None or c.shape[-1] == 0:
        return x
    B, T = x.shape[0], x.shape[1]
    tiled = np.broadcast_to(c[:, None, :], (B, T, c.shape[-1]))
    return nx.concat([x, Tensor(np.ascontiguousarray(tiled))], axis=-1)


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rng is None or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep


def lstm_sequence(params: Mapping[str, Tensor], prefix: str, x: Tensor, reverse: bool = False) -> Tensor:
    """Run one LSTM direction over (B, T, in); gate blocks ordered i, f, o, g."""
    wh = params[f"{prefix}.wh"]
    H = wh.shape[0]
    projected = x @ params[f"{prefix}.wx"] + params[f"{prefix}.b"]
    T = x.shape[1]
    steps = range(T - 1, -1, -1) if reverse else range(T)
    h = c = None
    outputs: list[Tensor | None] = [None] * T
    for t in steps:
        gates = projected[:, t, :]
        if h is not None:
            gates = gates + h @ wh
        sig = nx.sigmoid(gates[:, :3 * H])
        i, f, o = sig[:, :H], sig[:, H:2 * H], sig[:, 2 * H:]
        g = nx.tanh(gates[:, 3 * H:])
        c = i * g if c is None else f * c + i * g
        h = o * nx.tanh(c)
        outputs[t] = h
    return nx.stack(outputs, axis=1)


@dataclass
class BiLstmState:
    forward: Tensor
    backward: Tensor
    states: Tensor


def bilstm_forward(params: Mapping[str, Tensor], prefix: str, inputs: Tensor,
                   condition: np.ndarray | None = None) -> BiLstmState:
    """Bidirectional LSTM; ``condition`` (B, C) is appended at every step."""
    inputs = nx.as_tensor(inputs)
    expected = params[f"{prefix}.fw.wx"].shape[0]
    x = _with_condition(inputs, condition)
    if x.shape[-1] != expected:
        raise nx.ShapeError(f"bilstm_forward[{prefix}]", x.shape, params[f"{prefix}.fw.wx"].shape)
    fw = lstm_sequence(params, f"{prefix}.fw", x)
    bw = lstm_sequence(params, f"{prefix}.bw", x, reverse=True)
    return BiLstmState(fw, bw, nx.concat([fw, bw], axis=-1))


@dataclass
class AttentionResult:
    scores: list[Tensor]        # per head, (B, T, T)
    weights: list[Tensor]       # per head, (B, T, T)
    v_det: Tensor               # (B, T, W) deterministic contexts, heads concatenated
    mu: Tensor                  # (B, T, W)
    logvar: Tensor              # (B, T, W)
    contexts: Tensor            # (B, T, W) sampled or mean contexts
    output: Tensor              # (B, T, W) projected contexts plus residual

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.logvar.value)


def vmha(params: Mapping[str, Tensor], h: Tensor, condition: np.ndarray | None, num_heads: int,
         mode: str = "mean", rng: np.random.Generator | None = None) -> AttentionResult:
    """Variational multi-head self-attention over Bi-LSTM states.

    Each head attends over its own slice of the state width using raw
    scaled dot products, then maps its deterministic context (plus the
    condition) to a diagonal Gaussian from which the context is drawn.
    """
    h = nx.as_tensor(h)
    width = h.shape[-1]
    if width % num_heads:
        raise ValueError(f"num_heads={num_heads} does not divide width {width}")
    if mode not in ("mean", "sample"):
        raise ValueError(f"mode must be 'mean' or 'sample', got {mode!r}")
    dh = width // num_heads
    scale = 1.0 / math.sqrt(dh)
    scores, weights, dets, mus, lvs, ctxs = [], [], [], [], [], []
    for k in range(num_heads):
        hk = h[..., k * dh:(k + 1) * dh]
        s = (hk @ nx.swapaxes(hk, -1, -2)) * scale
        a = nx.softmax(s)
        v_det = a @ hk
        post_in = _with_condition(v_det, condition)
        mu = post_in @ params[f"att.{k}.mu.w"] + params[f"att.{k}.mu.b"]
        lv = post_in @ params[f"att.{k}.lv.w"] + params[f"att.{k}.lv.b"]
        if mode == "sample":
            eps = rng.standard_normal(mu.shape)
            ctx = mu + nx.exp(lv * 0.5) * eps
        else:
            ctx = mu
        scores.append(s)
        weights.append(a)
        dets.append(v_det)
        mus.append(mu)
        lvs.append(lv)
        ctxs.append(ctx)
    contexts = nx.concat(ctxs, axis=-1)
    output = h + contexts @ params["att.out.w"] + params["att.out.b"]
    return AttentionResult(scores, weights, nx.concat(dets, axis=-1), nx.concat(mus, axis=-1),
                           nx.concat(lvs, axis=-1), contexts, output)


@dataclass
class LatentSequence:
    mu: Tensor       # (B, T, latent_dim)
    logvar: Tensor   # (B, T, latent_dim)
    v: Tensor        # (B, T, latent_dim)

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.logvar.value)


def _as_batch(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :, None]
    elif z.ndim == 2:
        z = z[:, :, None]
    return z


def _as_conditions(c, batch: int, config: ModelConfig) -> np.ndarray:
    if c is None:
        c = np.zeros((batch, config.condition_dim))
    c = np.asarray(c, dtype=np.float64)
    if c.ndim == 1:
        c = np.broadcast_to(c, (batch, c.shape[0]))
    if c.shape != (batch, config.condition_dim):
        raise nx.ShapeError("condition", c.shape, (batch, config.condition_dim))
    return c


def _tensors(params: Mapping) -> dict[str, Tensor]:
    return {k: nx.as_tensor(v) for k, v in params.items()}


def encode(params: Mapping, config: ModelConfig, z, c=None, mode: str = "mean",
           rng: np.random.Generator | None = None, dropout_rng: np.random.Generator | None = None,
           ) -> tuple[LatentSequence, AttentionResult]:
    """Map windows ``z`` (B, T[, D]) to per-timestep latent Gaussians.

    ``dropout_rng`` enables dropout (training only). ``rng`` supplies the
    reparameterisation noise in sample mode.
    """
    p = _tensors(params)
    z = _as_batch(z)
    B, T, D = z.shape
    if T != config.window_length or D != config.input_dim:
        raise nx.ShapeError("encode", z.shape, (B, config.window_length, config.input_dim))
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    c = _as_conditions(c, B, config)
    embedded = Tensor(z) @ p["embed.w"] + p["embed.b"]
    embedded = embedded + positional_encoding(T, config.hidden_units)
    states = bilstm_forward(p, "enc", embedded, c).states
    states = _dropout(states, config.dropout_rate, dropout_rng)
    att = vmha(p, states, c, config.num_heads, mode, rng)
    enriched = _dropout(att.output, config.dropout_rate, dropout_rng)
    mu = enriched @ p["latent.mu.w"] + p["latent.mu.b"]
    lv = enriched @ p["latent.lv.w"] + p["latent.lv.b"]
    if mode == "sample":
        v = mu + nx.exp(lv * 0.5) * rng.standard_normal(mu.shape)
    else:
        v = mu
    return LatentSequence(mu, lv, v), att


def decode(params: Mapping, config: ModelConfig, v, c=None) -> Tensor:
    """Decode a latent sequence (B, T, latent_dim) to (B, T, input_dim)."""
    p = _tensors(params)
    v = nx.as_tensor(v)
    if v.ndim == 2:
        v = nx.reshape(v, (1,) + v.shape)
    B, T, L = v.shape
    if T != config.window_length or L != config.latent_dim:
        raise nx.ShapeError("decode", v.shape, (B, config.window_length, config.latent_dim))
    c = _as_conditions(c, B, config)
    states = bilstm_forward(p, "dec", v, c).states
    return states @ p["out.w"] + p["out.b"]


# loss --------------------------------------------------------------------

def gaussian_kl(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over the last axis, averaged elsewhere."""
    per_dim = (mu * mu + (nx.expm1(logvar) - logvar)) * 0.5
    return nx.tmean(nx.tsum(per_dim, axis=-1))


@dataclass
class LossTerms:
    total: Tensor
    reconstruction: float
    kl_latent: float
    kl_attention: float


def elbo_loss(params: Mapping, config: ModelConfig, z, c=None, mode: str = "sample",
              rng: np.random.Generator | None = None,
              dropout_rng: np.random.Generator | None = None) -> LossTerms:
    """MSE reconstruction plus weighted latent and attention KL terms."""
    z = _as_batch(z)
    if z.shape[0] == 0:
        raise ValueError("elbo_loss: empty batch")
    latent, att = encode(params, config, z, c, mode, rng, dropout_rng)
    z_hat = decode(params, config, latent.v, c)
    diff = z_hat - z
    recon = nx.tmean(diff * diff)
    kl_lat = gaussian_kl(latent.mu, latent.logvar)
    kl_att = gaussian_kl(att.mu, att.logvar)
    total = recon + kl_lat * config.kl_weight_latent + kl_att * config.kl_weight_attention
    return LossTerms(total, float(recon.value), float(kl_lat.value), float(kl_att.value))


# optimisation ------------------------------------------------------------

class Adam:
    def __init__(self, params: Mapping[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def loss_and_grads(params: Mapping[str, np.ndarray], config: ModelConfig, z, c=None, **kw
                   ) -> tuple[LossTerms, dict[str, np.ndarray]]:
    leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
    terms = elbo_loss(leaves, config, z, c, **kw)
    grads = nx.backward(terms.total, list(leaves.values()))
    return terms, dict(zip(leaves, grads))


@dataclass
class EpochRecord:
    epoch: int
    total: float
    reconstruction: float
    kl_latent: float
    kl_attention: float
    seconds: float = field(default=0.0, compare=False)


@dataclass
class TrainingReport:
    epochs: list[EpochRecord] = field(default_factory=list)

    @property
    def totals(self) -> np.ndarray:
        return np.array([e.total for e in self.epochs])


def train(params: Mapping[str, np.ndarray], config: ModelConfig, values, conditions=None,
          log=None) -> tuple[dict[str, np.ndarray], TrainingReport]:
    """Adam on the ELBO with seeded shuffling, sampling and dropout.

    ``values`` is (S, T) or (S, T, D). Epoch statistics are batch-size
    weighted means of the per-batch loss terms.
    """
    values = _as_batch(values)
    S = values.shape[0]
    if S == 0:
        raise ValueError("train: empty dataset")
    conditions = _as_conditions(conditions, S, config)
    seq = np.random.SeedSequence(config.seed)
    shuffle_rng, noise_rng, drop_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    opt = Adam(params, lr=config.learning_rate)
    report = TrainingReport()
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = shuffle_rng.permutation(S)
        sums = np.zeros(4)
        for lo in range(0, S, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            terms, grads = loss_and_grads(params, config, values[idx], conditions[idx],
                                          mode="sample", rng=noise_rng, dropout_rng=drop_rng)
            total = float(terms.total.value)
            if not np.isfinite(total):
                raise TrainingDivergedError(epoch)
            opt.step(params, grads)
            sums += len(idx) * np.array([total, terms.reconstruction, terms.kl_latent,
                                         terms.kl_attention])
        means = sums / S
        record = EpochRecord(epoch, *map(float, means), seconds=time.perf_counter() - start)
        report.epochs.append(record)
        if log is not None:
            log(record)
    return params, report


# inference ---------------------------------------------------------------

def encode_mean(params, config: ModelConfig, values, conditions=None) -> np.ndarray:
    """Posterior-mean latents for a panel, (S, T, latent_dim)."""
    latent, _ = encode(params, config, values, conditions, mode="mean")
    return latent.mu.value


def decode_values(params, config: ModelConfig, latents: np.ndarray, conditions=None) -> np.ndarray:
    out = decode(params, config, latents, conditions).value
    return out[..., 0] if config.input_dim == 1 else out


@dataclass
class Reconstruction:
    values: np.ndarray
    per_series_mse: np.ndarray

    @property
    def mse(self) -> float:
        return float(self.per_series_mse.mean())


def reconstruct(params, config: ModelConfig, values, conditions=None) -> Reconstruction:
    """Mean-mode encode/decode of every series in one batch."""
    values = np.asarray(values, dtype=np.float64)
    latents = encode_mean(params, config, values, conditions)
    recon = decode_values(params, config, latents, conditions)
    err = (recon - values) ** 2
    per_series = err.reshape(err.shape[0], -1).mean(axis=1)
    return Reconstruction(recon, per_series)


# model object + checkpoints ----------------------------------------------

class LGTAModel:
    """Config plus parameters, with the panel-level inference helpers."""

    def __init__(self, config: ModelConfig, params: Mapping[str, np.ndarray] | None = None):
        self.config = config
        self.params = dict(params) if params is not None else init_params(config)
        shapes = param_shapes(config)
        if set(self.params) != set(shapes):
            raise CheckpointError("parameter names do not match the configuration")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise CheckpointError(f"{name}: shape {self.params[name].shape} != {shape}")
        self.report: TrainingReport | None = None

    def fit(self, values, conditions=None, log=None) -> TrainingReport:
        self.params, self.report = train(self.params, self.config, values, conditions, log=log)
        return self.report

    def encode(self, values, conditions=None) -> np.ndarray:
        return encode_mean(self.params, self.config, values, conditions)

    def decode(self, latents, conditions=None) -> np.ndarray:
        return decode_values(self.params, self.config, latents, conditions)

    def reconstruct(self, values, conditions=None) -> Reconstruction:
        return reconstruct(self.params, self.config, values, conditions)

    def save(self, path) -> None:
        meta = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
                "config": self.config.to_dict(),
                "shapes": {k: list(v.shape) for k, v in self.params.items()}}
        arrays = {"__meta__": np.array(json.dumps(meta, sort_keys=True))}
        arrays.update((f"param:{k}", self.params[k]) for k in sorted(self.params))
        # an .npz archive written with fixed entry timestamps, so reruns are byte-identical
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name, array in arrays.items():
                info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(array), allow_pickle=False)
                zf.writestr(info, buf.getvalue())

    @classmethod
    def load(cls, path) -> "LGTAModel":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        with np.load(path, allow_pickle=False) as data:
            if "__meta__" not in data:
                raise CheckpointError(f"{path}: missing metadata")
            meta = json.loads(str(data["__meta__"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise CheckpointError(f"{path}: not an L-GTA checkpoint")
            major = str(meta.get("version", "")).split(".")[0]
            if major != CHECKPOINT_VERSION.split(".")[0]:
                raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            params = {k[len("param:"):]: np.array(data[k]) for k in data.files if k.startswith("param:")}
        for name, shape in meta["shapes"].items():
            if list(params[name].shape) != shape:
                raise CheckpointError(f"{path}: {name} stored with wrong shape")
        return cls(ModelConfig.from_dict(meta["config"]), params)
