"""Train-on-synthetic, test-on-real with a small recurrent forecaster."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .data import TimeSeriesDataset
from .model import Adam
from .numerics import Tensor
from .transforms import TransformChain, augment_direct, augment_latent


class ForecasterDivergedError(RuntimeError):
    pass


@dataclass
class ForecasterConfig:
    lookback: int = 12
    horizon: int = 1
    hidden_units: int = 32
    epochs: int = 30
    learning_rate: float = 0.005
    batch_size: int = 128
    seed: int = 0
    shuffle_seed: int | None = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.lookback < 1 or self.horizon < 1 or self.hidden_units < 1:
            raise ValueError("lookback, horizon and hidden_units must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass
class WindowSplit:
    """Sliding windows per series with a purged chronological split.

    ``inputs`` is (S, n, L) and ``targets`` (S, n, horizon) for window
    starts ``0..n-1``. Test windows are the final fraction; training
    windows are those whose targets end before the first test input.
    """

    inputs: np.ndarray
    targets: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray

    @property
    def windows_per_series(self) -> int:
        return self.inputs.shape[1]

    def train_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.inputs[:, self.train_index].reshape(-1, self.inputs.shape[2]),
                self.targets[:, self.train_index].reshape(-1, self.targets.shape[2]))

    def test_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.inputs[:, self.test_index].reshape(-1, self.inputs.shape[2]),
                self.targets[:, self.test_index].reshape(-1, self.targets.shape[2]))


def windowize(panel, lookback: int, horizon: int = 1, test_fraction: float = 0.2) -> WindowSplit:
    panel = np.asarray(panel, dtype=np.float64)
    if panel.ndim == 1:
        panel = panel[None, :]
    T = panel.shape[1]
    n = T - lookback - horizon + 1
    if n < 1:
        raise ValueError(f"series of length {T} too short for lookback {lookback} + horizon {horizon}")
    starts = np.arange(n)
    inputs = np.stack([panel[:, s:s + lookback] for s in starts], axis=1)
    targets = np.stack([panel[:, s + lookback:s + lookback + horizon] for s in starts], axis=1)
    n_test = max(1, int(round(test_fraction * n)))
    first_test = n - n_test
    # last target index of window s is s + lookback + horizon - 1
    train = starts[starts + lookback + horizon - 1 < first_test]
    return WindowSplit(inputs, targets, train, starts[first_test:])


def init_forecaster(config: ForecasterConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    H = config.hidden_units
    glorot = lambda a, b: rng.uniform(-math.sqrt(6 / (a + b)), math.sqrt(6 / (a + b)), (a, b))
    return {"wx": glorot(1, H), "wh": glorot(H, H), "b": np.zeros(H),
            "wo": glorot(H, config.horizon), "bo": np.zeros(config.horizon)}


def forecast_graph(params, x) -> Tensor:
    """tanh recurrence over the lookback window, affine head on the last state."""
    p = {k: nx.as_tensor(v) for k, v in params.items()}
    x = np.asarray(x, dtype=np.float64)
    h = None
    for t in range(x.shape[1]):
        pre = Tensor(x[:, t:t + 1]) @ p["wx"] + p["b"]
        if h is not None:
            pre = pre + h @ p["wh"]
        h = nx.tanh(pre)
    return h @ p["wo"] + p["bo"]


@dataclass
class Forecaster:
    config: ForecasterConfig
    params: dict[str, np.ndarray]
    losses: list[float]

    def predict(self, x) -> np.ndarray:
        return forecast_graph(self.params, x).value

    def mse(self, x, y) -> float:
        return float(np.mean((self.predict(x) - np.asarray(y)) ** 2))


def train_forecaster(config: ForecasterConfig, x, y) -> Forecaster:
    """Adam on one-step MSE with seeded initialisation and batch order."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("no training pairs")
    params = init_forecaster(config)
    shuffle_seed = config.seed if config.shuffle_seed is None else config.shuffle_seed
    rng = np.random.default_rng(np.random.SeedSequence(shuffle_seed, spawn_key=(1,)))
    opt = Adam(params, lr=config.learning_rate)
    losses = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(x))
        total = 0.0
        for lo in range(0, len(x), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
            diff = forecast_graph(leaves, x[idx]) - y[idx]
            loss = nx.tmean(diff * diff)
            value = float(loss.value)
            if not np.isfinite(value):
                raise ForecasterDivergedError(f"forecaster loss non-finite at epoch {epoch}")
            grads = nx.backward(loss, list(leaves.values()))
            opt.step(params, dict(zip(leaves, grads)))
            total += value * len(idx)
        losses.append(total / len(x))
    return Forecaster(config, params, losses)


@dataclass
class TstrReport:
    original: float
    latent: float
    direct: float
    test_inputs: np.ndarray
    test_targets: np.ndarray

    def rows(self):
        return [("original", self.original), ("latent", self.latent), ("direct", self.direct)]


def tstr_on_panels(original, training_panels: dict[str, np.ndarray], config: ForecasterConfig
                   ) -> dict[str, float]:
    """Train one forecaster per panel; test all on the original's held-out windows."""
    real = windowize(original, config.lookback, config.horizon, config.test_fraction)
    tx, ty = real.test_pairs()
    errors = {}
    for name, panel in training_panels.items():
        split = windowize(panel, config.lookback, config.horizon, config.test_fraction)
        fx, fy = split.train_pairs()
        errors[name] = train_forecaster(config, fx, fy).mse(tx, ty)
    return errors


def tstr_compare(model, dataset: TimeSeriesDataset, chain: TransformChain,
                 config: ForecasterConfig, direct_chain: TransformChain | None = None) -> TstrReport:
    """Forecast error on real held-out windows after training on original,
    latent-augmented and direct-augmented panels.

    ``direct_chain`` defaults to ``chain``; pass the uncalibrated direct
    specification when the latent chain has been calibrated.
    """
    latent = augment_latent(model, dataset, chain).values
    direct = augment_direct(dataset, direct_chain if direct_chain is not None else chain).values
    errors = tstr_on_panels(dataset.values,
                            {"original": dataset.values, "latent": latent, "direct": direct}, config)
    real = windowize(dataset.values, config.lookback, config.horizon, config.test_fraction)
    tx, ty = real.test_pairs()
    return TstrReport(errors["original"], errors["latent"], errors["direct"], tx, ty)
