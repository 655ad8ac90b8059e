"""Magnitude-domain transformations, their composition, and the two
augmentation routes: directly on series values, or on the latent
sequence of a trained model followed by decoding.

Every transform is a pure function of ``(x, spec, stream)``. ``stream``
separates the random draws of different series sharing one spec.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .data import TimeSeriesDataset

KINDS = ("jitter", "scaling", "magnitude_warp")


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    sigma: float = 0.0
    knots: int = 4
    seed: int = 0
    scaling_center: str = "one"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}; expected one of {KINDS}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.kind == "magnitude_warp" and self.knots < 2:
            raise ValueError("magnitude_warp needs at least 2 knots")
        if self.scaling_center not in ("one", "zero"):
            raise ValueError("scaling_center must be 'one' or 'zero'")

    def with_sigma(self, sigma: float) -> "TransformSpec":
        return replace(self, sigma=float(sigma))

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])


TransformChain = Sequence[TransformSpec]


def _as_2d(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim != 2:
        raise ValueError(f"expected (T,) or (T, D) input, got shape {x.shape}")
    return x, False


def _check(spec: TransformSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ValueError(f"spec kind {spec.kind!r} passed to {kind}")


def jitter(x, spec: TransformSpec, stream: int = 0) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise to every entry."""
    _check(spec, "jitter")
    arr, flat = _as_2d(x)
    out = arr + spec.sigma * spec.rng(stream).standard_normal(arr.shape)
    return out[:, 0] if flat else out


def scale(x, spec: TransformSpec, stream: int = 0) -> np.ndarray:
    """Multiply the whole series by one draw from N(center, sigma^2)."""
    _check(spec, "scaling")
    arr, flat = _as_2d(x)
    center = 1.0 if spec.scaling_center == "one" else 0.0
    alpha = center + spec.sigma * spec.rng(stream).standard_normal()
    out = alpha * arr
    return out[:, 0] if flat else out


def warp_curve(length: int, spec: TransformSpec, stream: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Natural cubic spline through N(1, sigma^2) knots at evenly spaced times.

    Returns ``(curve, knot_positions, knot_values)`` with time indexed 1..T.
    """
    if spec.knots > length:
        raise ValueError(f"{spec.knots} knots exceed series length {length}")
    knots_y = 1.0 + spec.sigma * spec.rng(stream).standard_normal(spec.knots)
    knots_x = np.linspace(1.0, float(length), spec.knots)
    t = np.arange(1, length + 1, dtype=np.float64)
    if np.all(knots_y == knots_y[0]):
        return np.full(length, knots_y[0]), knots_x, knots_y
    curve = CubicSpline(knots_x, knots_y, bc_type="natural")(t)
    return curve, knots_x, knots_y


def magnitude_warp(x, spec: TransformSpec, stream: int = 0) -> np.ndarray:
    """Multiply each timestep by a smooth random curve shared across dimensions."""
    _check(spec, "magnitude_warp")
    arr, flat = _as_2d(x)
    curve, _, _ = warp_curve(arr.shape[0], spec, stream)
    out = arr * curve[:, None]
    return out[:, 0] if flat else out


_DISPATCH = {"jitter": jitter, "scaling": scale, "magnitude_warp": magnitude_warp}


def apply(x, spec: TransformSpec, stream: int = 0) -> np.ndarray:
    return _DISPATCH[spec.kind](x, spec, stream)


def apply_chain(x, chain: TransformChain, stream: int = 0) -> np.ndarray:
    """Apply ``chain`` left to right; each element draws from its own seed."""
    chain = list(chain)
    if not chain:
        raise ValueError("transform chain is empty")
    out = np.asarray(x, dtype=np.float64)
    for spec in chain:
        out = apply(out, spec, stream)
    return out


def augment_direct(dataset: TimeSeriesDataset, chain: TransformChain) -> TimeSeriesDataset:
    """Transform each series' values independently (series index = stream)."""
    out = np.stack([apply_chain(row, chain, stream=i) for i, row in enumerate(dataset.values)])
    return dataset.with_values(out)


def transform_latents(latents: np.ndarray, chain: TransformChain) -> np.ndarray:
    """Apply ``chain`` to each series' (T, latent_dim) latent sequence."""
    return np.stack([apply_chain(v, chain, stream=i) for i, v in enumerate(latents)])


def augment_latent(model, dataset: TimeSeriesDataset, chain: TransformChain,
                   sample: bool = False, seed: int = 0) -> TimeSeriesDataset:
    """Encode (posterior means), transform the latent sequence, decode.

    With ``sample=True`` latents are drawn from the posterior instead,
    using ``seed``.
    """
    if model is None:
        raise ValueError("latent augmentation needs a trained model")
    from . import model as m

    conditions = dataset.conditions
    if sample:
        latent, _ = m.encode(model.params, model.config, dataset.values, conditions,
                             mode="sample", rng=np.random.default_rng(seed))
        latents = latent.v.value
    else:
        latents = model.encode(dataset.values, conditions)
    moved = transform_latents(latents, chain)
    return dataset.with_values(model.decode(moved, conditions))


def chain_from_records(records: Iterable[dict]) -> list[TransformSpec]:
    """Build a chain from ``{kind, sigma, knots, seed[, scaling_center]}`` records."""
    chain = []
    for rec in records:
        rec = dict(rec)
        kind = rec.pop("kind")
        chain.append(TransformSpec(
            kind=kind, sigma=float(rec.pop("sigma", 0.0)), knots=int(rec.pop("knots", 4)),
            seed=int(rec.pop("seed", 0)), scaling_center=rec.pop("scaling_center", "one")))
        if rec:
            raise ValueError(f"unknown transform fields: {sorted(rec)}")
    return chain
