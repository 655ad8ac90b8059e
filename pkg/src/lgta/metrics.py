"""Fidelity measures between original and transformed panels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KDE_GRID_POINTS = 256


def wasserstein1(a, b) -> float:
    """W1 between two equal-size empirical distributions.

    For equal sample sizes the optimal coupling pairs order statistics,
    so W1 is the mean absolute difference of the sorted samples.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"wasserstein1 needs equal sample sizes, got {a.size} and {b.size}")
    if a.size == 0:
        raise ValueError("wasserstein1 needs at least one sample")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def quantile_summary(values) -> tuple[float, float]:
    """Median and interquartile range with linear interpolation (type 7)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("quantile_summary of an empty sequence")
    q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
    return float(med), float(q3 - q1)


@dataclass
class DistanceReport:
    names: list[str]
    values: np.ndarray

    @property
    def median(self) -> float:
        return quantile_summary(self.values)[0]

    @property
    def iqr(self) -> float:
        return quantile_summary(self.values)[1]

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def distance_report(original, transformed, names=None) -> DistanceReport:
    """Per-series W1 between paired rows of two (S, T) panels."""
    original = np.asarray(original, dtype=np.float64)
    transformed = np.asarray(transformed, dtype=np.float64)
    if original.shape != transformed.shape or original.ndim != 2:
        raise ValueError(f"panel shapes differ: {original.shape} vs {transformed.shape}")
    w = np.array([wasserstein1(a, b) for a, b in zip(original, transformed)])
    if names is None:
        names = [str(i) for i in range(len(w))]
    return DistanceReport(list(names), w)


class UndefinedRatioError(ZeroDivisionError):
    pass


def reconstruction_ratio(model, original, transformed, conditions=None) -> float:
    """Reconstruction MSE of ``transformed`` as a percentage of that of ``original``."""
    original = np.asarray(original, dtype=np.float64)
    transformed = np.asarray(transformed, dtype=np.float64)
    if original.shape != transformed.shape:
        raise ValueError(f"panel shapes differ: {original.shape} vs {transformed.shape}")
    base = model.reconstruct(original, conditions).mse
    if base == 0.0:
        raise UndefinedRatioError("original reconstruction error is zero")
    return 100.0 * model.reconstruct(transformed, conditions).mse / base


@dataclass
class ResidualStats:
    residuals: np.ndarray
    mean: float
    std: float
    skewness: float
    bandwidth: float
    grid: np.ndarray
    density: np.ndarray

    @property
    def kde(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.density.tolist()))


def skewness(x) -> float:
    """Biased moment estimator m3 / m2^(3/2); zero when m2 is zero."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 3:
        raise ValueError(f"skewness needs at least 3 values, got {x.size}")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(d ** 3) / m2 ** 1.5)


def silverman_bandwidth(x) -> float:
    # sorted first so the result does not depend on input order
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    q1, q3 = np.quantile(x, [0.25, 0.75])
    spread = min(x.std(), (q3 - q1) / 1.34)
    if spread <= 0:
        spread = x.std()
    return float(0.9 * spread * x.size ** (-0.2))


def gaussian_kde(x, bandwidth: float | None = None, points: int = KDE_GRID_POINTS
                 ) -> tuple[np.ndarray, np.ndarray, float]:
    """Gaussian KDE on ``points`` evenly spaced values over [min-3h, max+3h]."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        # degenerate sample (all values equal)
        h = 1e-3 * max(1.0, abs(float(x.mean())))
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, points)
    density = np.zeros(points)
    for lo in range(0, x.size, 4096):
        chunk = x[lo:lo + 4096]
        u = (grid[:, None] - chunk[None, :]) / h
        density += np.exp(-0.5 * u * u).sum(axis=1)
    density /= x.size * h * np.sqrt(2 * np.pi)
    return grid, density, h


def residual_stats(original, transformed, kde_bandwidth: float | None = None) -> ResidualStats:
    """Pooled residuals (transformed - original) with moments and a KDE."""
    original = np.asarray(original, dtype=np.float64)
    transformed = np.asarray(transformed, dtype=np.float64)
    if original.shape != transformed.shape:
        raise ValueError(f"shapes differ: {original.shape} vs {transformed.shape}")
    r = (transformed - original).ravel()
    sk = skewness(r)
    grid, density, h = gaussian_kde(r, kde_bandwidth)
    return ResidualStats(r, float(r.mean()), float(r.std()), sk, h, grid, density)
