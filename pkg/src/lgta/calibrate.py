"""Match the strength of latent-space and direct augmentation by mean W1.

The objective ``f(sigma)`` is the mean per-series W1 between the original
panel and its latent augmentation at ``sigma``. All transform seeds stay
fixed, so ``f`` is a deterministic function and plain bisection applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesDataset
from .metrics import distance_report
from .transforms import TransformSpec, augment_direct, augment_latent

SIGMA_CAP = 64.0
GRID_POINTS = 32


@dataclass
class CalibrationResult:
    sigma: float
    achieved: float
    target: float
    evaluations: int
    converged: bool
    tolerance: float
    history: list[tuple[float, float]] = field(default_factory=list)
    message: str = ""

    @property
    def relative_gap(self) -> float:
        return abs(self.achieved - self.target) / self.target


def latent_objective(model, dataset: TimeSeriesDataset, spec: TransformSpec):
    def f(sigma: float) -> float:
        out = augment_latent(model, dataset, [spec.with_sigma(sigma)])
        return distance_report(dataset.values, out.values).mean
    return f


def direct_target(dataset: TimeSeriesDataset, direct_spec: TransformSpec) -> float:
    """Mean per-series W1 produced by the direct method."""
    out = augment_direct(dataset, [direct_spec])
    return distance_report(dataset.values, out.values).mean


def calibrate_sigma(model, dataset: TimeSeriesDataset, spec: TransformSpec, target: float,
                    tolerance: float = 0.05, max_evaluations: int = 40,
                    sigma_start: float = 0.1, objective=None) -> CalibrationResult:
    """Find sigma with |f(sigma) - target| / target <= tolerance.

    The bracket starts at [0, sigma_start] and doubles its upper end until
    ``f`` reaches the target or the cap of 64 is hit, then bisects. A
    midpoint value outside its bracket's values means ``f`` is not
    monotone there; a 32-point grid over the bracket is searched instead.
    ``objective`` overrides ``f`` (used in tests).
    """
    if not target > 0:
        raise ValueError(f"calibration target must be positive, got {target}")
    if sigma_start <= 0:
        raise ValueError("sigma_start must be positive")
    f = objective or latent_objective(model, dataset, spec)
    history: list[tuple[float, float]] = []

    def evaluate(sigma: float) -> float:
        value = float(f(sigma))
        history.append((float(sigma), value))
        return value

    def close(value: float) -> bool:
        return abs(value - target) / target <= tolerance

    def result(sigma, value, converged, message=""):
        return CalibrationResult(float(sigma), float(value), float(target), len(history),
                                 converged, tolerance, history, message)

    def best():
        return min(history, key=lambda p: abs(p[1] - target))

    lo, f_lo = 0.0, evaluate(0.0)
    if close(f_lo):
        return result(lo, f_lo, True)
    if f_lo > target:
        return result(lo, f_lo, False,
                      f"target {target:.6g} is below f(0)={f_lo:.6g}, the reconstruction gap")

    hi = min(sigma_start, SIGMA_CAP)
    f_hi = evaluate(hi)
    while f_hi < target and not close(f_hi):
        if hi >= SIGMA_CAP or len(history) >= max_evaluations:
            s, v = best()
            return result(s, v, False, f"target not reached below sigma cap {SIGMA_CAP:g}")
        lo, f_lo = hi, f_hi
        hi = min(2 * hi, SIGMA_CAP)
        f_hi = evaluate(hi)
    if close(f_hi):
        return result(hi, f_hi, True)

    while len(history) < max_evaluations:
        mid = 0.5 * (lo + hi)
        f_mid = evaluate(mid)
        if close(f_mid):
            return result(mid, f_mid, True)
        if not f_lo <= f_mid <= f_hi:
            return _grid_fallback(evaluate, lo, hi, target, close, result)
        if f_mid < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    s, v = best()
    return result(s, v, False, f"no convergence within {max_evaluations} evaluations")


def _grid_fallback(evaluate, lo, hi, target, close, result):
    grid = np.linspace(lo, hi, GRID_POINTS)
    values = [evaluate(s) for s in grid]
    i = int(np.argmin([abs(v - target) for v in values]))
    message = "objective not monotone on bracket; used grid search"
    return result(grid[i], values[i], close(values[i]), message)


def calibrate_against_direct(model, dataset: TimeSeriesDataset, direct_spec: TransformSpec,
                             **kwargs) -> CalibrationResult:
    """Tune the latent sigma of ``direct_spec``'s kind to its direct mean W1."""
    target = direct_target(dataset, direct_spec)
    kwargs.setdefault("sigma_start", max(direct_spec.sigma, 1e-3))
    return calibrate_sigma(model, dataset, direct_spec, target, **kwargs)
