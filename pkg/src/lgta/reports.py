"""Tab-separated report files.

The first line is the schema: ``name:type`` per column, ``type`` one of
``str``, ``int``, ``float``. Floats are written with ``repr`` so reading a
report back recovers every value exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from .calibrate import CalibrationResult
from .metrics import DistanceReport, ResidualStats
from .model import TrainingReport
from .tstr import TstrReport

_PARSERS = {"str": str, "int": int, "float": float}


def _format(value, kind: str) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    text = str(value)
    if "\t" in text or "\n" in text:
        raise ValueError(f"string cell contains a tab or newline: {text!r}")
    return text


def write_table(path, columns: Sequence[tuple[str, str]], rows: Iterable[Sequence]) -> None:
    for _, kind in columns:
        if kind not in _PARSERS:
            raise ValueError(f"unknown column type {kind!r}")
    lines = ["\t".join(f"{name}:{kind}" for name, kind in columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, schema has {len(columns)}")
        lines.append("\t".join(_format(v, k) for v, (_, k) in zip(row, columns)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[tuple[str, str]], list[list]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty report")
    columns = [tuple(cell.rsplit(":", 1)) for cell in lines[0].split("\t")]
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(columns):
            raise ValueError(f"{path}: line {n} has {len(cells)} cells")
        rows.append([_PARSERS[k](c) for c, (_, k) in zip(cells, columns)])
    return columns, rows


SUMMARY_ROWS = ("__median__", "__iqr__", "__mean__")


def write_distance_report(path, report: DistanceReport) -> None:
    rows = [(n, v) for n, v in zip(report.names, report.values)]
    rows += [("__median__", report.median), ("__iqr__", report.iqr), ("__mean__", report.mean)]
    write_table(path, [("series", "str"), ("w1", "float")], rows)


def read_distance_report(path) -> tuple[dict[str, float], dict[str, float]]:
    """Return (per-series values, summary rows)."""
    _, rows = read_table(path)
    detail = {n: v for n, v in rows if n not in SUMMARY_ROWS}
    summary = {n: v for n, v in rows if n in SUMMARY_ROWS}
    return detail, summary


def write_training_report(path, report: TrainingReport) -> None:
    # wall-clock is left out so reruns stay byte-identical
    cols = [("epoch", "int"), ("total", "float"), ("reconstruction", "float"),
            ("kl_latent", "float"), ("kl_attention", "float")]
    write_table(path, cols, [(e.epoch, e.total, e.reconstruction, e.kl_latent, e.kl_attention)
                             for e in report.epochs])


def write_residual_report(path, stats: ResidualStats) -> None:
    rows = [("mean", stats.mean), ("std", stats.std), ("skewness", stats.skewness),
            ("bandwidth", stats.bandwidth)]
    write_table(path, [("statistic", "str"), ("value", "float")], rows)


def write_kde(path, stats: ResidualStats) -> None:
    write_table(path, [("residual", "float"), ("density", "float")],
                zip(stats.grid, stats.density))


def write_tstr_report(path, report: TstrReport) -> None:
    write_table(path, [("regime", "str"), ("test_mse", "float")], report.rows())


def write_calibration_report(path, results: Sequence[tuple[str, CalibrationResult]]) -> None:
    cols = [("element", "str"), ("sigma", "float"), ("achieved", "float"), ("target", "float"),
            ("evaluations", "int"), ("converged", "int")]
    write_table(path, cols, [(name, r.sigma, r.achieved, r.target, r.evaluations, int(r.converged))
                             for name, r in results])
