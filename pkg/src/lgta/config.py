"""Run configuration: an INI file with fixed sections and keys.

Transform chains are numbered sections, applied in index order::

    [latent.0]
    kind = jitter
    sigma = 0.2
    seed = 7

Seeds left unset are derived from ``[run] seed`` per component name, so
adding a component never changes the stream of another.
"""

from __future__ import annotations

import configparser
import re
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import ModelConfig
from .transforms import TransformSpec
from .tstr import ForecasterConfig


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, component: str) -> int:
    """Independent 32-bit seed for ``component`` under a global ``seed``."""
    key = zlib.crc32(component.encode())
    return int(np.random.SeedSequence(seed, spawn_key=(key,)).generate_state(1)[0])


_DATA_KEYS = {"path": str, "timestamps": str, "resample_weekly": bool, "top_k": int}
_RUN_KEYS = {"output_dir": str, "checkpoint": str, "seed": int}
_MODEL_KEYS = {f.name: f.type for f in fields(ModelConfig)}
_MODEL_KEYS.pop("condition_dim")
_FORECASTER_KEYS = {f.name: f.type for f in fields(ForecasterConfig)}
_CALIBRATION_KEYS = {"tolerance": float, "max_evaluations": int, "sigma_start": float}
_TRANSFORM_KEYS = {"kind": str, "sigma": float, "knots": int, "seed": int, "scaling_center": str}
_RESULT_KEYS = {"sigma", "achieved", "target", "evaluations", "converged", "message"}
_CHAIN_SECTION = re.compile(r"^(latent|direct)\.(\d+)$")
_RESULT_SECTION = re.compile(r"^calibration\.(\d+)$")


def _convert(section: str, key: str, raw: str, kind):
    kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, kind)
    kind = {"int | None": int}.get(kind, kind)
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return lowered in ("true", "yes", "1")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _read_section(parser, section: str, schema: dict) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in schema:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        out[key] = _convert(section, key, raw, schema[key])
    return out


@dataclass
class RunConfig:
    data_path: Path
    timestamps: bool | None = None
    resample_weekly: bool = False
    top_k: int = 0
    model: dict = field(default_factory=dict)
    latent_chain: list[TransformSpec] = field(default_factory=list)
    direct_chain: list[TransformSpec] = field(default_factory=list)
    forecaster: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0
    source: Path | None = None
    checkpoint: Path | None = None

    def model_config(self, window_length: int, condition_dim: int) -> ModelConfig:
        kw = dict(self.model)
        kw.setdefault("window_length", window_length)
        kw.setdefault("seed", derive_seed(self.seed, "model"))
        return ModelConfig(condition_dim=condition_dim, **kw)

    def forecaster_config(self) -> ForecasterConfig:
        kw = dict(self.forecaster)
        kw.setdefault("seed", derive_seed(self.seed, "forecaster"))
        return ForecasterConfig(**kw)

    @property
    def checkpoint_path(self) -> Path:
        return self.checkpoint if self.checkpoint is not None else self.output_dir / "model.npz"


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse ``path``; ``overrides`` may set data_path, output_dir, checkpoint, seed."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    known = {"data", "run", "model", "forecaster", "calibration"}
    chains: dict[str, dict[int, TransformSpec]] = {"latent": {}, "direct": {}}
    run = _read_section(parser, "run", _RUN_KEYS)
    overrides = overrides or {}
    seed = overrides["seed"] if overrides.get("seed") is not None else run.get("seed", 0)
    for section in parser.sections():
        if section in known or _RESULT_SECTION.match(section):
            continue
        match = _CHAIN_SECTION.match(section)
        if not match:
            raise ConfigError(f"unknown section [{section}]")
        rec = _read_section(parser, section, _TRANSFORM_KEYS)
        if "kind" not in rec:
            raise ConfigError(f"[{section}] missing 'kind'")
        rec.setdefault("seed", derive_seed(seed, section))
        try:
            chains[match[1]][int(match[2])] = TransformSpec(**rec)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    for section in parser.sections():
        if _RESULT_SECTION.match(section):
            unknown = set(parser[section]) - _RESULT_KEYS
            if unknown:
                raise ConfigError(f"[{section}] unknown keys {sorted(unknown)}")

    data = _read_section(parser, "data", _DATA_KEYS)
    data_path = overrides.get("data_path") or data.get("path")
    if not data_path:
        raise ConfigError("[data] path is required")
    stamps = data.get("timestamps", "auto").lower()
    if stamps not in ("auto", "true", "false"):
        raise ConfigError("[data] timestamps must be auto, true or false")

    base = path.parent
    resolve = lambda p: Path(p) if Path(p).is_absolute() else base / p
    cfg = RunConfig(
        data_path=Path(overrides["data_path"]) if overrides.get("data_path") else resolve(data_path),
        timestamps=None if stamps == "auto" else stamps == "true",
        resample_weekly=data.get("resample_weekly", False),
        top_k=data.get("top_k", 0),
        model=_read_section(parser, "model", _MODEL_KEYS),
        latent_chain=[chains["latent"][i] for i in sorted(chains["latent"])],
        direct_chain=[chains["direct"][i] for i in sorted(chains["direct"])],
        forecaster=_read_section(parser, "forecaster", _FORECASTER_KEYS),
        calibration=_read_section(parser, "calibration", _CALIBRATION_KEYS),
        output_dir=Path(overrides["output_dir"]) if overrides.get("output_dir")
        else resolve(run.get("output_dir", "out")),
        seed=seed,
        source=path,
        checkpoint=Path(overrides["checkpoint"]) if overrides.get("checkpoint")
        else (resolve(run["checkpoint"]) if "checkpoint" in run else None),
    )
    return cfg


def record_calibration(path, index: int, result) -> None:
    """Store a calibration outcome and the calibrated sigma in the config file."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path)
    section = f"latent.{index}"
    parser[section]["sigma"] = repr(result.sigma)
    parser[f"calibration.{index}"] = {
        "sigma": repr(result.sigma), "achieved": repr(result.achieved),
        "target": repr(result.target), "evaluations": str(result.evaluations),
        "converged": str(result.converged).lower(), "message": result.message}
    with open(path, "w") as fh:
        parser.write(fh)
