"""Command-line entry point: ``lgta <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as D
from .calibrate import calibrate_sigma, direct_target
from .config import ConfigError, RunConfig, derive_seed, load_config, record_calibration
from .metrics import distance_report, reconstruction_ratio, residual_stats
from .model import CheckpointError, LGTAModel, ModelConfig, TrainingDivergedError, elbo_loss, init_params
from .numerics import grad_check
from .reports import (write_calibration_report, write_distance_report, write_kde,
                      write_residual_report, write_table, write_training_report,
                      write_tstr_report)
from .transforms import augment_direct, augment_latent
from .tstr import ForecasterDivergedError, tstr_compare

log = logging.getLogger("lgta")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    pass


# shared steps ------------------------------------------------------------

def prepare_dataset(cfg: RunConfig) -> D.TimeSeriesDataset:
    ds = D.load_csv(cfg.data_path, timestamps=cfg.timestamps)
    if cfg.resample_weekly:
        ds = D.resample_weekly(ds)
    if cfg.top_k:
        ds = D.select_top_k(ds, cfg.top_k)
    return D.normalize(ds)


def load_model(cfg: RunConfig) -> LGTAModel:
    return LGTAModel.load(cfg.checkpoint_path)


def _output_dir(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _chain(cfg: RunConfig, mode: str):
    chain = cfg.latent_chain if mode == "latent" else cfg.direct_chain
    if not chain:
        raise ConfigError(f"no [{mode}.N] transform sections in the configuration")
    return chain


def _augment(cfg: RunConfig, ds, mode: str, model=None):
    if mode == "latent":
        return augment_latent(model or load_model(cfg), ds, _chain(cfg, mode))
    return augment_direct(ds, _chain(cfg, mode))


# subcommands -------------------------------------------------------------

def cmd_train(cfg: RunConfig, args) -> int:
    ds = prepare_dataset(cfg)
    mc = cfg.model_config(ds.length, ds.conditions.shape[1])
    model = LGTAModel(mc)
    log.info("training %d series of length %d for %d epochs", ds.n_series, ds.length, mc.epochs)
    report = model.fit(ds.values, ds.conditions, log=lambda r: log.debug(
        "epoch %d total %.6g (%.2fs)", r.epoch, r.total, r.seconds))
    out = _output_dir(cfg)
    cfg.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    model.save(cfg.checkpoint_path)
    write_training_report(out / "training_report.tsv", report)
    recon = model.reconstruct(ds.values, ds.conditions)
    D.save_csv(D.denormalize(ds.with_values(recon.values)), out / "reconstruction.csv")
    log.info("reconstruction MSE %.6g", recon.mse)
    return EXIT_OK


def cmd_augment(cfg: RunConfig, args) -> int:
    ds = prepare_dataset(cfg)
    augmented = _augment(cfg, ds, args.mode)
    path = _output_dir(cfg) / f"augmented_{args.mode}.csv"
    D.save_csv(D.denormalize(augmented), path)
    log.info("wrote %s", path)
    return EXIT_OK


def _evaluate_one(out: Path, mode: str, ds, transformed, model):
    dist = distance_report(ds.values, transformed, ds.names)
    write_distance_report(out / f"distances_{mode}.tsv", dist)
    stats = residual_stats(ds.values, transformed)
    write_residual_report(out / f"residuals_{mode}.tsv", stats)
    write_kde(out / f"kde_{mode}.tsv", stats)
    ratio = (reconstruction_ratio(model, ds.values, transformed, ds.conditions)
             if model is not None else float("nan"))
    return (mode, dist.median, dist.iqr, dist.mean, ratio, stats.mean, stats.std, stats.skewness)


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ds = prepare_dataset(cfg)
    out = _output_dir(cfg)
    model = load_model(cfg) if cfg.checkpoint_path.exists() else None
    panels = {}
    if args.augmented:
        other = D.load_csv(args.augmented, timestamps=cfg.timestamps)
        if other.values.shape != (ds.n_series, ds.length):
            raise D.DataError(f"{args.augmented}: shape {other.values.shape} does not match "
                              f"the dataset {(ds.n_series, ds.length)}")
        span = np.where(ds.constant, 1.0, ds.maximum - ds.minimum)
        panels["custom"] = (other.values - ds.minimum[:, None]) / span[:, None]
    else:
        if cfg.latent_chain:
            if model is None:
                raise FileNotFoundError(f"checkpoint not found: {cfg.checkpoint_path}")
            panels["latent"] = _augment(cfg, ds, "latent", model).values
        if cfg.direct_chain:
            panels["direct"] = _augment(cfg, ds, "direct").values
        if not panels:
            raise ConfigError("nothing to evaluate: no transform chains configured")
    rows = [_evaluate_one(out, mode, ds, panel, model) for mode, panel in panels.items()]
    cols = [("mode", "str"), ("w1_median", "float"), ("w1_iqr", "float"), ("w1_mean", "float"),
            ("reconstruction_ratio", "float"), ("residual_mean", "float"),
            ("residual_std", "float"), ("residual_skewness", "float")]
    write_table(out / "summary.tsv", cols, rows)
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, args) -> int:
    ds = prepare_dataset(cfg)
    model = load_model(cfg)
    latent, direct = _chain(cfg, "latent"), _chain(cfg, "direct")
    if len(latent) != len(direct):
        raise ConfigError("calibration pairs latent.N with direct.N; chain lengths differ")
    results = []
    for i, (lat, dire) in enumerate(zip(latent, direct)):
        if lat.kind != dire.kind:
            raise ConfigError(f"latent.{i} is {lat.kind} but direct.{i} is {dire.kind}")
        target = direct_target(ds, dire)
        kw = dict(cfg.calibration)
        kw.setdefault("sigma_start", max(dire.sigma, 1e-3))
        result = calibrate_sigma(model, ds, lat, target, **kw)
        log.info("latent.%d %s: sigma %.6g achieved %.6g target %.6g (%d evaluations)%s",
                 i, lat.kind, result.sigma, result.achieved, result.target, result.evaluations,
                 "" if result.converged else " NOT CONVERGED: " + result.message)
        results.append((f"latent.{i}", result))
        if cfg.source is not None:
            record_calibration(cfg.source, i, result)
    write_calibration_report(_output_dir(cfg) / "calibration.tsv", results)
    if not all(r.converged for _, r in results):
        raise NumericalFailure("calibration did not converge")
    return EXIT_OK


def cmd_tstr(cfg: RunConfig, args) -> int:
    ds = prepare_dataset(cfg)
    model = load_model(cfg)
    report = tstr_compare(model, ds, _chain(cfg, "latent"), cfg.forecaster_config(),
                          direct_chain=_chain(cfg, "direct"))
    write_tstr_report(_output_dir(cfg) / "tstr.tsv", report)
    return EXIT_OK


GRADCHECK_CONFIG = dict(window_length=8, condition_dim=2, hidden_units=8, latent_dim=2,
                        num_heads=2, dropout_rate=0.0)


def gradcheck_model(seed: int = 0, corrupt: bool = False, tolerance: float = 1e-4):
    """Gradient-check the ELBO of a tiny model in mean and frozen-noise sample mode."""
    config = ModelConfig(seed=seed, **GRADCHECK_CONFIG)
    params = init_params(config)
    rng = np.random.default_rng(seed)
    z = rng.random((2, config.window_length))
    c = np.eye(config.condition_dim)[[0, 1]]

    def corrupt_hook(grads):
        grads["out.b"][0] += 1.0

    reports = {}
    for mode in ("mean", "sample"):
        def fn(tensors, mode=mode):
            noise = np.random.default_rng(derive_seed(seed, "gradcheck-noise"))
            return elbo_loss(tensors, config, z, c, mode=mode, rng=noise).total
        reports[mode] = grad_check(fn, params, tolerance=tolerance,
                                   analytic_hook=corrupt_hook if corrupt else None)
    return reports


def cmd_gradcheck(cfg: RunConfig | None, args) -> int:
    reports = gradcheck_model(seed=cfg.seed if cfg else (args.seed or 0), corrupt=args.corrupt)
    rows = [(mode, name, size, err) for mode, rep in reports.items() for name, size, err in rep.rows()]
    out = cfg.output_dir if cfg else Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "gradcheck.tsv", [("mode", "str"), ("parameter", "str"), ("entries", "int"),
                                        ("max_relative_error", "float")], rows)
    worst = max(rep.max_error for rep in reports.values())
    passed = all(rep.passed for rep in reports.values())
    print(f"gradcheck {'passed' if passed else 'FAILED'}: max relative error {worst:.3e}")
    if not passed:
        raise NumericalFailure(f"gradient check failed (max relative error {worst:.3e})")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.out is None:
        raise ConfigError("synth needs --out")
    ds = D.synth_corpus(args.series, args.length, seed=args.seed or 0, sigma=args.sigma)
    D.save_csv(ds, args.out)
    return EXIT_OK


# argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgta", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run configuration (INI)")
        p.add_argument("--data", help="override [data] path")
        p.add_argument("--out", help="override [run] output_dir")
        p.add_argument("--checkpoint", help="override [run] checkpoint (default OUT/model.npz)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        return p

    common(sub.add_parser("train", help="train the model, write checkpoint and report"))
    p = common(sub.add_parser("augment", help="write an augmented CSV"))
    p.add_argument("--mode", choices=("latent", "direct"), required=True)
    p = common(sub.add_parser("evaluate", help="distance, reconstruction and residual reports"))
    p.add_argument("--augmented", help="evaluate this CSV against the dataset instead")
    common(sub.add_parser("calibrate", help="match latent sigma to the direct mean W1"))
    common(sub.add_parser("tstr", help="train-on-synthetic, test-on-real comparison"))
    p = common(sub.add_parser("gradcheck", help="finite-difference check of the ELBO gradient"),
               config_required=False)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p = sub.add_parser("synth", help="write a synthetic corpus CSV")
    p.add_argument("--series", type=int, default=64)
    p.add_argument("--length", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--out")
    return parser


COMMANDS = {"train": cmd_train, "augment": cmd_augment, "evaluate": cmd_evaluate,
            "calibrate": cmd_calibrate, "tstr": cmd_tstr, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config, {"data_path": args.data, "output_dir": args.out,
                                            "checkpoint": args.checkpoint, "seed": args.seed})
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"lgta: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, D.DataError, CheckpointError) as exc:
        print(f"lgta: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, TrainingDivergedError, ForecasterDivergedError, FloatingPointError,
            ZeroDivisionError) as exc:
        print(f"lgta: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"lgta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
