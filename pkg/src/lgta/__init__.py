"""Latent-space time-series augmentation with a variational recurrent autoencoder."""

from .calibrate import CalibrationResult, calibrate_against_direct, calibrate_sigma
from .data import (DataError, TimeSeriesDataset, denormalize, load_csv, normalize,
                   resample_weekly, save_csv, select_top_k, synth_corpus)
from .metrics import (DistanceReport, ResidualStats, distance_report, quantile_summary,
                      reconstruction_ratio, residual_stats, skewness, wasserstein1)
from .model import LGTAModel, ModelConfig
from .transforms import TransformSpec, apply_chain, augment_direct, augment_latent
from .tstr import ForecasterConfig, TstrReport, tstr_compare

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "DataError", "DistanceReport", "ForecasterConfig", "LGTAModel",
    "ModelConfig", "ResidualStats", "TimeSeriesDataset", "TransformSpec", "TstrReport",
    "apply_chain", "augment_direct", "augment_latent", "calibrate_against_direct",
    "calibrate_sigma", "denormalize", "distance_report", "load_csv", "normalize",
    "quantile_summary", "reconstruction_ratio", "resample_weekly", "residual_stats",
    "save_csv", "select_top_k", "skewness", "synth_corpus", "tstr_compare", "wasserstein1",
]
