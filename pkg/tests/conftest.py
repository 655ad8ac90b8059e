import sys

import numpy as np
import pytest

from lgta.data import normalize, synth_corpus
from lgta.model import LGTAModel, ModelConfig


@pytest.fixture(scope="session")
def small_panel():
    return normalize(synth_corpus(16, 24, seed=7, sigma=0.05))


@pytest.fixture(scope="session")
def small_model(small_panel):
    ds = small_panel
    cfg = ModelConfig(window_length=ds.length, condition_dim=ds.conditions.shape[1],
                      hidden_units=8, latent_dim=2, num_heads=2, dropout_rate=0.0,
                      kl_weight_latent=1e-4, kl_weight_attention=1e-4, epochs=100,
                      batch_size=4, seed=1)
    model = LGTAModel(cfg)
    model.fit(ds.values, ds.conditions)
    return model


def pytest_terminal_summary(terminalreporter):
    # acceptance lines survive output capture by going through the reporter
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance summary")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
