import numpy as np
import pytest

from lgta import tstr as F
from lgta.transforms import TransformSpec, augment_latent


def test_window_count():
    split = F.windowize(np.arange(10.0), 3, 1)
    assert split.windows_per_series == 7
    assert split.inputs.shape == (1, 7, 3) and split.targets.shape == (1, 7, 1)
    with pytest.raises(ValueError, match="too short"):
        F.windowize(np.arange(4.0), 3, 2)


@pytest.mark.parametrize("T, L, h", [(10, 3, 1), (40, 12, 1), (30, 5, 3), (96, 12, 2)])
def test_windows_never_overlap_and_split_is_chronological(T, L, h):
    panel = np.arange(2 * T, dtype=float).reshape(2, T)
    split = F.windowize(panel, L, h)
    assert split.windows_per_series == T - L - h + 1
    # values are their own time index in series 0
    assert np.all(split.targets[0].min(axis=1) > split.inputs[0].max(axis=1))
    last_train_target = split.targets[0, split.train_index].max()
    first_test_input = split.inputs[0, split.test_index].min()
    assert last_train_target < first_test_input
    assert len(split.test_index) == max(1, round(0.2 * split.windows_per_series))


def test_zero_epochs_returns_init():
    cfg = F.ForecasterConfig(lookback=4, epochs=0, seed=3)
    fc = F.train_forecaster(cfg, np.ones((5, 4)), np.ones((5, 1)))
    init = F.init_forecaster(cfg)
    for k in init:
        np.testing.assert_array_equal(fc.params[k], init[k])


def test_same_seed_same_weights():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(50, 6)), rng.normal(size=(50, 1))
    cfg = F.ForecasterConfig(lookback=6, epochs=3, batch_size=16, seed=4)
    a, b = F.train_forecaster(cfg, x, y), F.train_forecaster(cfg, x, y)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])


def test_empty_training_set():
    with pytest.raises(ValueError):
        F.train_forecaster(F.ForecasterConfig(lookback=3), np.zeros((0, 3)), np.zeros((0, 1)))


def test_ar1_beats_variance():
    rng = np.random.default_rng(1)
    S, T, phi = 20, 80, 0.9
    panel = np.empty((S, T))
    panel[:, 0] = rng.uniform(-1, 1, S)
    for t in range(1, T):
        panel[:, t] = phi * panel[:, t - 1]
    # restart each series from a fresh value so the corpus is not all decay
    panel = np.concatenate([panel[:, :40], panel[:, :40] * -1], axis=1)
    split = F.windowize(panel, 5)
    cfg = F.ForecasterConfig(lookback=5, epochs=40, seed=0, learning_rate=0.01, batch_size=64)
    fc = F.train_forecaster(cfg, *split.train_pairs())
    tx, ty = split.test_pairs()
    assert fc.mse(tx, ty) < ty.var()


def test_identical_training_panels_give_identical_errors(small_panel):
    cfg = F.ForecasterConfig(lookback=6, epochs=3, seed=2)
    v = small_panel.values
    errs = F.tstr_on_panels(v, {"a": v, "b": v.copy(), "c": v.copy()}, cfg)
    assert errs["a"] == errs["b"] == errs["c"]


def test_identity_chain_regimes(small_model, small_panel):
    cfg = F.ForecasterConfig(lookback=6, epochs=3, seed=2)
    identity = [TransformSpec("jitter", 0.0)]
    rep = F.tstr_compare(small_model, small_panel, identity, cfg)
    assert rep.direct == rep.original
    recon = small_model.reconstruct(small_panel.values, small_panel.conditions).values
    errs = F.tstr_on_panels(small_panel.values, {"recon": recon}, cfg)
    assert rep.latent == errs["recon"]
    split = F.windowize(small_panel.values, 6)
    tx, ty = split.test_pairs()
    assert rep.test_inputs.tobytes() == tx.tobytes()
    assert rep.test_targets.tobytes() == ty.tobytes()


def test_shuffle_order_stability(small_panel):
    base = dict(lookback=6, epochs=20, seed=5)
    ref = F.tstr_on_panels(small_panel.values, {"o": small_panel.values},
                           F.ForecasterConfig(**base))["o"]
    for shuffle in (11, 12, 13):
        err = F.tstr_on_panels(small_panel.values, {"o": small_panel.values},
                               F.ForecasterConfig(shuffle_seed=shuffle, **base))["o"]
        assert abs(err - ref) < 0.1 * ref


def test_report_rows(small_model, small_panel):
    cfg = F.ForecasterConfig(lookback=6, epochs=1, seed=2)
    rep = F.tstr_compare(small_model, small_panel, [TransformSpec("jitter", 0.1, seed=1)], cfg)
    assert [r[0] for r in rep.rows()] == ["original", "latent", "direct"]
    assert all(np.isfinite(v) for _, v in rep.rows())
