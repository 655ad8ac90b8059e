"""
Calibrating latent strength and forecasting from synthetic data
===============================================================

For a fair comparison the latent sigma is tuned until the latent route
moves the panel as far (mean W1) as the direct route does. Then a small
RNN is trained on each panel and tested on held-out real windows.
Run ``04_train_and_augment.py`` first to reuse its checkpoint.
"""

from pathlib import Path

from lgta.calibrate import calibrate_against_direct
from lgta.data import normalize, synth_corpus
from lgta.model import LGTAModel
from lgta.transforms import TransformSpec
from lgta.tstr import ForecasterConfig, tstr_compare

out = Path(__file__).with_name("output")
checkpoint = out / "demo_model.npz"
if not checkpoint.exists():
    raise SystemExit(f"{checkpoint} missing: run 04_train_and_augment.py first")
model = LGTAModel.load(checkpoint)
ds = normalize(synth_corpus(24, 48, seed=0, sigma=0.05))

direct = TransformSpec("jitter", 0.05, seed=11)

# %%
# Bisection on sigma with frozen transform seeds
result = calibrate_against_direct(model, ds, direct)
print(f"calibrated sigma {result.sigma:.4g}: mean W1 {result.achieved:.5f} "
      f"vs direct {result.target:.5f} after {result.evaluations} evaluations")
if not result.converged:
    print("   not converged:", result.message)
for sigma, value in result.history:
    print(f"   f({sigma:.4g}) = {value:.5f}")

# %%
# Train-on-synthetic, test-on-real
fc = ForecasterConfig(lookback=8, epochs=20, seed=0)
rep = tstr_compare(model, ds, [direct.with_sigma(result.sigma)], fc, direct_chain=[direct])
for regime, mse in rep.rows():
    print(f"{regime:8s} test MSE {mse:.5f}")
