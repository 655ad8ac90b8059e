"""
Panels: synthetic corpus, CSV round trip, preprocessing
=======================================================

A panel is S aligned series of length T. Group labels in the CSV header
(``name|group``) become one-hot condition vectors for the model.
"""

from pathlib import Path

import numpy as np

from lgta import data as D

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# %%
# Trend plus sinusoid plus noise, one period class per series
ds, params = D.synth_corpus(6, 28, seed=1, sigma=0.05, return_params=True)
print(ds.names, ds.groups)
print("periods:", params.period)
print("condition vectors:\n", ds.conditions)

# %%
# Save, reload, and check the values survive at 12 significant digits
D.save_csv(ds, out / "panel.csv")
back = D.load_csv(out / "panel.csv")
print("max round-trip error:", np.abs(back.values - ds.values).max())

# %%
# Daily to weekly by summing 7-day blocks; the partial week at the end is dropped
weekly = D.resample_weekly(ds)
print("daily length", ds.length, "-> weekly length", weekly.length)

# %%
# Keep the series with the largest means, then scale each to [0, 1]
top = D.select_top_k(ds, 3)
print("top 3 by mean:", top.names, np.round(top.values.mean(axis=1), 2))
norm = D.normalize(top)
print("range after normalize:", norm.values.min(), norm.values.max())
print("inverse exact:", np.allclose(D.denormalize(norm).values, top.values, atol=1e-12))
