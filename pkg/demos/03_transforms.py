"""
Jitter, scaling and magnitude warping
=====================================

Each transform is a pure function of the input, its spec and a stream
index (the series number in a panel). Chains run left to right.
"""

import numpy as np

from lgta.transforms import TransformSpec, apply_chain, magnitude_warp, scale, warp_curve, jitter

t = np.arange(49)  # knots land on whole time steps for k=4
x = 1.0 + 0.5 * np.sin(2 * np.pi * t / 12)

# %%
# sigma = 0 leaves the series untouched, which makes every kind an identity
for kind in ("jitter", "scaling", "magnitude_warp"):
    same = np.array_equal(apply_chain(x, [TransformSpec(kind, 0.0)]), x)
    print(f"{kind:15s} sigma=0 identity: {same}")

# %%
# Jitter adds i.i.d. Gaussian noise
j = jitter(x, TransformSpec("jitter", 0.1, seed=4))
print("jitter residual std:", np.std(j - x).round(3))

# %%
# Scaling multiplies the whole series by one draw around 1. The literal
# zero-centred variant is kept behind a flag; at sigma 0 it erases the series.
s = scale(x, TransformSpec("scaling", 0.2, seed=4))
print("scale factor:", (s / x)[0].round(4))
print("zero-centred, sigma 0:", scale(x, TransformSpec("scaling", 0.0, scaling_center="zero"))[:4])

# %%
# Magnitude warping multiplies by a natural cubic spline through k knots
spec = TransformSpec("magnitude_warp", 0.3, knots=4, seed=4)
curve, kx, ky = warp_curve(len(x), spec)
print("knot times:", kx, "knot values:", ky.round(3))
print("curve at knots:", curve[kx.astype(int) - 1].round(3))
w = magnitude_warp(x, spec)

# %%
# Composition
chain = [TransformSpec("scaling", 0.1, seed=1), TransformSpec("jitter", 0.05, seed=2)]
print("chain output head:", apply_chain(x, chain)[:4].round(4))

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    fig, ax = plt.subplots(figsize=(7, 3))
    for label, y in [("original", x), ("jitter", j), ("scaling", s), ("warp", w)]:
        ax.plot(t, y, label=label)
    ax.legend()
    out = Path(__file__).with_name("output")
    out.mkdir(exist_ok=True)
    fig.savefig(out / "transforms.png", dpi=100, bbox_inches="tight")
    print("figure written to", out / "transforms.png")
except ImportError:
    pass
