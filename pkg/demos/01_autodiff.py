"""
Reverse-mode differentiation and gradient checking
==================================================

Every model operation is built from a handful of tensor primitives that
record themselves on a tape. Calling ``backward`` walks the tape once and
returns the gradient for each requested leaf.
"""

import numpy as np

from lgta import numerics as nx
from lgta.numerics import Tensor

# %%
# A scalar function and its derivative
x = Tensor(3.0, requires_grad=True)
(dx,) = nx.backward(x * x, [x])
print("d(x^2)/dx at 3 =", dx)

# %%
# Softmax gradient, compared with central differences
v = Tensor(np.zeros(2), requires_grad=True)
(g,) = nx.backward(nx.softmax(v)[0], [v])
print("d softmax_0 / dx at [0, 0] =", g)

# %%
# grad_check perturbs every entry of every parameter and reports the
# relative error |analytic - numeric| / max(1, |analytic| + |numeric|).
rng = np.random.default_rng(0)
H = 4
point = {"wx": rng.normal(size=(3, 4 * H)), "wh": rng.normal(size=(H, 4 * H)), "b": np.zeros(4 * H)}
x_in, h0 = rng.normal(size=(2, 3)), rng.normal(size=(2, H))


def lstm_step_loss(t):
    z = Tensor(x_in) @ t["wx"] + Tensor(h0) @ t["wh"] + t["b"]
    i, f, o = nx.sigmoid(z[:, :H]), nx.sigmoid(z[:, H:2 * H]), nx.sigmoid(z[:, 2 * H:3 * H])
    c = i * nx.tanh(z[:, 3 * H:])
    return nx.tmean(o * nx.tanh(c))


report = nx.grad_check(lstm_step_loss, point)
for name, size, err in report.rows():
    print(f"{name:>3}  {size:3d} entries  max rel error {err:.2e}")
print("passed:", report.passed)

# %%
# The hook lets a test corrupt the analytic gradient; the check notices.
bad = nx.grad_check(lstm_step_loss, point, analytic_hook=lambda g: g["b"].__setitem__(0, g["b"][0] + 1))
print("corrupted gradient passes?", bad.passed, "->", bad.failures[:1])
