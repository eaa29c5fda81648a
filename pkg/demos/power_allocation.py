"""Power control in the upper bound.

The upper bound lets each terminal adapt its power to the current gain.
On a 512-cell quantile grid of |h|^2 the optimal policy is found by
Lagrangian duality; here we look at its shape and its value over the
constant policy.
"""

# %%
import numpy as np

from skrate import SystemParams, optimize_power_allocation

for P in (0.1, 1.0, 10.0, 1000.0):
    a = optimize_power_allocation(SystemParams(10, P))
    off = np.mean(a.power == 0)
    print(
        f"P = {P:<7} value {a.value:.4f}  constant {a.constant_value:.4f}  "
        f"silent states {off:5.1%}  dual gap {a.dual_gap:.1e}"
    )

# %% low SNR: the policy switches off weak states and pours power on strong ones
a = optimize_power_allocation(SystemParams(10, 0.1))
for q in (0.1, 0.5, 0.9, 0.99):
    i = int(q * len(a.nodes))
    print(f"quantile {q:4}: |h|^2 = {a.nodes[i]:.3f}  p = {a.power[i]:.3f}")
