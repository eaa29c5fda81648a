"""How far apart are the bounds at high SNR?

At high SNR the upper bound and the discussion lower bound differ by
gamma / T, where gamma sums E[log2(1 + |h|^2/|g|^2)] over the two links.
For unit Rayleigh fading |h|^2/|g|^2 has density 1/(1+r)^2 and each term
equals 1/ln 2, so gamma = 2/ln 2.  We check that three ways.
"""

# %%
import math

from skrate import ChannelParams, EvalConfig, gamma_constant

exact = 2 / math.log(2)
quad = gamma_constant(ChannelParams(), EvalConfig())
mc = gamma_constant(ChannelParams(), EvalConfig(method="mc", n_samples=2_000_000, seed=1))

print(f"closed form   {exact:.6f}")
print(f"quadrature    {quad.value:.6f}")
print(f"Monte Carlo   {mc.value:.6f} +/- {mc.std_error:.1e}")

# %% a stronger legitimate link widens the gap: c log2(c)/(c-1) per term
for ratio in (0.5, 1.0, 2.0, 4.0):
    g = gamma_constant(ChannelParams(0.0, var_h=ratio, var_g=1.0), EvalConfig()).value
    print(f"var_h/var_g = {ratio:<4}  gamma = {g:.4f}")

# %% the gap as the coherence period grows
for T in (2, 10, 100):
    print(f"T = {T:<4} gamma/T = {quad.value / T:.4f} bits")
