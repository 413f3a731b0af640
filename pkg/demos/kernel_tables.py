"""
Filtered kernels and their eps scaling
======================================

Builds the radial tables for the three built-in filters and prints the
quantities the dissipation estimates rest on.
"""

import math

from felab import kernels as K
from felab.filters import builtin_filter

# H_G(0) is eps-independent; the Gaussian value is ln 2 / (4 pi)
for name in ("gaussian", "algebraic_blob", "euler_alpha"):
    tab = K.kernel_table(builtin_filter(name), 0.1)
    print(f"{name:15s} H_G(0) = {float(K.HG_value(tab, 0.0)):.6f}   "
          f"decay constant = {K.decay_constant(tab):.5f}   net mass = {K.net_mass(tab):.1e}")
print(f"ln 2 / (4 pi)   = {math.log(2) / (4 * math.pi):.6f}")

# the weighted gradient norms scale exactly like eps^(6/7) and eps^(1/6)
print("\neps     ||w1 grad H_G||_7/3 / eps^(6/7)   ||w_1/2 grad H_G||_3 / eps^(1/6)")
spec = builtin_filter("gaussian")
for eps in (0.05, 0.1, 0.2, 0.4):
    tab = K.kernel_table(spec, eps)
    n1 = K.weighted_grad_norm(tab, 1.0, 7 / 3) / eps ** (6 / 7)
    n2 = K.weighted_grad_norm(tab, 0.5, 3.0) / eps ** (1 / 6)
    print(f"{eps:<7g} {n1:.6f}                          {n2:.6f}")
