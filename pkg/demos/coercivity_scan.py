"""Top Rayleigh quotients of the constrained linearized operator.

At alpha = 1 the three denominators are compared; for alpha > 1 the
energy denominator is used.
"""

from landau_blowup.grid import build_grid
from landau_blowup.spectral import constrained_gap, local_gap_surrogate
from landau_blowup.weights import build_family

family = build_family(build_grid(30.0, 1024))
for den in ("D2", "DW", "E2"):
    res = constrained_gap(family, 1.0, 80, den)
    print(f"alpha = 1.00  {den}: top = {res.top_rayleigh:+.6f}")
for alpha in (1.01, 1.02, 1.04):
    res = constrained_gap(family, alpha, 80, "E2")
    print(f"alpha = {alpha:.2f}  E2: top = {res.top_rayleigh:+.6f}")
for n in (2, 3, 4):
    print(f"surrogate delta_{n} = {local_gap_surrogate(n, family).delta:.4f}")
