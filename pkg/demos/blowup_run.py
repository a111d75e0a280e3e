"""Self-similar blowup at alpha = 1.05 starting from the Maxwellian.

Prints the rescaling rates, the extrapolated blowup time and the growth of
the physical mass and energy.
"""

import numpy as np

from landau_blowup.rescaler import RunConfig, run

diag = run(RunConfig(alpha=1.05, dt=1.0, tau_max=400.0, initial="maxwellian"))
tau = diag.column("tau")
for name in ("c_l", "c_omega", "ratio", "E2", "mass_phys", "energy_phys"):
    col = diag.column(name)
    print(f"{name:>12}: start {col[0]:.4g}  end {col[-1]:.4g}")
print(f"extrapolated blowup time T = {diag.T_extrapolated:.3f}")
print(f"physical time reached      = {diag.column('t_phys')[-1]:.3f}")
print(f"steps: {len(tau)}, error: {diag.error}")
