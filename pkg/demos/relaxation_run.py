"""Relaxation to the Maxwellian at alpha = 1 from a perturbed profile."""

import numpy as np

from landau_blowup.rescaler import RunConfig, run

diag = run(RunConfig(alpha=1.0, dt=0.5, tau_max=80.0, initial="perturbed", amplitude=1e-2, seed=3))
tau, E2 = diag.column("tau"), diag.column("E2")
for t in (0, 5, 10, 20, 40, 80):
    i = int(np.argmin(np.abs(tau - t)))
    print(f"tau = {tau[i]:5.1f}   E2 = {E2[i]:.3e}")
