"""Weight family diagnostics for a few inner radii."""

from landau_blowup.grid import build_grid
from landau_blowup.weights import build_family, weight_certificate

grid = build_grid(30.0, 1024)
for R1 in (4, 6):
    for K1 in (1.0, 1e-30):
        cert = weight_certificate(build_family(grid, R1=R1, K1=K1))
        print(f"R1 = {R1}, K1 = {K1:g}")
        for check in cert.checks:
            print(f"   {'ok  ' if check.passed else 'FAIL'} {check.name}: {check.detail}")
