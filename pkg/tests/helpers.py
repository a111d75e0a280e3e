"""Shared test helpers."""

import numpy as np

ACCEPTANCE_LINES: list[str] = []


def smooth_field(grid, rng, nonnegative=False, decay=1.0):
    """Even sum of Gaussian bumps times a Gaussian envelope ``exp(-decay r^2)``."""
    r = grid.nodes
    n = 4
    c = rng.uniform(0.1, 1.0, n) if nonnegative else rng.normal(size=n)
    width = rng.uniform(0.3, 1.5, n)
    centre = rng.uniform(0.0, 3.0, n)
    y = sum(ci * (np.exp(-((r - m) ** 2) / s) + np.exp(-((r + m) ** 2) / s)) for ci, s, m in zip(c, width, centre))
    return grid.field(y * np.exp(-decay * r * r))
