"""Radial derivatives of ``g = (-Delta)^{-2} f`` and of ``Delta^{-1} f`` from cumulative moments.

With ``A_k(r) = int_0^r f s^k ds`` and ``B_1(r) = int_r^inf f s ds``::

    g_r    = -A_2/2 + A_4/(6 r^2) - r B_1/3
    g_rr   = -A_4/(3 r^3) - B_1/3
    g_rrr  =  A_4/r^4
    g_rrrr =  f - 4 A_4/r^5
    g1     = -A_2/r - B_1          (g1 = Delta^{-1} f)

The quotients of ``A_4`` are removable singularities at ``r = 0``; on the
first few nodes they are replaced by the Taylor series
``A_4 = f(0) r^5/5 + f''(0) r^7/14 + O(r^9)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .grid import RadialField, derivative_matrix, differentiate, moments

__all__ = [
    "BiharmonicDerivatives",
    "SignReport",
    "solve_biharmonic",
    "verify_biharmonic_residual",
    "algebraic_residual",
    "cross_derivative_error",
    "sign_properties",
]

TAYLOR_NODES = 3


@dataclass(frozen=True, eq=False)
class BiharmonicDerivatives:
    """Derivative fields of ``g = (-Delta)^{-2} f`` plus ``g1 = Delta^{-1} f``."""

    g_r: RadialField
    g_rr: RadialField
    g_rrr: RadialField
    g_rrrr: RadialField
    g1: RadialField
    source: RadialField
    A2: RadialField
    A4: RadialField
    B1: RadialField

    @property
    def grid(self):
        return self.source.grid


def _a4_quotients(f, A4):
    """``A_4/r^p`` for p = 2..5 with the Taylor fill near the origin."""
    r = f.grid.nodes
    y = f.values
    f0 = y[0]
    f2 = (derivative_matrix(f.grid, 2, 2, "even") @ y)[0]
    out = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        for p in (2, 3, 4, 5):
            q = A4 / r**p
            near = r[: TAYLOR_NODES + 1]
            q[: TAYLOR_NODES + 1] = f0 * near ** (5 - p) / 5 + f2 * near ** (7 - p) / 14
            out[p] = q
    return out


def solve_biharmonic(f: RadialField) -> BiharmonicDerivatives:
    """Compute ``g_r, g_rr, g_rrr, g_rrrr`` and ``g1`` for a radial field.

    The tail of ``B_1`` beyond ``R_max`` is truncated.

    Parameters
    ----------
    f : RadialField
        Source field, assumed even in ``r``.

    Returns
    -------
    BiharmonicDerivatives
    """
    grid = f.grid
    r = grid.nodes
    m = moments(f)
    A2, A4, B1 = m.A2.values, m.A4.values, m.B1.values
    q = _a4_quotients(f, A4)
    g_r = -0.5 * A2 + q[2] / 6.0 - r * B1 / 3.0
    g_rr = -q[3] / 3.0 - B1 / 3.0
    g_rrr = q[4].copy()
    g_rrrr = f.values - 4.0 * q[5]
    with np.errstate(divide="ignore", invalid="ignore"):
        a2_over_r = A2 / r
    a2_over_r[0] = 0.0
    g1 = -a2_over_r - B1
    g_r[0] = 0.0
    g_rrr[0] = 0.0
    return BiharmonicDerivatives(
        g_r=RadialField(g_r, grid, "odd"),
        g_rr=RadialField(g_rr, grid, "even"),
        g_rrr=RadialField(g_rrr, grid, "odd"),
        g_rrrr=RadialField(g_rrrr, grid, "even"),
        g1=RadialField(g1, grid, "even"),
        source=f,
        A2=m.A2,
        A4=m.A4,
        B1=m.B1,
    )


def algebraic_residual(d: BiharmonicDerivatives, f: RadialField) -> float:
    """``max |g_rrrr + 4 g_rrr / r - f| / (1 + |f|)`` over nodes with ``r > 0``."""
    if not d.grid.same_as(f.grid):
        raise ConfigurationError("derivatives and field live on different grids")
    r = f.grid.nodes
    inner = slice(1, None)
    ident = d.g_rrrr.values[inner] + 4.0 * d.g_rrr.values[inner] / r[inner] - f.values[inner]
    return float(np.max(np.abs(ident) / (1.0 + np.abs(f.values[inner]))))


def verify_biharmonic_residual(d: BiharmonicDerivatives, f: RadialField) -> float:
    """Largest of two consistency residuals.

    The first is :func:`algebraic_residual`; the second is
    ``max |d/dr g_r - g_rr|`` with ``d/dr`` by second-order finite
    differences, which shrinks like ``h^2``.
    """
    algebraic = algebraic_residual(d, f)
    return max(algebraic, cross_derivative_error(d))


def cross_derivative_error(d: BiharmonicDerivatives) -> float:
    """``max |d/dr g_r - g_rr|`` over all nodes."""
    return float(np.max(np.abs(differentiate(d.g_r).values - d.g_rr.values)))


class SignReport(NamedTuple):
    g_r_nonpositive: bool
    g_rr_nonpositive: bool
    g_rrr_nonnegative: bool

    @property
    def all(self):
        return self.g_r_nonpositive and self.g_rr_nonpositive and self.g_rrr_nonnegative


def sign_properties(f: RadialField, rtol: float = 1e-12) -> SignReport:
    """Check ``g_r <= 0``, ``g_rr <= 0`` and ``g_rrr >= 0`` for a nonnegative source.

    Each inequality is tested with tolerance ``rtol`` times the field's own
    maximum magnitude.
    """
    neg = np.flatnonzero(f.values < 0)
    if neg.size:
        i = int(neg[0])
        raise PreconditionError(
            f"source must be nonnegative; node {i} (r={f.grid.nodes[i]:g}) has value {f.values[i]:g}"
        )
    d = solve_biharmonic(f)

    def ok(field, sign):
        v = field.values
        scale = np.max(np.abs(v)) if v.size else 0.0
        return bool(np.all(sign * v <= rtol * scale))

    return SignReport(ok(d.g_r, 1), ok(d.g_rr, 1), ok(d.g_rrr, -1))
