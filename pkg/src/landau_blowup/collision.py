"""Radial Coulomb collision operator, its linearisation at the Maxwellian and the
full linear/nonlinear split of the rescaled equation.

For radial ``f`` with ``g = (-Delta)^{-2} f``::

    Q(f, f) = -f_rr g_rr - (2/r^2) f_r g_r + f^2.

``Q(h, f)`` takes coefficients from ``h`` and derivatives from ``f``.  All
derivatives use fourth-order stencils (``ACCURACY``); the discrete
linearisation is the exact derivative of the discrete ``Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .biharmonic import BiharmonicDerivatives, solve_biharmonic
from .errors import ConfigurationError
from .grid import RadialField, RadialGrid, derivative_matrix
from .potentials import maxwellian

__all__ = [
    "ACCURACY",
    "C1_MAXWELLIAN",
    "C2_MAXWELLIAN",
    "Background",
    "LinearizedPieces",
    "background",
    "background_rates",
    "collision_pair",
    "collision_q",
    "linearized_l1",
    "l_alpha",
    "nonlinear_terms",
]

ACCURACY = 4
C1_MAXWELLIAN = -7.0 / (8.0 * math.sqrt(2.0))
C2_MAXWELLIAN = 1.0 / (8.0 * math.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class Background:
    """Maxwellian data reused by every linear operator on one grid."""

    grid: RadialGrid
    mu: np.ndarray
    mu_r: np.ndarray
    mu_rr: np.ndarray
    gbar: BiharmonicDerivatives
    D1: object
    D2: object


_BG_CACHE: dict = {}


def background(grid: RadialGrid) -> Background:
    """Cached ``mu``, its discrete derivatives and ``gbar = (-Delta)^{-2} mu``."""
    hit = _BG_CACHE.get(id(grid))
    if hit is not None and hit.grid is grid:
        return hit
    mu = maxwellian(grid)
    D1 = derivative_matrix(grid, 1, ACCURACY, "even")
    D2 = derivative_matrix(grid, 2, ACCURACY, "even")
    for arr in (mu_r := D1 @ mu.values, mu_rr := D2 @ mu.values):
        arr.setflags(write=False)
    bg = Background(grid, mu.values, mu_r, mu_rr, solve_biharmonic(mu), D1, D2)
    _BG_CACHE[id(grid)] = bg
    return bg


def _transport(f_r, f_rr, g_r, g_rr, r):
    """``(2/r^2) f_r g_r`` with the origin value ``2 f_rr(0) g_rr(0)``."""
    out = np.empty_like(r)
    out[1:] = 2.0 * f_r[1:] * g_r[1:] / r[1:] ** 2
    out[0] = 2.0 * f_rr[0] * g_rr[0]
    return out


def collision_pair(h: RadialField, f: RadialField, dh: BiharmonicDerivatives | None = None):
    """``Q(h, f) = -f_rr g_rr[h] - (2/r^2) f_r g_r[h] + h f`` (Coulomb)."""
    if not h.grid.same_as(f.grid):
        raise ConfigurationError("fields live on different grids")
    bg = background(f.grid)
    if dh is None:
        dh = solve_biharmonic(h)
    r = f.grid.nodes
    f_r = bg.D1 @ f.values
    f_rr = bg.D2 @ f.values
    g_r, g_rr = dh.g_r.values, dh.g_rr.values
    vals = -f_rr * g_rr - _transport(f_r, f_rr, g_r, g_rr, r) + h.values * f.values
    return RadialField(vals, f.grid, "even")


def collision_q(f: RadialField) -> RadialField:
    """Coulomb collision operator ``Q(f, f)`` on a radial field."""
    return collision_pair(f, f)


@dataclass(frozen=True, eq=False)
class LinearizedPieces:
    """Pieces of the linearised operator applied to one field.

    ``L_loc f = Q(mu, f)`` is the second-order part with frozen Maxwellian
    coefficients; ``L_nloc f = Q(f, mu)`` carries the nonlocal dependence
    through ``g[f]``.  Each includes one copy of ``mu f``.
    """

    L_loc: RadialField
    L_nloc: RadialField
    L_add: RadialField
    L_alpha: RadialField
    cbar_l: float
    cbar_omega: float

    @property
    def L1(self):
        return self.L_loc + self.L_nloc


def _l_loc(f, bg):
    r = f.grid.nodes
    f_r = bg.D1 @ f.values
    f_rr = bg.D2 @ f.values
    g = bg.gbar
    return -f_rr * g.g_rr.values - _transport(f_r, f_rr, g.g_r.values, g.g_rr.values, r) + bg.mu * f.values


def _l_nloc(f, bg, df=None):
    r = f.grid.nodes
    if df is None:
        df = solve_biharmonic(f)
    g_r, g_rr = df.g_r.values, df.g_rr.values
    return -bg.mu_rr * g_rr - _transport(bg.mu_r, bg.mu_rr, g_r, g_rr, r) + bg.mu * f.values


def linearized_l1(f: RadialField) -> LinearizedPieces:
    """``L1 f = Q(mu, f) + Q(f, mu)`` split into local and nonlocal parts."""
    bg = background(f.grid)
    loc = RadialField(_l_loc(f, bg), f.grid, "even")
    nloc = RadialField(_l_nloc(f, bg), f.grid, "even")
    zero = RadialField(np.zeros(len(f.grid)), f.grid, "even")
    return LinearizedPieces(loc, nloc, zero, loc + nloc, 0.0, 0.0)


def background_rates(alpha: float) -> tuple[float, float]:
    """``(cbar_l, cbar_omega) = (C2, C1) * (alpha - 1)`` at the Maxwellian."""
    return C2_MAXWELLIAN * (alpha - 1.0), C1_MAXWELLIAN * (alpha - 1.0)


def _check_alpha(alpha):
    if not np.isfinite(alpha) or not (1.0 <= alpha <= 1.2):
        raise ConfigurationError(f"alpha must lie in [1, 1.2], got {alpha!r}")


def l_alpha(f: RadialField, alpha: float) -> LinearizedPieces:
    """Full linearised operator around the Maxwellian.

    ``L_alpha f = L1 f - cbar_l r f_r + cbar_omega f + 2 (alpha - 1) mu f``.
    At ``alpha = 1`` the extra terms vanish and ``L_alpha = L1``.
    """
    _check_alpha(alpha)
    bg = background(f.grid)
    cl, cw = background_rates(alpha)
    pieces = linearized_l1(f)
    r = f.grid.nodes
    add = -cl * r * (bg.D1 @ f.values) + cw * f.values + 2.0 * (alpha - 1.0) * bg.mu * f.values
    add_f = RadialField(add, f.grid, "even")
    return LinearizedPieces(
        pieces.L_loc, pieces.L_nloc, add_f, pieces.L_loc + pieces.L_nloc + add_f, cl, cw
    )


def nonlinear_terms(f: RadialField, alpha: float, c_l: float, c_omega: float):
    """Nonlinear remainder ``N(f)`` and the background error ``N(mu)``.

    ``N(f) = -c_l r f_r + Q(f, f) + (alpha - 1) f^2 + c_omega f`` and
    ``N(mu) = -(cbar_l + c_l) r mu_r + (alpha - 1) mu^2 + (cbar_omega + c_omega) mu``.
    The exact ``Q(mu, mu) = 0`` is used in ``N(mu)``.

    Returns
    -------
    (RadialField, RadialField)
    """
    _check_alpha(alpha)
    bg = background(f.grid)
    cl_bar, cw_bar = background_rates(alpha)
    r = f.grid.nodes
    nf = (
        -c_l * r * (bg.D1 @ f.values)
        + collision_q(f).values
        + (alpha - 1.0) * f.values**2
        + c_omega * f.values
    )
    nmu = -(cl_bar + c_l) * r * bg.mu_r + (alpha - 1.0) * bg.mu**2 + (cw_bar + c_omega) * bg.mu
    return RadialField(nf, f.grid, "even"), RadialField(nmu, f.grid, "even")
