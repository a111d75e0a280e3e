"""Zeroth-order coefficient ``c(f)``, normalisation functionals and the sigma table.

For Coulomb interactions (``gamma = -3``) the coefficient is ``c(f) = f``.
For very soft potentials ``gamma in (-3, -2)`` it is the convolution
``|v|^gamma * f`` (the positive prefactor is fixed to 1), reduced to one
dimension by averaging over spheres::

    c(f)(r) = 2 pi / (r beta) * int_0^inf s f(s) [(r+s)^beta - |r-s|^beta] ds,
    beta = gamma + 2.

Since ``s f(s)`` is odd, this equals ``-2 pi / (r beta)`` times
``I(r) = int_{-R}^{R} h(s) |s - r|^beta ds`` with the odd extension ``h``.
The weakly singular ``I`` is evaluated by subtracting the second-order
Taylor polynomial of ``h`` at ``r`` (integrated in closed form) and applying
the composite rule to the smooth remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateFieldError
from .grid import RadialField, derivative_matrix, full_weights, integrate

__all__ = [
    "PotentialSpec",
    "NormalizationConstants",
    "SigmaRow",
    "c_of_f",
    "convolution_matrix",
    "maxwellian",
    "maxwellian_monotonicity",
    "normalization_constants",
    "sigma_table",
]

COULOMB = -3.0


def maxwellian(grid):
    """``mu(r) = exp(-r^2)`` on ``grid``."""
    return grid.evaluate(lambda r: np.exp(-r * r))


@dataclass(frozen=True)
class PotentialSpec:
    """Interaction exponent ``gamma`` in ``[-3, -2)``; ``c_gamma`` is fixed to 1."""

    gamma: float = COULOMB

    def __post_init__(self):
        g = float(self.gamma)
        if not (-3.0 <= g < -2.0):
            raise ConfigurationError(f"gamma must lie in [-3, -2), got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @property
    def is_coulomb(self):
        return self.gamma == COULOMB

    @property
    def beta(self):
        return self.gamma + 2.0


def _spec(gamma_or_spec):
    if isinstance(gamma_or_spec, PotentialSpec):
        return gamma_or_spec
    return PotentialSpec(gamma_or_spec)


_CONV_CACHE: dict = {}
_CHUNK = 256


def convolution_matrix(grid, gamma):
    """Dense matrix ``K`` with ``c(f) = K @ f`` for ``gamma in (-3, -2)``.

    Built once per grid and exponent; O(N^2) memory and work.
    """
    spec = _spec(gamma)
    if spec.is_coulomb:
        raise ConfigurationError("the Coulomb case is the identity; no matrix is needed")
    key = (id(grid), spec.gamma)
    hit = _CONV_CACHE.get(key)
    if hit is not None and hit[0] is grid:
        return hit[1]
    beta = spec.beta
    r = grid.nodes
    n = len(r)
    R = grid.r_max
    # Mirrored grid s_j in [-R, R] carrying the odd extension h(s) = s f(s).
    s = np.concatenate([-r[:0:-1], r])
    w = full_weights(s)
    D1 = derivative_matrix(grid, 1, 4, "odd")
    D2 = derivative_matrix(grid, 2, 4, "odd")
    # h = r f is odd in r; h' and h'' at nodes as linear maps of f.
    H0 = np.diag(r)
    H1 = D1.toarray() * r[None, :]
    H2 = D2.toarray() * r[None, :]

    def mom(m, ri):
        # int_{-R}^{R} (s - r)^m |s - r|^beta ds
        a, b = -R - ri, R - ri
        p = m + beta + 1.0
        return (np.sign(b) ** (m + 1) * np.abs(b) ** p - np.sign(a) ** (m + 1) * np.abs(a) ** p) / p

    K = np.zeros((n, n))
    for lo in range(1, n, _CHUNK):
        hi = min(n, lo + _CHUNK)
        ri = r[lo:hi]
        u = s[None, :] - ri[:, None]
        absu = np.abs(u)
        with np.errstate(divide="ignore"):
            ker = np.where(absu > 0, absu**beta, 0.0)
        # remainder: sum_j w_j ker_j (h(s_j) - T_i(s_j)), h(s_j) = s_j f[fold_j]
        contrib = (w[None, :] * ker) * s[None, :]
        block = contrib[:, n - 1 :].copy()
        block[:, 1:] += contrib[:, : n - 1][:, ::-1]
        q0 = (w[None, :] * ker).sum(axis=1)
        q1 = (w[None, :] * ker * u).sum(axis=1)
        q2 = 0.5 * (w[None, :] * ker * u * u).sum(axis=1)
        e0 = mom(0, ri) - q0
        e1 = mom(1, ri) - q1
        e2 = 0.5 * mom(2, ri) - q2
        rows = np.arange(lo, hi)
        block += e0[:, None] * H0[rows] + e1[:, None] * H1[rows] + e2[:, None] * H2[rows]
        K[lo:hi] = -2.0 * math.pi / (ri[:, None] * beta) * block
    # r = 0: 4 pi int f s^beta ds, with |s|^beta integrable at the origin
    K[0] = 4.0 * math.pi * _origin_row(grid, beta)
    _CONV_CACHE[key] = (grid, K)
    return K


def _origin_row(grid, beta):
    """Weights ``v`` with ``v @ f ~= int_0^R f s^beta ds``.

    ``f`` is split as ``f(0) + (f - f(0))``: the constant part is integrated
    exactly and the remainder vanishes like ``s^2`` at the origin.
    """
    r = grid.nodes
    w = grid.weights
    with np.errstate(divide="ignore"):
        pw = np.where(r > 0, r**beta, 0.0)
    row = w * pw
    row[0] += grid.r_max ** (beta + 1) / (beta + 1) - row.sum()
    return row


def c_of_f(f: RadialField, spec=COULOMB) -> RadialField:
    """Zeroth-order coefficient ``c(f)``.

    Parameters
    ----------
    f : RadialField
        Radial density.
    spec : PotentialSpec or float
        Interaction exponent; ``-3`` returns ``f`` itself.
    """
    spec = _spec(spec)
    if spec.is_coulomb:
        return f
    K = convolution_matrix(f.grid, spec)
    return RadialField(K @ f.values, f.grid, "even")


def maxwellian_monotonicity(grid, gamma) -> RadialField:
    """``r d/dr c(mu)``, nonpositive for every very soft potential.

    The Coulomb branch raises ``ConfigurationError`` because there the field
    is simply ``r mu_r``.
    """
    spec = _spec(gamma)
    if spec.is_coulomb:
        raise ConfigurationError("gamma = -3 reduces to r*mu_r; use the soft range (-3, -2)")
    c = c_of_f(maxwellian(grid), spec)
    dc = derivative_matrix(grid, 1, 4, "even") @ c.values
    return RadialField(grid.nodes * dc, grid, "even")


@dataclass(frozen=True)
class NormalizationConstants:
    """``C1``, ``C2`` of the moment-preserving scaling rates and derived ratios.

    ``Q0/P0`` and ``Q2/P2`` are the ratios ``int c(f) f r^k / int f r^k`` for
    ``k = 2, 4`` (the mass and energy pairings).
    """

    C1: float
    C2: float
    Q0_over_P0: float
    Q2_over_P2: float
    P2_over_P0: float

    @property
    def sigma(self):
        return abs(self.C1 / self.C2)

    @property
    def k_gamma(self):
        return 2.0 + self.sigma

    @property
    def margin(self):
        """``C1 + 5 C2``, negative whenever ``sigma > 5`` with the expected signs."""
        return self.C1 + 5.0 * self.C2


def normalization_constants(f: RadialField, gamma=COULOMB, c=None) -> NormalizationConstants:
    """Evaluate ``C1 = (-5 Q0/P0 + 3 Q2/P2)/2`` and ``C2 = (Q0/P0 - Q2/P2)/2``.

    ``c`` may supply a precomputed ``c(f)``.
    """
    if c is None:
        c = c_of_f(f, gamma)
    P0 = integrate(f, 2, warn=False)
    P2 = integrate(f, 4, warn=False)
    scale = max(1e-300, float(np.max(np.abs(f.values))) * f.grid.r_max**5)
    if abs(P0) < 1e-14 * scale or abs(P2) < 1e-14 * scale:
        raise DegenerateFieldError(f"vanishing moment: int f r^2 = {P0:g}, int f r^4 = {P2:g}")
    cf = RadialField(c.values * f.values, f.grid, "none")
    Q0 = integrate(cf, 2, warn=False)
    Q2 = integrate(cf, 4, warn=False)
    a, b = Q0 / P0, Q2 / P2
    return NormalizationConstants(
        C1=0.5 * (-5.0 * a + 3.0 * b),
        C2=0.5 * (a - b),
        Q0_over_P0=a,
        Q2_over_P2=b,
        P2_over_P0=P2 / P0,
    )


@dataclass(frozen=True)
class SigmaRow:
    gamma: float
    sigma: float
    k_gamma: float
    feasible: bool


def sigma_table(gammas, grid) -> list[SigmaRow]:
    """``sigma_gamma = |C1/C2|`` at the Maxwellian, ``k_gamma = 2 + sigma`` and
    the feasibility flag ``7 < k_gamma < 2 sigma - 3``."""
    mu = maxwellian(grid)
    rows = []
    for g in gammas:
        nc = normalization_constants(mu, g)
        s = nc.sigma
        k = nc.k_gamma
        rows.append(SigmaRow(float(g), s, k, bool(7.0 < k < 2.0 * s - 3.0)))
    return rows
