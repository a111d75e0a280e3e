"""Weighted quadratic forms of the linearised operator and constrained Rayleigh-Ritz estimates.

Two evaluation paths are provided.

* Field path (``form_*``, ``coercivity_form``, ``energy_functionals``): a
  single ``RadialField`` is paired with the weights using finite-difference
  derivatives on the grid.
* Basis path (``constrained_gap``, ``local_gap_surrogate``): a B-spline basis
  in ``s = r^2`` with analytic derivatives, divided by the square root of the
  denominator weight, spans the trial space.  The Gaussian part of the
  weight enters through the symmetric form ``J_rho`` rather than through
  ``L_loc f * f * rho``, which keeps the assembly free of
  ``exp(r^2)``-sized cancellations.

Weights that grow like ``exp(r^2)`` are always applied as ``sqrt(rho)``
factors on both sides of a product so that nothing overflows even for the
global Gaussian weight on the default grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import null_space

from .biharmonic import solve_biharmonic
from .collision import background, background_rates, l_alpha, linearized_l1
from .errors import ConfigurationError, NumericalError, PreconditionError
from .grid import GRADING_OFFSET, RadialField, RadialGrid, derivative_matrix
from .weights import WeightFamily

__all__ = [
    "FormReport",
    "GapEstimate",
    "LocalGap",
    "Energy2Bound",
    "SplineBasis",
    "spline_basis",
    "weighted_basis",
    "project_constraints",
    "constraint_residuals",
    "form_jrho",
    "form_jrho_tilde",
    "form_jrho2",
    "fit_energy2_bound",
    "energy_functionals",
    "coercivity_form",
    "constrained_gap",
    "local_gap_surrogate",
    "DENOMINATORS",
]

SPLINE_DEGREE = 5
CONSTRAINT_RTOL = 1e-10
EIG_CUTOFF = 1e-14
# Under-resolved knot spans produce spurious modes in the localized surrogate.
NODES_PER_MODE = 6
DENOMINATORS = ("DW", "D2", "E2")
FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class FormReport:
    """Value of a quadratic form, named contributions and constraint residuals.

    ``residuals`` holds ``(int f r^2 dr, int f r^4 dr)`` of the test field.
    """

    value: float
    parts: dict = field(default_factory=dict)
    residuals: tuple = (0.0, 0.0)

    @property
    def ratio(self):
        return self.parts.get("ratio", float("nan"))

    def as_dict(self):
        return {"value": self.value, "parts": dict(self.parts), "residuals": list(self.residuals)}


@dataclass(frozen=True, eq=False)
class GapEstimate:
    """Top constrained generalized Rayleigh quotient of ``<L_alpha f, f W>``.

    Attributes
    ----------
    alpha : float
    top_rayleigh : float
        Largest quotient over the constrained trial space.
    reference : str
        Denominator: ``"DW"`` (``4 pi int <r>^-3 (f^2 + f_r^2) W r^2``),
        ``"D2"`` or ``"E2"``.
    spectrum : numpy.ndarray
        All quotients, in decreasing order.
    mode : RadialField
        Trial field attaining ``top_rayleigh``.
    rank : int
        Dimension of the trial space after removing constraints and
        numerically null directions of the denominator.
    """

    alpha: float
    top_rayleigh: float
    reference: str
    n_modes: int
    N: int
    r_max: float
    R1: int
    K1: float
    spectrum: np.ndarray
    mode: RadialField
    rank: int

    @property
    def margin(self):
        """Distance of the top quotient below zero (negative when it is positive)."""
        return -self.top_rayleigh

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "top_rayleigh": self.top_rayleigh,
            "reference": self.reference,
            "n_modes": self.n_modes,
            "N": self.N,
            "r_max": self.r_max,
            "R1": self.R1,
            "K1": self.K1,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class LocalGap:
    """Smallest quotient of the truncated-Maxwellian surrogate form on ``[0, n]``."""

    n: int
    delta: float
    n_modes: int
    label: str = "surrogate"

    def __float__(self):
        return float(self.delta)


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Values and radial derivatives of ``b_i(r) = B_i(r^2)`` on the grid nodes.

    Each array has shape ``(n_modes, N + 1)``.  Every function is even in
    ``r``, smooth, and vanishes together with its first derivative at the
    outer edge of its support.
    """

    grid: RadialGrid
    support: float
    F: np.ndarray
    Fr: np.ndarray
    Frr: np.ndarray

    @property
    def size(self):
        return self.F.shape[0]


def _knots(support, n_modes, deg):
    m = n_modes - deg + 3
    xi = np.linspace(0.0, 1.0, m)
    b = GRADING_OFFSET
    sk = (support * xi * (xi + b) / (1.0 + b)) ** 2
    return np.concatenate([np.zeros(deg), sk, np.full(deg, sk[-1])])


def spline_basis(grid: RadialGrid, n_modes: int, support: float | None = None) -> SplineBasis:
    """Quintic B-splines in ``r^2`` on ``[0, support]`` (default: whole grid).

    Knots follow the same offset-quadratic map as the graded grid so the
    number of grid nodes per knot span is roughly uniform.
    """
    return _spline_basis(grid, int(n_modes), float(grid.r_max if support is None else support))


@lru_cache(maxsize=16)
def _spline_basis(grid, n_modes, support):
    deg = SPLINE_DEGREE
    if n_modes < deg + 1:
        raise ConfigurationError(f"need at least {deg + 1} modes, got {n_modes}")
    t = _knots(support, n_modes, deg)
    nb = len(t) - deg - 1
    spl = BSpline(t, np.eye(nb), deg, extrapolate=False)
    r = grid.nodes
    s = r * r
    inside = r <= support * (1 + 1e-14)
    v = np.zeros((len(r), nb))
    d1 = np.zeros_like(v)
    d2 = np.zeros_like(v)
    v[inside] = spl(s[inside])
    d1[inside] = spl.derivative(1)(s[inside])
    d2[inside] = spl.derivative(2)(s[inside])
    v, d1, d2 = (np.nan_to_num(a).T[: nb - 2] for a in (v, d1, d2))
    F = v
    Fr = 2.0 * r * d1
    Frr = 2.0 * d1 + 4.0 * s * d2
    for a in (F, Fr, Frr):
        a.setflags(write=False)
    return SplineBasis(grid, support, F, Fr, Frr)


def _log_dissipation_weight(family: WeightFamily):
    """``log W_D`` and ``W_D'/W_D``, ``W_D''/W_D`` for ``W_D = K1 rho + rho2 / (4 pi r^2)``."""
    r = family.grid.nodes
    lr = _log_rho(family)
    m = 0.5 * (family.k2 - 2.0)
    br = 1.0 + r * r
    # rho2 may carry a constant factor (rescaled W); read it off the last node
    scale = family.rho2.values[-1] / (r[-1] ** 2 * br[-1] ** m)
    lp = math.log(scale) + m * np.log(br) - math.log(FOUR_PI)
    lg = math.log(family.K1) + lr
    logW = np.logaddexp(lg, lp)
    a = np.exp(lg - logW)
    b = np.exp(lp - logW)
    # rho'/rho = lambda = r q / rho and rho''/rho = (q / rho)(1 + 2 r^2 eta) since q' = 2 r q eta
    q_rho = np.exp(family.log_q.values - lr)
    lam = r * q_rho
    p1 = 2.0 * m * r / br
    p2 = 2.0 * m * (1.0 - r * r) / br**2 + p1 * p1
    w1 = a * lam + b * p1
    w2 = a * q_rho * (1.0 + 2.0 * r * r * family.eta.values) + b * p2
    return logW, w1, w2


def weighted_basis(family: WeightFamily, n_modes: int, support: float | None = None) -> SplineBasis:
    """Spline basis divided by ``sqrt(W_D)``, the square root of the dissipation weight.

    Trial fields ``f = p / sqrt(W_D)`` keep ``f^2 W_D = p^2`` of order one, so
    the weighted Gram matrices stay well conditioned even though ``W_D`` grows
    like ``exp(r^2)`` across a single knot span.
    """
    base = spline_basis(family.grid, n_modes, support)
    logW, w1, w2 = _log_dissipation_weight(family)
    u = np.exp(-0.5 * logW)
    P, Pr, Prr = base.F, base.Fr, base.Frr
    F = u * P
    Fr = u * (Pr - 0.5 * w1 * P)
    Frr = u * (Prr - w1 * Pr + (0.75 * w1 * w1 - 0.5 * w2) * P)
    return SplineBasis(base.grid, base.support, F, Fr, Frr)


# ---------------------------------------------------------------------------
# constraints


def constraint_residuals(f: RadialField) -> tuple[float, float]:
    """``(int f r^2 dr, int f r^4 dr)`` by grid quadrature."""
    w = f.grid.weights
    r = f.grid.nodes
    return float(np.dot(w * r * r, f.values)), float(np.dot(w * r**4, f.values))


def project_constraints(f: RadialField) -> RadialField:
    """Remove ``a mu + c r^2 mu`` from ``f`` so both constraint moments vanish."""
    g = f.grid
    r = g.nodes
    w = g.weights
    mu = np.exp(-r * r)
    P = np.array([[np.dot(w * r**k, mu * r**j) for j in (0, 2)] for k in (2, 4)])
    a, c = np.linalg.solve(P, np.array(constraint_residuals(f)))
    return RadialField(f.values - a * mu - c * r * r * mu, g, "even")


def _check_constraints(f):
    res = constraint_residuals(f)
    r = f.grid.nodes
    w = f.grid.weights
    a = np.abs(f.values)
    scale = (float(np.dot(w * r * r, a)), float(np.dot(w * r**4, a)))
    for k, (x, sc) in zip((2, 4), zip(res, scale)):
        if abs(x) > CONSTRAINT_RTOL * max(sc, 1e-300):
            raise PreconditionError(
                f"test field violates the r^{k} moment constraint: residuals {res[0]:.3e}, {res[1]:.3e}"
            )
    return res


def _same_grid(f, family):
    if not f.grid.same_as(family.grid):
        raise ConfigurationError("field and weight family live on different grids")


# ---------------------------------------------------------------------------
# weight helpers


def _log_rho(family: WeightFamily):
    if "rho" in family.overrides:
        with np.errstate(divide="ignore"):
            return np.log(family.overrides["rho"])
    return family.log_rho.values


def _half_rho(family):
    """``sqrt(rho)`` and ``rho_r / sqrt(rho) = r q / sqrt(rho)``."""
    lr = _log_rho(family)
    r = family.grid.nodes
    return np.exp(0.5 * lr), r * np.exp(family.log_q.values - 0.5 * lr)


def _minus_gbar_rr(grid):
    return -background(grid).gbar.g_rr.values


def _derivs(f):
    d1 = derivative_matrix(f.grid, 1, 4, "even")
    return d1 @ f.values


# ---------------------------------------------------------------------------
# field-path forms


def form_jrho(f: RadialField, family: WeightFamily) -> FormReport:
    """``J_rho = int (-gbar_rr r^2)(f_r + 2 r f)(f_r rho + f rho_r) dr``.

    ``parts['tail']`` is ``int_{r >= R1} f^2 r^2 dr``, the loss scale that
    bounds ``J_tilde - J_rho``.
    """
    _same_grid(f, family)
    g = f.grid
    r = g.nodes
    w = g.weights
    fr = _derivs(f)
    y = f.values
    sq, rr_sq = _half_rho(family)
    a = _minus_gbar_rr(g) * r * r
    left = (fr + 2.0 * r * y) * sq
    right = fr * sq + y * rr_sq
    val = float(np.dot(w, a * left * right))
    tail = float(np.dot(w, np.where(r >= family.R1, y * y * r * r, 0.0)))
    return FormReport(val, {"tail": tail}, constraint_residuals(f))


def form_jrho_tilde(f: RadialField, family: WeightFamily) -> FormReport:
    """``J_tilde = int (-gbar_rr r^2)(f_r + lambda f)^2 rho dr`` (nonnegative)."""
    _same_grid(f, family)
    g = f.grid
    r = g.nodes
    fr = _derivs(f)
    sq, _ = _half_rho(family)
    a = _minus_gbar_rr(g) * r * r
    term = (fr + family.lam.values * f.values) * sq
    return FormReport(float(np.dot(g.weights, a * term * term)), {}, constraint_residuals(f))


def form_jrho2(f: RadialField, k2: float = 12.5) -> FormReport:
    """``J(rho2) = int (L1 f) f rho2 dr`` with ``rho2 = r^2 <r>^(k2-2)``.

    The parts hold the three integrals entering the upper bound
    ``-c1 (k2-2) damping + C loss - c4 gradient``::

        damping  = int <r>^-3 f^2 rho2
        loss     = int <r>^-5 f^2 rho2
        gradient = int <r>^-3 f_r^2 rho2
    """
    g = f.grid
    r = g.nodes
    w = g.weights
    rho2 = r * r * (1.0 + r * r) ** ((k2 - 2.0) / 2.0)
    L = linearized_l1(f).L1.values
    y = f.values
    fr = _derivs(f)
    br = 1.0 + r * r
    parts = {
        "damping": float(np.dot(w, br**-1.5 * y * y * rho2)),
        "loss": float(np.dot(w, br**-2.5 * y * y * rho2)),
        "gradient": float(np.dot(w, br**-1.5 * fr * fr * rho2)),
    }
    return FormReport(float(np.dot(w, L * y * rho2)), parts, constraint_residuals(f))


@dataclass(frozen=True)
class Energy2Bound:
    """Frozen constants of ``J(rho2) <= -c1 (k2-2) damping + C loss - c4 gradient``.

    ``R0_star`` is the radius beyond which the damping term dominates the
    loss term, ``<R0>^2 = C / (c1 (k2 - 2))``.
    """

    c1: float
    c4: float
    C: float
    k2: float

    @property
    def R0_star(self):
        x = self.C / (self.c1 * (self.k2 - 2.0)) - 1.0
        return math.sqrt(max(x, 0.0))

    def rhs(self, report: FormReport) -> float:
        p = report.parts
        return -self.c1 * (self.k2 - 2.0) * p["damping"] + self.C * p["loss"] - self.c4 * p["gradient"]

    def holds(self, report: FormReport, rtol: float = 1e-9) -> bool:
        slack = self.rhs(report) - report.value
        scale = abs(report.value) + abs(self.rhs(report))
        return bool(slack >= -rtol * scale)


def fit_energy2_bound(reports, k2: float = 12.5, fraction: float = 0.5) -> Energy2Bound:
    """Fit ``C`` for fixed ``c1 = c4 = fraction * sqrt(pi)/8``.

    ``sqrt(pi)/8 = lim r^3 (-gbar_rr)`` is the far-field diffusion strength,
    which sets both the damping and the gradient rate.  ``C`` is the
    smallest value for which every report satisfies the bound.
    """
    c = fraction * math.sqrt(math.pi) / 8.0
    C = 0.0
    for rep in reports:
        p = rep.parts
        need = rep.value + c * (k2 - 2.0) * p["damping"] + c * p["gradient"]
        if p["loss"] > 0:
            C = max(C, need / p["loss"])
    return Energy2Bound(c, c, C, k2)


def energy_functionals(f: RadialField, family: WeightFamily, df: RadialField | None = None) -> tuple[float, float]:
    """``E2 = K1 4 pi int f^2 rho r^2 + int f^2 rho2`` and
    ``D2 = int (f^2 + f_r^2) r^2 <r>^(k2-5) dr``.

    ``df`` may supply ``f_r`` exactly; otherwise it is differentiated with
    fourth-order stencils.
    """
    _same_grid(f, family)
    g = f.grid
    r = g.nodes
    w = g.weights
    y = f.values
    sq, _ = _half_rho(family)
    fr = _derivs(f) if df is None else df.values
    E2 = family.K1 * FOUR_PI * float(np.dot(w, (y * sq) ** 2 * r * r)) + float(np.dot(w, y * y * family.rho2.values))
    D2 = float(np.dot(w, (y * y + fr * fr) * r * r * (1.0 + r * r) ** ((family.k2 - 5.0) / 2.0)))
    return E2, D2


def coercivity_form(f: RadialField, family: WeightFamily, alpha: float = 1.0) -> FormReport:
    """``<L_alpha f, f W> = 4 pi int (L_alpha f) f W r^2 dr`` against the dissipation.

    The reference quantity is ``4 pi int <r>^-3 (f^2 + f_r^2) W r^2 dr`` and
    ``parts['ratio']`` is the quotient.

    Raises
    ------
    PreconditionError
        If ``int f r^2`` or ``int f r^4`` is not zero to ``1e-10`` relative.
    """
    _same_grid(f, family)
    res = _check_constraints(f)
    g = f.grid
    r = g.nodes
    w = g.weights
    y = f.values
    L = l_alpha(f, alpha).L_alpha.values
    fr = _derivs(f)
    sq, _ = _half_rho(family)
    rho2 = family.rho2.values
    br = (1.0 + r * r) ** -1.5
    num = FOUR_PI * family.K1 * float(np.dot(w, (L * sq) * (y * sq) * r * r)) + float(np.dot(w, L * y * rho2))
    den = FOUR_PI * family.K1 * float(np.dot(w, br * ((y * sq) ** 2 + (fr * sq) ** 2) * r * r)) + float(
        np.dot(w, br * (y * y + fr * fr) * rho2)
    )
    ratio = num / den if den > 0 else float("nan")
    return FormReport(num, {"reference": den, "ratio": ratio}, res)


# ---------------------------------------------------------------------------
# basis-path assembly


def _transport(fr, frr, gr, grr, r):
    out = np.empty_like(fr)
    out[..., 1:] = 2.0 * fr[..., 1:] * gr[..., 1:] / r[1:] ** 2
    out[..., 0] = 2.0 * frr[..., 0] * grr[..., 0]
    return out


def _nonlocal_rows(basis, mu, mu_r, mu_rr):
    """Rows of ``Q(b_i, mu)``: ``-mu_rr g_rr[b_i] - (2/r^2) mu_r g_r[b_i] + mu b_i``."""
    g = basis.grid
    r = g.nodes
    out = np.empty_like(basis.F)
    for i, b in enumerate(basis.F):
        d = solve_biharmonic(RadialField(b, g, "even"))
        out[i] = -mu_rr * d.g_rr.values - _transport(mu_r, mu_rr, d.g_r.values, d.g_rr.values, r) + mu * b
    return out


@dataclass(frozen=True, eq=False)
class _Forms:
    A: np.ndarray
    DW: np.ndarray
    D2: np.ndarray
    E2: np.ndarray
    C: np.ndarray


def _assemble(family: WeightFamily, alpha: float, basis: SplineBasis) -> _Forms:
    g = family.grid
    r = g.nodes
    w = g.weights
    F, Fr, Frr = basis.F, basis.Fr, basis.Frr
    mu = np.exp(-r * r)
    mu_r = -2.0 * r * mu
    mu_rr = (4.0 * r * r - 2.0) * mu
    gb = background(g).gbar
    grr, gr = gb.g_rr.values, gb.g_r.values
    cl, cw = background_rates(alpha)

    nloc = _nonlocal_rows(basis, mu, mu_r, mu_rr)
    loc = -Frr * grr - _transport(Fr, Frr, gr, grr, r) + mu * F
    add = -cl * r * Fr + cw * F + 2.0 * (alpha - 1.0) * mu * F

    # Gaussian part: <L_loc f, f rho>_R3 = -4 pi J_rho, the rest paired directly.
    sq, rr_sq = _half_rho(family)
    a = -grr * r * r * w
    left = (Fr + 2.0 * r * F) * sq
    right = Fr * sq + F * rr_sq
    J = (left * a) @ right.T
    direct = ((nloc + add) * sq) @ ((F * sq) * (r * r * w)).T
    A_rho = FOUR_PI * (direct - J)
    rho2 = family.rho2.values
    A_poly = ((loc + nloc + add) * (rho2 * w)) @ F.T
    A = family.K1 * A_rho + A_poly
    A = 0.5 * (A + A.T)

    br = (1.0 + r * r) ** -1.5
    wk = br * r * r * w

    def gram(X, weight):
        return (X * weight) @ X.T

    Fs, Frs = F * sq, Fr * sq
    wp = br * rho2 * w
    DW = FOUR_PI * family.K1 * (gram(Fs, wk) + gram(Frs, wk)) + gram(F, wp) + gram(Fr, wp)
    wd = r * r * (1.0 + r * r) ** ((family.k2 - 5.0) / 2.0) * w
    D2 = gram(F, wd) + gram(Fr, wd)
    E2 = family.K1 * FOUR_PI * gram(Fs, r * r * w) + gram(F, rho2 * w)
    C = np.vstack([F @ (r * r * w), F @ (r**4 * w)])
    return _Forms(A, DW, D2, E2, C)


def _generalized_eig(A, M, C, largest=True):
    """Eigenpairs of ``A x = lam M x`` on ``{C x = 0}``, dropping null directions of ``M``.

    Returns ``(values, vectors, rank)`` with values sorted in decreasing order
    (``largest``) or increasing order.
    """
    Z = null_space(C)
    a = Z.T @ A @ Z
    m = Z.T @ M @ Z
    dg = np.diag(m)
    if np.any(dg <= 0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(m)):
        raise NumericalError("denominator form is not positive on the trial space")
    d = 1.0 / np.sqrt(dg)
    a = a * d[:, None] * d[None, :]
    m = m * d[:, None] * d[None, :]
    try:
        lam, U = np.linalg.eigh(m)
        keep = lam > EIG_CUTOFF * lam.max()
        T = U[:, keep] / np.sqrt(lam[keep])
        ev, V = np.linalg.eigh(T.T @ a @ T)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(m)) if np.all(np.isfinite(m)) else float("inf")
        raise NumericalError(f"generalized eigensolve failed (denominator condition {cond:.3e})") from exc
    X = Z @ (d[:, None] * (T @ V))
    order = np.argsort(ev)[::-1] if largest else np.argsort(ev)
    return ev[order], X[:, order], int(keep.sum())


def _rescale_denominator(forms, M, ev_dw, X_dw, rank_dw):
    """Quotients against ``M`` given the well-conditioned ``DW`` solve.

    When the form is negative definite on the trial space (``DW`` top below
    zero), ``-A`` is used as the metric and ``nu = x.M x / x.(-A) x`` is
    computed instead, so the top quotient is ``-1 / nu_max``.  This avoids
    dividing roundoff of ``A`` by directions where ``M`` is tiny relative to
    ``DW``.  Otherwise ``M`` is used directly.
    """
    if ev_dw[0] >= 0:
        return _generalized_eig(forms.A, M, forms.C)
    nu, X, rank = _generalized_eig(M, -forms.A, forms.C)
    keep = nu > EIG_CUTOFF * nu[0]
    return -1.0 / nu[keep], X[:, keep], rank


def constrained_gap(
    family: WeightFamily, alpha: float = 1.0, n_modes: int = 80, denominator: str = "DW"
) -> GapEstimate:
    """Largest constrained Rayleigh quotient of the weighted linearised form.

    Parameters
    ----------
    family : WeightFamily
        Supplies ``W = K1 rho + rho2 / (4 pi r^2)`` and the grid.
    alpha : float
        Self-similar exponent in ``[1, 1.2]``.
    n_modes : int
        Basis size, at most ``N / 2``.
    denominator : {"DW", "D2", "E2"}
        ``"DW"`` is the weighted dissipation ``4 pi int <r>^-3 (f^2 + f_r^2) W r^2``.
        ``"D2"`` uses the polynomial weight ``r^2 <r>^(k2-5)`` only and
        ``"E2"`` is the weighted energy.

    Returns
    -------
    GapEstimate
    """
    g = family.grid
    if n_modes > g.N // 2:
        raise ConfigurationError(f"n_modes={n_modes} exceeds N/2={g.N // 2}")
    if denominator not in DENOMINATORS:
        raise ConfigurationError(f"denominator must be one of {DENOMINATORS}, got {denominator!r}")
    if not np.isfinite(alpha) or not 1.0 <= alpha <= 1.2:
        raise ConfigurationError(f"alpha must lie in [1, 1.2], got {alpha!r}")
    basis = weighted_basis(family, n_modes)
    forms = _assemble(family, alpha, basis)
    ev, X, rank = _generalized_eig(forms.A, forms.DW, forms.C)
    if denominator != "DW":
        ev, X, rank = _rescale_denominator(forms, getattr(forms, denominator), ev, X, rank)
    mode = RadialField(X[:, 0] @ basis.F, g, "even")
    return GapEstimate(
        float(alpha), float(ev[0]), denominator, int(n_modes), g.N, g.r_max,
        family.R1, family.K1, ev, mode, rank,
    )


# ---------------------------------------------------------------------------
# localized surrogate


def local_gap_surrogate(n: int, family: WeightFamily, n_modes: int = 24) -> LocalGap:
    """Localized coercivity constant ``delta_n`` of a truncated-Maxwellian surrogate.

    The operator ``L1^(n) f = Q(mu_n, f) + Q(f, mu_n)`` uses
    ``mu_n = mu 1_{r <= n}`` in both slots and acts on fields supported in
    ``[0, n]``.  ``delta_n`` is the smallest quotient of
    ``<-L1^(n) f, f / mu>`` over ``|p|^2 = 4 pi int_0^n (-gbar_n,rr)(p_r^2 + r^2 p^2) r^2 dr``
    with ``p = f mu^(-1/2)``, on fields with ``int f r^2 = int f r^4 = 0``.
    Trial fields are ``mu^(1/2) B_i(r^2)``.

    Raises
    ------
    NumericalError
        For ``n < 2``: the ball is too small to resolve the form.
    ConfigurationError
        For ``n > R1``, non-integer ``n``, or fewer than ``NODES_PER_MODE``
        grid nodes per mode inside the ball.
    """
    if int(n) != n:
        raise ConfigurationError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < 2:
        raise NumericalError(f"ball radius n={n} is below the resolvable minimum 2")
    if n > family.R1:
        raise ConfigurationError(f"n={n} exceeds R1={family.R1}")
    g = family.grid
    r = g.nodes
    w = g.weights
    inside = r <= n
    if int(inside.sum()) < NODES_PER_MODE * n_modes:
        raise ConfigurationError(
            f"{n_modes} modes need at least {NODES_PER_MODE * n_modes} grid nodes in [0, {n}], "
            f"found {int(inside.sum())}"
        )
    basis = spline_basis(g, n_modes, float(n))
    P, Pr, Prr = basis.F, basis.Fr, basis.Frr
    half = np.exp(-0.5 * r * r)
    # f = half * p
    F = half * P
    Fr = half * (Pr - r * P)
    Frr = half * (Prr - 2.0 * r * Pr + (r * r - 1.0) * P)
    mu = np.where(inside, np.exp(-r * r), 0.0)
    mu_r = -2.0 * r * mu
    mu_rr = (4.0 * r * r - 2.0) * mu
    # gbar for mu 1_{r<=n}: on [0, n] only B1 changes, by -exp(-n^2)/2.
    gb = background(g).gbar
    shift = math.exp(-n * n) / 6.0
    grr = gb.g_rr.values + shift
    gr = gb.g_r.values + r * shift
    fb = SplineBasis(g, float(n), F, Fr, Frr)
    nloc = _nonlocal_rows(fb, mu, mu_r, mu_rr)
    loc = -Frr * grr - _transport(Fr, Frr, gr, grr, r) + mu * F
    L = np.where(inside, loc + nloc, 0.0)
    # <-L f, f / mu> = -4 pi int L f (p / half) r^2
    pw = np.where(inside, 1.0 / half, 0.0) * r * r * w
    A = -FOUR_PI * (L * pw) @ P.T
    A = 0.5 * (A + A.T)
    a = np.where(inside, -grr, 0.0) * r * r * w
    M = FOUR_PI * ((Pr * a) @ Pr.T + (P * (a * r * r)) @ P.T)
    C = np.vstack([F @ (r * r * w), F @ (r**4 * w)])
    ev, _, _ = _generalized_eig(A, M, C, largest=False)
    return LocalGap(n, float(ev[0]), int(n_modes))
