"""Coercivity weight family ``eta, q, rho, lambda, rho2, W`` and its certificate.

The weight ``rho`` equals ``exp(r^2)`` on ``[0, R1]`` and grows like ``r^k``
in the far field.  It is generated by

    q = rho_r / r,    eta = q' / (2 r q),

from a profile ``eta`` that equals 1 up to ``R1``, then follows
``eta0 = 1 - F(r)`` with ``F(r) = exp(r^2/2) int_{R1}^r exp(-5 s^2/2) ds``
until it meets ``(k-2)/(2 r^2)``, which it follows afterwards.  ``q`` and
``rho`` are integrated in log form, ``(log q)' = 2 r eta`` and
``(log rho)' = r q / rho``, so that large ``R1`` does not overflow; the linear
fields are exposed only when they are representable.

The full weight is ``W = K1 rho + rho2 / (4 pi r^2)`` with
``rho2 = r^2 <r>^(k2-2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx

from .errors import ConfigurationError, ConstructionError
from .grid import RadialField, RadialGrid, build_grid

__all__ = [
    "WeightFamily",
    "CertificateCheck",
    "WeightCertificate",
    "F_profile",
    "find_R2",
    "eta0",
    "build_eta",
    "build_rho",
    "build_rho2",
    "assemble_w",
    "build_family",
    "weight_certificate",
    "DEFAULT_K1",
]

RK_SUBSTEPS = 4
ROOT_XTOL = 1e-13
# Coupling of the Gaussian part.  Values of order one give a coercivity margin
# near 0.07 at alpha = 1; below ~1e-17 the margin is lost.  See README for the
# trade-off with the far-field limit of W on a finite grid.
DEFAULT_K1 = 1.0

_A = math.sqrt(2.5)
_C = math.sqrt(math.pi / 10.0)


def _check_r1_k(R1, k):
    if int(R1) != R1 or R1 < 4:
        raise ConfigurationError(f"R1 must be an integer >= 4, got {R1!r}")
    if not 2.0 < k < 20.0:
        raise ConfigurationError(f"k must lie in (2, 20), got {k!r}")
    if (k - 2.0) / (2.0 * R1 * R1) >= 0.5:
        raise ConfigurationError("(k-2)/(2 R1^2) must be below 1/2")


def F_profile(r, R1):
    """``F(r) = exp(r^2/2) int_{R1}^r exp(-5 s^2/2) ds`` for ``r >= R1``.

    Evaluated through the scaled complementary error function, so it stays
    accurate where both terms are tiny.
    """
    r = np.asarray(r, dtype=float)
    return _C * (
        erfcx(_A * R1) * np.exp((r * r - 5.0 * R1 * R1) / 2.0) - erfcx(_A * r) * np.exp(-2.0 * r * r)
    )


def find_R2(R1):
    """Unique root of ``F(R2) = 1`` beyond ``R1`` (``F`` increases from 0)."""
    lo, hi = float(R1), float(R1) + 1.0
    while F_profile(hi, R1) < 1.0:
        lo, hi = hi, hi * 1.5
        if hi > 1e4:
            raise ConstructionError("F never reaches 1; cannot bracket R2")
    return brentq(lambda x: F_profile(x, R1) - 1.0, lo, hi, xtol=ROOT_XTOL, rtol=1e-15)


def eta0(r, R1, R2):
    """``1`` on ``[0, R1]``, ``1 - F`` on ``[R1, R2]`` and ``0`` beyond."""
    r = np.asarray(r, dtype=float)
    out = np.ones_like(r)
    mid = (r > R1) & (r < R2)
    out[mid] = 1.0 - F_profile(r[mid], R1)
    out[r >= R2] = 0.0
    return out


def _find_R1_star(R1, R2, k):
    c = (k - 2.0) / 2.0

    def d(x):
        return float(eta0(np.array([x]), R1, R2)[0]) - c / (x * x)

    xs = np.linspace(R1, R2, 4001)
    vals = np.array([d(x) for x in xs])
    change = np.flatnonzero((vals[:-1] > 0) & (vals[1:] <= 0))
    if change.size == 0:
        raise ConstructionError(
            "eta0 never meets (k-2)/(2 r^2) on [R1, R2]; "
            f"eta0 - target ranges over [{vals.min():.3g}, {vals.max():.3g}]"
        )
    i = int(change[0])
    if vals[i + 1] == 0.0:
        return float(xs[i + 1])
    return brentq(d, xs[i], xs[i + 1], xtol=ROOT_XTOL, rtol=1e-15)


def _eta_fn(R1, R2, R1_star, k):
    c = (k - 2.0) / 2.0

    def eta(r):
        r = np.asarray(r, dtype=float)
        out = eta0(r, R1, R2)
        far = r >= R1_star
        out[far] = c / r[far] ** 2
        return out

    return eta


def build_eta(grid: RadialGrid, R1: int = 4, k: float = 2.5):
    """Profile ``eta`` on ``grid`` with the radii ``R2`` and ``R1_star``.

    Returns
    -------
    eta : RadialField
    R2 : float
    R1_star : float
    """
    _check_r1_k(R1, k)
    R2 = find_R2(R1)
    R1_star = _find_R1_star(R1, R2, k)
    eta = _eta_fn(R1, R2, R1_star, k)(grid.nodes)
    jump = abs(float(eta0(np.array([R1_star]), R1, R2)[0]) - (k - 2.0) / (2.0 * R1_star**2))
    if jump > 1e-8:
        raise ConstructionError(f"eta is discontinuous at R1_star (jump {jump:.2e})")
    return RadialField(eta, grid, "even"), R2, R1_star


def _integrate_logs(grid, R1, eta):
    """RK4 for ``y = (log q, log rho)`` outward from ``R1`` with exact data inside."""
    r = grid.nodes
    log_q = np.log(2.0) + r * r
    log_rho = r * r
    start = int(np.searchsorted(r, R1, side="right"))

    def rhs(x, y):
        return np.array([2.0 * x * eta(np.array([x]))[0], x * math.exp(y[0] - y[1])])

    x = float(R1)
    y = np.array([math.log(2.0) + R1 * R1, float(R1) * R1])
    for i in range(start, len(r)):
        h = (r[i] - x) / RK_SUBSTEPS
        for _ in range(RK_SUBSTEPS):
            k1 = rhs(x, y)
            k2 = rhs(x + h / 2, y + h / 2 * k1)
            k3 = rhs(x + h / 2, y + h / 2 * k2)
            k4 = rhs(x + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            x += h
        if not np.all(np.isfinite(y)):
            raise ConstructionError(f"ODE integration diverged near r={r[i]:g}")
        log_q[i], log_rho[i] = y
        x = float(r[i])
    return log_q, log_rho


def build_rho(eta_field: RadialField, R1: int, R2: float | None = None, R1_star: float | None = None, k: float = 2.5):
    """Integrate ``q`` and ``rho`` from the ``eta`` profile.

    ``eta`` is re-evaluated analytically at the RK4 stages; the grid field is
    only used to fix the grid.  Returns ``(log_q, log_rho, lambda)`` with
    ``lambda = q r / rho``.
    """
    grid = eta_field.grid
    if R2 is None or R1_star is None:
        _, R2, R1_star = build_eta(grid, R1, k)
    eta = _eta_fn(R1, R2, R1_star, k)
    log_q, log_rho = _integrate_logs(grid, R1, eta)
    lam = grid.nodes * np.exp(log_q - log_rho)
    return (
        RadialField(log_q, grid, "none"),
        RadialField(log_rho, grid, "none"),
        RadialField(lam, grid, "odd"),
    )


def build_rho2(grid: RadialGrid, k2: float = 12.5) -> RadialField:
    """Polynomial weight ``rho2 = r^2 (1 + r^2)^((k2-2)/2)``, ``k2 in (3, 13)``."""
    if not 3.0 < k2 < 13.0:
        raise ConfigurationError(f"k2 must lie in (3, 13), got {k2!r}")
    r = grid.nodes
    return RadialField(r * r * (1.0 + r * r) ** ((k2 - 2.0) / 2.0), grid, "even")


@dataclass(frozen=True, eq=False)
class WeightFamily:
    """All weight fields on one grid plus the construction parameters.

    ``log_q`` and ``log_rho`` are the primary storage; ``q``, ``rho`` and
    ``W`` are exponentiated on demand.
    """

    grid: RadialGrid
    R1: int
    R2: float
    R1_star: float
    k: float
    k2: float
    K1: float
    eta: RadialField
    log_q: RadialField
    log_rho: RadialField
    lam: RadialField
    rho2: RadialField
    overrides: dict = field(default_factory=dict, repr=False)

    @property
    def eps2(self):
        return 2.0 * (self.R2 - self.R1) * math.exp(-self.R1 * self.R1)

    def _exp(self, name, log_field):
        if name in self.overrides:
            return RadialField(self.overrides[name], self.grid, "even")
        if np.max(log_field.values) > 700.0:
            raise ConstructionError(
                f"{name} exceeds double range; use log_{name} (R1={self.R1})"
            )
        return RadialField(np.exp(log_field.values), self.grid, "even")

    @cached_property
    def q(self):
        return self._exp("q", self.log_q)

    @cached_property
    def rho(self):
        return self._exp("rho", self.log_rho)

    @cached_property
    def W(self):
        return assemble_w(self)

    @property
    def lambda_(self):
        return self.lam

    def with_rho(self, rho_values):
        """Copy with ``rho`` replaced (used to inject faults into certificates)."""
        ov = dict(self.overrides)
        ov["rho"] = np.asarray(rho_values, dtype=float)
        with np.errstate(divide="ignore"):
            log_rho = np.log(np.maximum(ov["rho"], 1e-300))
        return WeightFamily(
            self.grid, self.R1, self.R2, self.R1_star, self.k, self.k2, self.K1, self.eta,
            self.log_q, RadialField(log_rho, self.grid, "none"), self.lam, self.rho2, overrides=ov,
        )

    def with_K1(self, K1):
        if not K1 > 0:
            raise ConfigurationError(f"K1 must be positive, got {K1!r}")
        return WeightFamily(
            self.grid, self.R1, self.R2, self.R1_star, self.k, self.k2, float(K1), self.eta,
            self.log_q, self.log_rho, self.lam, self.rho2, overrides=self.overrides,
        )


def assemble_w(family: WeightFamily) -> RadialField:
    """``W = K1 rho + rho2 / (4 pi r^2)``, with ``W(0) = K1 + 1/(4 pi)``."""
    if not family.K1 > 0:
        raise ConfigurationError(f"K1 must be positive, got {family.K1!r}")
    r = family.grid.nodes
    poly = (1.0 + r * r) ** ((family.k2 - 2.0) / 2.0) / (4.0 * math.pi)
    log_rho = family.log_rho.values
    if "rho" in family.overrides:
        rho_part = family.K1 * family.overrides["rho"]
    else:
        with np.errstate(over="ignore", under="ignore"):
            rho_part = np.exp(math.log(family.K1) + log_rho)
    W = rho_part + poly
    if not np.all(np.isfinite(W)):
        raise ConstructionError("W overflows; lower K1 or R1")
    return RadialField(W, family.grid, "even")


def build_family(grid: RadialGrid | None = None, R1: int = 4, k: float = 2.5, k2: float = 12.5, K1: float | None = None) -> WeightFamily:
    """Construct the complete weight family on ``grid`` (default grid if None)."""
    if grid is None:
        grid = build_grid()
    if K1 is None:
        K1 = DEFAULT_K1
    if not K1 > 0:
        raise ConfigurationError(f"K1 must be positive, got {K1!r}")
    eta, R2, R1_star = build_eta(grid, R1, k)
    log_q, log_rho, lam = build_rho(eta, R1, R2, R1_star, k)
    rho2 = build_rho2(grid, k2)
    return WeightFamily(grid, int(R1), R2, R1_star, float(k), float(k2), float(K1), eta, log_q, log_rho, lam, rho2)


@dataclass(frozen=True)
class CertificateCheck:
    name: str
    passed: bool
    margin: float
    worst_r: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class WeightCertificate:
    R1: int
    R2: float
    R1_star: float
    eps2: float
    K1: float
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "R1": self.R1,
            "R2": self.R2,
            "R1_star": self.R1_star,
            "eps2": self.eps2,
            "K1": self.K1,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": c.margin, "worst_r": c.worst_r, "detail": c.detail}
                for c in self.checks
            ],
        }


def _check(name, slack, r, detail=""):
    """Pass when every entry of ``slack`` is >= 0; margin is the worst slack."""
    i = int(np.argmin(slack))
    m = float(slack[i])
    return CertificateCheck(name, bool(m >= 0), m, float(r[i]), detail)


def weight_certificate(family: WeightFamily, far_window: float = 0.1) -> WeightCertificate:
    """Verify the structural properties of a weight family node by node.

    Quantities that grow like ``exp(r^2)`` are compared after dividing by
    ``rho`` (or in log form) so the checks are meaningful for large ``R1``.
    ``far_window`` is the fraction of the outer radius used for the far-field
    power-law checks.
    """
    g = family.grid
    r = g.nodes
    R1, R2, k = family.R1, family.R2, family.k
    lq = family.log_q.values
    lr = family.log_rho.values
    if "rho" in family.overrides:
        with np.errstate(divide="ignore"):
            lr = np.log(family.overrides["rho"])
    eta = family.eta.values
    tol = 1e-12
    checks = []
    inside = r <= R1
    dev = np.abs(lr[inside] - r[inside] ** 2) / np.maximum(1.0, r[inside] ** 2)
    checks.append(_check("rho_gaussian_inside_R1", 1e-13 - dev, r[inside]))
    checks.append(_check("eta_in_unit_interval", np.minimum(eta, 1.0 - eta) + tol, r))
    checks.append(_check("eta_one_inside_R1", tol - np.abs(eta[inside] - 1.0), r[inside]))
    # q <= 2 rho  <=>  log q - log rho <= log 2
    checks.append(_check("q_le_2rho", math.log(2.0) - (lq - lr) + tol, r))
    checks.append(_check("rho_mu_le_1", -(lr - r * r) + tol, r))
    dlog = np.diff(lr - r * r)
    checks.append(_check("rho_mu_nonincreasing", -dlog + 1e-11 * np.maximum(1.0, np.abs(lr[1:])), r[1:]))
    checks.append(
        CertificateCheck("R2_bound", bool(R2 <= math.sqrt(5.0) * (R1 + 1)), math.sqrt(5.0) * (R1 + 1) - R2)
    )
    # rho >= mu^{-1}(R1) (1 + 2 (r^k - R1^k) / (k R1^(k-2))) for r >= R1
    outside = r >= R1
    lower = R1 * R1 + np.log1p(2.0 * (r[outside] ** k - R1**k) / (k * R1 ** (k - 2.0)))
    checks.append(_check("rho_lower_bound", lr[outside] - lower + 1e-10, r[outside]))
    # (r q + q'/2 - q^2 r / rho) / rho >= -8 r eps2 / rho on r >= R1, with
    # q' = 2 r q eta.  Dividing by rho keeps every term O(1).
    qr = np.exp(lq - lr)
    resid = r * qr + r * qr * eta - qr * qr * r
    floor = -8.0 * r * family.eps2 * np.exp(-lr)
    scale = 1e-10 * r * np.maximum(qr, 1.0)
    checks.append(_check("ode_residual", (resid - np.where(outside, floor, 0.0) + scale), r))
    # eta' >= r (eta^2 - 1) - exp(-2 r^2) 1_[R1, R2]
    deta = np.gradient(eta, r)
    src = np.where((r >= R1) & (r <= R2), np.exp(-2.0 * r * r), 0.0)
    h = np.gradient(r)
    slack = deta - (r * (eta * eta - 1.0) - src) + 5.0 * h * h * (1.0 + r)
    kink = np.abs(r - family.R1_star) < 2 * h
    kink |= np.abs(r - R1) < 2 * h
    checks.append(_check("eta_ode_inequality", np.where(kink, 0.0, slack) + tol, r))
    # Far field: q r^(2-k) and rho r^-k close to a constant over the outer
    # window.  The deviation is measured from the best constant, (max+min)/2.
    far = r >= (1.0 - far_window) * g.r_max
    for name, logs, tol_far in (
        ("q_far_power_law", lq[far] - (k - 2.0) * np.log(r[far]), 0.01),
        ("rho_far_power_law", lr[far] - k * np.log(r[far]), 0.05),
    ):
        spread = float(math.tanh(0.5 * (logs.max() - logs.min())))
        checks.append(CertificateCheck(name, spread <= tol_far, tol_far - spread, detail=f"deviation {spread:.3e}"))
    # W <r>^(-(k2-2)) -> 1/(4 pi) at R_max
    W_end = family.K1 * math.exp(min(lr[-1], 700.0)) + (1 + r[-1] ** 2) ** ((family.k2 - 2) / 2) / (4 * math.pi)
    ratio = W_end / (1.0 + r[-1] ** 2) ** ((family.k2 - 2) / 2) * 4.0 * math.pi
    checks.append(CertificateCheck("W_far_limit", bool(abs(ratio - 1.0) <= 0.02), 0.02 - abs(ratio - 1.0), float(r[-1]), f"4 pi W <r>^-(k2-2) = {ratio:.6g}"))
    return WeightCertificate(R1, R2, family.R1_star, family.eps2, family.K1, tuple(checks))
