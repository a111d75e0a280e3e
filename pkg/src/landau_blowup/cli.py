"""Command-line interface: ``landau-blowup {constants,weights,coercivity,evolve,sweep}``.

Every option can also be given in a flat ``key = value`` file passed with
``--config``; command-line flags override the file, which overrides the
defaults.  Exit codes: 0 success, 1 a check failed, 2 invalid configuration.

Outputs go to the directory given by ``--out`` (JSON summaries and CSV
tables).  Without ``--out`` the JSON summary is printed to stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, LandauError
from .grid import build_grid
from .potentials import PotentialSpec, maxwellian, maxwellian_monotonicity, normalization_constants
from .rescaler import RECORD_COLUMNS, SCHEMES, RunConfig, run
from .spectral import DENOMINATORS, constrained_gap, local_gap_surrogate
from .weights import build_family, weight_certificate

__all__ = ["Config", "parse_config", "dispatch", "main", "read_config_file", "to_jsonable"]

SUBCOMMANDS = ("constants", "weights", "coercivity", "evolve", "sweep")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


@dataclass(frozen=True)
class Config:
    """Merged configuration.  Defaults reproduce the reference runs."""

    subcommand: str = "constants"
    gamma: tuple = (-3.0,)
    alpha: tuple = (1.0,)
    R1: int = 4
    k: float = 2.5
    k2: float = 12.5
    K1: float | None = None
    r_max: float = 30.0
    N: int = 1024
    scheme: str = "graded"
    dt: float = 1.0
    tau_max: float = 1200.0
    time_scheme: str = "imex"
    initial: str = "maxwellian"
    amplitude: float = 1e-2
    n_modes: int = 80
    denominator: str = "D2"
    seed: int = 0
    out: str | None = None

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"subcommand: expected one of {SUBCOMMANDS}, got {self.subcommand!r}")
        for g in self.gamma:
            PotentialSpec(g)
        for a in self.alpha:
            if not (1.0 <= a <= 1.2):
                raise ConfigurationError(f"alpha: must lie in [1, 1.2], got {a!r}")
        if int(self.R1) != self.R1 or self.R1 < 4:
            raise ConfigurationError(f"r1: must be an integer >= 4, got {self.R1!r}")
        if not (2.0 < self.k < 20.0):
            raise ConfigurationError(f"k: must lie in (2, 20), got {self.k!r}")
        if not (3.0 < self.k2 < 13.0):
            raise ConfigurationError(f"k2: must lie in (3, 13), got {self.k2!r}")
        if self.K1 is not None and not self.K1 > 0:
            raise ConfigurationError(f"k1: must be positive, got {self.K1!r}")
        if not self.r_max > 0:
            raise ConfigurationError(f"r_max: must be positive, got {self.r_max!r}")
        if self.N < 64:
            raise ConfigurationError(f"n: need at least 64 intervals, got {self.N!r}")
        if self.scheme not in ("uniform", "graded"):
            raise ConfigurationError(f"scheme: expected uniform or graded, got {self.scheme!r}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt: must be positive, got {self.dt!r}")
        if not self.tau_max > 0:
            raise ConfigurationError(f"tau_max: must be positive, got {self.tau_max!r}")
        if self.time_scheme not in SCHEMES:
            raise ConfigurationError(f"time_scheme: expected one of {SCHEMES}, got {self.time_scheme!r}")
        if self.initial not in ("maxwellian", "perturbed", "truncated"):
            raise ConfigurationError(f"initial: unknown initial data {self.initial!r}")
        if self.denominator not in DENOMINATORS:
            raise ConfigurationError(f"denominator: expected one of {DENOMINATORS}, got {self.denominator!r}")
        if not (6 <= self.n_modes <= self.N // 2):
            raise ConfigurationError(f"n_modes: must lie in [6, N/2], got {self.n_modes!r}")
        return self


# key in file / flag dest -> (Config field, converter)
def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _opt_float(text):
    return None if str(text).lower() in ("none", "") else float(text)


KEYS = {
    "gamma": ("gamma", _floats),
    "alpha": ("alpha", _floats),
    "r1": ("R1", int),
    "k": ("k", float),
    "k2": ("k2", float),
    "k1": ("K1", _opt_float),
    "r_max": ("r_max", float),
    "n": ("N", int),
    "scheme": ("scheme", str),
    "dt": ("dt", float),
    "tau_max": ("tau_max", float),
    "time_scheme": ("time_scheme", str),
    "initial": ("initial", str),
    "amplitude": ("amplitude", float),
    "n_modes": ("n_modes", int),
    "denominator": ("denominator", str),
    "seed": ("seed", int),
    "out": ("out", str),
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are rejected."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in KEYS:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so that bad flags map to exit code 2 with a message."""

    def error(self, message):
        raise _ArgError(message)


def _parser():
    p = _Parser(
        prog="landau-blowup",
        description="Rescaled Landau equation: constants, weights, coercivity and blowup runs.",
        epilog=(
            "Verdict policy for evolve/sweep: the burn-in is 10%% of tau_max; blowup needs "
            "c_omega < 0 after the burn-in, |c_omega|/|c_l| > 5 throughout and an exponentially "
            "decaying physical-time increment; relaxation needs E2 nonincreasing after the burn-in."
        ),
    )
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--gamma", nargs="+", type=float, help="interaction exponent(s) in [-3, -2)")
    p.add_argument("--alpha", nargs="+", type=float, help="self-similar exponent(s) in [1, 1.2]")
    p.add_argument("--r1", type=int)
    p.add_argument("--k", type=float)
    p.add_argument("--k2", type=float)
    p.add_argument("--k1", type=float)
    p.add_argument("--r-max", dest="r_max", type=float)
    p.add_argument("--n", type=int, help="number of grid intervals")
    p.add_argument("--scheme", help="grid scheme: uniform or graded")
    p.add_argument("--dt", type=float)
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--time-scheme", dest="time_scheme", help="imex (first order) or cn (second order)")
    p.add_argument("--initial", help="maxwellian, perturbed or truncated")
    p.add_argument("--amplitude", type=float, help="E2(f0 - mu) / E2(mu) for perturbed data")
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--denominator", help="D2 (default), DW or E2 at alpha = 1; alpha > 1 always uses E2")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    return p


def parse_config(argv=None, file=None) -> Config:
    """Merge defaults, an optional config file and command-line flags.

    ``file`` overrides any ``--config`` flag.  Raises ``ConfigurationError``
    naming the offending key.
    """
    parser = _parser()
    try:
        ns = parser.parse_args(list(argv) if argv is not None else None)
    except _ArgError as exc:
        raise ConfigurationError(str(exc)) from exc
    values = {}
    path = file if file is not None else ns.config
    if path is not None:
        for key, text in read_config_file(path).items():
            name, conv = KEYS[key]
            try:
                values[name] = conv(text)
            except ValueError as exc:
                raise ConfigurationError(f"{key}: cannot parse {text!r}") from exc
    for key, (name, conv) in KEYS.items():
        v = getattr(ns, key, None)
        if v is not None:
            values[name] = conv(v)
    return Config(subcommand=ns.subcommand, **values).validate()


# ---------------------------------------------------------------------------
# serialization


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(x):
    if isinstance(x, str):
        return x
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else "nan"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _emit(cfg: Config, name: str, summary: dict, tables=()):
    summary = to_jsonable(summary)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if cfg.out is None:
        print(text)
        return summary
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.json").write_text(text + "\n")
    for fname, header, rows in tables:
        write_csv(out / fname, header, rows)
    return summary


def _grid(cfg):
    return build_grid(cfg.r_max, cfg.N, cfg.scheme)


def _config_dict(cfg):
    return {k: v for k, v in asdict(cfg).items() if k != "out"}


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(cfg: Config):
    g = _grid(cfg)
    mu = maxwellian(g)
    rows, ok = [], True
    for gamma in cfg.gamma:
        nc = normalization_constants(mu, gamma)
        row = {
            "gamma": gamma,
            "C1": nc.C1,
            "C2": nc.C2,
            "sigma": nc.sigma,
            "k_gamma": nc.k_gamma,
            "C1_plus_5C2": nc.margin,
        }
        signs = nc.C1 < 0 and nc.C2 > 0 and nc.margin < 0 and nc.sigma >= 5
        if gamma != -3.0:
            m = maxwellian_monotonicity(g, gamma).values
            r = g.nodes
            band = (r >= 0.1) & (r <= 10.0)
            row["monotonicity_max_on_band"] = float(m[band].max())
            row["monotonicity_at_origin"] = float(m[0])
            signs = signs and nc.sigma > 5 and bool(m[band].max() < 0) and abs(m[0]) < 1e-8
        row["signs_ok"] = bool(signs)
        ok = ok and signs
        rows.append(row)
    header = list(rows[0].keys())
    _emit(cfg, "constants", {"config": _config_dict(cfg), "rows": rows, "passed": ok},
          [("constants.csv", header, [[row[h] if h != "signs_ok" else str(row[h]) for h in header] for row in rows])])
    return EXIT_OK if ok else EXIT_CHECK


def cmd_weights(cfg: Config):
    g = _grid(cfg)
    fam = build_family(g, cfg.R1, cfg.k, cfg.k2, cfg.K1)
    cert = weight_certificate(fam)
    r = g.nodes
    cols = ["r", "eta", "log_q", "log_rho", "lambda", "rho2", "log_W"]
    logW = np.log(fam.W.values) if np.max(fam.log_rho.values) < 700 else np.full_like(r, np.nan)
    data = np.column_stack([r, fam.eta.values, fam.log_q.values, fam.log_rho.values, fam.lam.values, fam.rho2.values, logW])
    summary = {"config": _config_dict(cfg), "certificate": cert.as_dict()}
    _emit(cfg, "weights", summary, [("weights.csv", cols, data.tolist())])
    return EXIT_OK if cert.passed else EXIT_CHECK


def _kappa_fit(alphas, tops):
    x = np.array([a - 1.0 for a in alphas if a > 1.0])
    y = np.array([t for a, t in zip(alphas, tops) if a > 1.0])
    if x.size == 0:
        return None
    return float(-(x @ y) / (x @ x))


def cmd_coercivity(cfg: Config):
    g = _grid(cfg)
    fam = build_family(g, cfg.R1, cfg.k, cfg.k2, cfg.K1)
    rows, spectra, ok = [], [], True
    tops = []
    for a in cfg.alpha:
        den = cfg.denominator if a == 1.0 else "E2"
        est = constrained_gap(fam, a, cfg.n_modes, den)
        tops.append(est.top_rayleigh)
        rows.append(est.as_dict())
        spectra.extend([[a, den, i, v] for i, v in enumerate(est.spectrum)])
        # a gap needs a negative top quotient at every alpha
        if est.top_rayleigh >= 0:
            ok = False
    c_star = [-t for a, t in zip(cfg.alpha, tops) if a == 1.0]
    local = []
    for n in range(2, fam.R1 + 1):
        try:
            delta = float(local_gap_surrogate(n, fam))
            ok = ok and delta > 0
            local.append({"n": n, "delta": delta, "label": "surrogate"})
        except ConfigurationError as exc:
            # ball under-resolved on this grid; report instead of aborting
            local.append({"n": n, "delta": None, "label": "surrogate", "skipped": str(exc)})
    summary = {
        "config": _config_dict(cfg),
        "alpha": list(cfg.alpha),
        "top_rayleigh": tops,
        "c_star": c_star[0] if c_star else None,
        "kappa_fit": _kappa_fit(cfg.alpha, tops),
        "estimates": rows,
        "local_gap_surrogate": local,
        "passed": ok,
    }
    _emit(cfg, "coercivity", summary, [("spectra.csv", ["alpha", "denominator", "index", "quotient"], spectra)])
    return EXIT_OK if ok else EXIT_CHECK


def _run_config(cfg: Config, alpha: float) -> RunConfig:
    return RunConfig(
        alpha=alpha, dt=cfg.dt, tau_max=cfg.tau_max, scheme=cfg.time_scheme, initial=cfg.initial,
        amplitude=cfg.amplitude, seed=cfg.seed, r_max=cfg.r_max, N=cfg.N, grid_scheme=cfg.scheme,
        R1=cfg.R1, k=cfg.k, k2=cfg.k2, K1=cfg.K1,
    )


def _expected(alpha):
    return "relaxation" if alpha == 1.0 else "blowup"


def cmd_evolve(cfg: Config):
    alpha = cfg.alpha[0]
    diag = run(_run_config(cfg, alpha))
    rows = np.column_stack([diag.column(c) for c in RECORD_COLUMNS]).tolist()
    _emit(cfg, "evolve", diag.summary(), [("evolve.csv", list(RECORD_COLUMNS), rows)])
    return EXIT_OK if diag.error is None and diag.verdict == _expected(alpha) else EXIT_CHECK


def thread_cap():
    """Worker cap from ``LANDAU_THREADS`` (default 1)."""
    raw = os.environ.get("LANDAU_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"LANDAU_THREADS: expected an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigurationError(f"LANDAU_THREADS: must be >= 1, got {n}")
    return n


def cmd_sweep(cfg: Config):
    g = _grid(cfg)
    workers = min(thread_cap(), len(cfg.alpha))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda a: run(_run_config(cfg, a), grid=g), cfg.alpha))
    header = ["alpha", "verdict", "T_extrapolated", "decay_rate", "tau_final", "t_phys_final", "min_ratio", "error"]
    rows, runs, ok = [], [], True
    for a, d in zip(cfg.alpha, results):
        s = d.summary()
        ratio = d.column("ratio")
        min_ratio = float(np.nanmin(ratio)) if np.any(np.isfinite(ratio)) else float("nan")
        rows.append([a, s["verdict"], s["T_extrapolated"], s["decay_rate"], s["tau_final"], s["t_phys_final"], min_ratio, s["error"] or ""])
        runs.append(s)
        ok = ok and d.error is None and d.verdict == _expected(a)
    _emit(cfg, "sweep", {"config": _config_dict(cfg), "runs": runs, "passed": ok}, [("sweep.csv", header, rows)])
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "constants": cmd_constants,
    "weights": cmd_weights,
    "coercivity": cmd_coercivity,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
}


def dispatch(cfg: Config) -> int:
    """Run the selected subcommand and map errors to exit codes."""
    try:
        cfg.validate()
        return COMMANDS[cfg.subcommand](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LandauError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
