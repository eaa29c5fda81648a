"""Configuration, sweeps, output files and the validation suite behind the CLI.

Config files are TOML.  The full schema (every key is optional unless noted)::

    curves = ["training", "upper", "lower_pd", "lower_nodisc"]   # at least one
    rnc = "training"            # training | genie | const:VALUE
    eps1_rule = "Tminus1"       # Tminus1 | T

    [sweep]                     # omit for a single point
    axis = "snr_db"             # snr_db | coherence_T
    values = [0, 5, 10]         # strictly increasing

    [system]
    T = 10                      # forbidden when axis = coherence_T
    snr_db = 30.0               # forbidden when axis = snr_db
    rho = 0.95
    var_h = 1.0
    var_g = 1.0

    [optimizer]
    passes = 3
    tol = 1e-9
    tau_logit_range = [-14.0, 14.0]
    tau_grid = 29
    eps_log10_range = [-4.0, 1.0]
    eps_grid = 21

    [eval]
    method = "quadrature"       # quadrature | mc
    n_samples = 1000000
    seed = 0
    quad_order = 64
    workers = 1
    grid_size = 512

    [output]
    path = "out.csv"
    format = "csv"              # csv | json
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import random
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from . import gaussian_info as gi
from .expectation import EvalConfig, Functional, eval_mc, eval_quadrature, gamma_constant
from .fading import ALGORITHM, ChannelParams, RngStream
from .optimize import OptimizeSpec, optimize_scheme
from .rates import (
    NumericalError,
    RncModel,
    SchemeParams,
    SystemParams,
    db_to_linear,
    rate_lower_nodisc,
    rate_lower_pd,
    rate_training,
    rate_upper,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CURVES = ("training", "upper", "lower_pd", "lower_nodisc")
AXES = ("snr_db", "coherence_T")
SCHEME_COLUMNS = ("P1", "P2", "eps1", "eps2", "Q1", "Q2")
NA = "NA"


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentConfig:
    axis: str | None = None
    values: tuple = ()
    T: int | None = 10
    snr_db: float | None = 30.0
    rho: float = 0.95
    var_h: float = 1.0
    var_g: float = 1.0
    curves: tuple[str, ...] = CURVES
    rnc: RncModel = RncModel()
    eps1_rule: str = "Tminus1"
    optimizer: dict = field(default_factory=dict)
    eval: EvalConfig = EvalConfig()
    out: str | None = None
    format: str = "csv"

    def points(self) -> list[tuple[int, float]]:
        """(T, snr_db) for every axis value, in axis order."""
        if self.axis is None:
            return [(self.T, self.snr_db)]
        if self.axis == "snr_db":
            return [(self.T, float(v)) for v in self.values]
        return [(int(v), self.snr_db) for v in self.values]

    def spec(self, target: str) -> OptimizeSpec:
        o = self.optimizer
        kw = {}
        if "tau_logit_range" in o:
            kw["logit_range"] = tuple(o["tau_logit_range"])
        if "eps_log10_range" in o:
            kw["eps_log10_range"] = tuple(o["eps_log10_range"])
        for k in ("passes", "tol", "tau_grid", "eps_grid"):
            if k in o:
                kw[k] = o[k]
        return OptimizeSpec(target=target, eps1_rule=self.eps1_rule, **kw)

    def canonical(self) -> dict:
        """Everything that determines the numbers (worker count excluded)."""
        ev = asdict(self.eval)
        ev.pop("workers")
        return {
            "axis": self.axis,
            "values": list(self.values),
            "T": self.T,
            "snr_db": self.snr_db,
            "rho": self.rho,
            "var_h": self.var_h,
            "var_g": self.var_g,
            "curves": list(self.curves),
            "rnc": self.rnc.spelling(),
            "eps1_rule": self.eps1_rule,
            "optimizer": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.optimizer.items())},
            "eval": ev,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# -- parsing ------------------------------------------------------------------

_TOP = {"curves", "rnc", "eps1_rule", "sweep", "system", "optimizer", "eval", "output"}
_SECTIONS = {
    "sweep": {"axis", "values"},
    "system": {"T", "snr_db", "rho", "var_h", "var_g"},
    "optimizer": {"passes", "tol", "tau_logit_range", "tau_grid", "eps_log10_range", "eps_grid"},
    "eval": {"method", "n_samples", "seed", "quad_order", "workers", "grid_size"},
    "output": {"path", "format"},
}


def _num(path, v, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(path, f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def parse_config(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed TOML mapping.

    Unknown keys and ill-typed values raise :class:`ConfigError` naming the
    field path, e.g. ``eval.n_samples``.
    """
    cfg = base or ExperimentConfig()
    for k in data:
        if k not in _TOP:
            raise ConfigError(k, "unknown key")
    for sec, keys in _SECTIONS.items():
        if sec in data:
            if not isinstance(data[sec], dict):
                raise ConfigError(sec, "expected a table")
            for k in data[sec]:
                if k not in keys:
                    raise ConfigError(f"{sec}.{k}", "unknown key")

    kw: dict[str, Any] = {}
    if "curves" in data:
        curves = data["curves"]
        if not isinstance(curves, list):
            raise ConfigError("curves", "expected a list")
        for i, c in enumerate(curves):
            if c not in CURVES:
                raise ConfigError(f"curves[{i}]", f"unknown curve {c!r}")
        kw["curves"] = tuple(c for c in CURVES if c in curves)
    if "rnc" in data:
        try:
            kw["rnc"] = RncModel.parse(str(data["rnc"]))
        except ValueError as e:
            raise ConfigError("rnc", str(e)) from None
    if "eps1_rule" in data:
        kw["eps1_rule"] = data["eps1_rule"]

    sys_t = data.get("system", {})
    for k in ("snr_db", "rho", "var_h", "var_g"):
        if k in sys_t:
            kw[k] = _num(f"system.{k}", sys_t[k])
    if "T" in sys_t:
        kw["T"] = _num("system.T", sys_t["T"], int)

    if "sweep" in data:
        sw = data["sweep"]
        if "axis" not in sw:
            raise ConfigError("sweep.axis", "required when [sweep] is present")
        if sw["axis"] not in AXES:
            raise ConfigError("sweep.axis", f"expected one of {AXES}, got {sw['axis']!r}")
        kw["axis"] = sw["axis"]
        vals = sw.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values", "expected a non-empty list")
        kind = int if sw["axis"] == "coherence_T" else float
        kw["values"] = tuple(_num(f"sweep.values[{i}]", v, kind) for i, v in enumerate(vals))
        fixed = "T" if sw["axis"] == "coherence_T" else "snr_db"
        if fixed in sys_t:
            raise ConfigError(f"system.{fixed}", "conflicts with the sweep axis")
        kw[fixed] = None

    if "optimizer" in data:
        o = dict(cfg.optimizer)
        for k, v in data["optimizer"].items():
            path = f"optimizer.{k}"
            if k.endswith("_range"):
                if not isinstance(v, list) or len(v) != 2:
                    raise ConfigError(path, "expected [low, high]")
                o[k] = (_num(path, v[0]), _num(path, v[1]))
            elif k in ("passes", "tau_grid", "eps_grid"):
                o[k] = _num(path, v, int)
            else:
                o[k] = _num(path, v)
        kw["optimizer"] = o

    if "eval" in data:
        ev = {}
        for k, v in data["eval"].items():
            path = f"eval.{k}"
            ev[k] = v if k == "method" else _num(path, v, int)
        kw["eval"] = ev

    if "output" in data:
        out = data["output"]
        if "path" in out:
            kw["out"] = str(out["path"])
        if "format" in out:
            kw["format"] = out["format"]
    return validate_config(cfg, **kw)


def validate_config(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Apply overrides to ``cfg`` and check every invariant."""
    ev = kw.pop("eval", None)
    if ev:
        try:
            kw["eval"] = cfg.eval.with_(**ev)
        except (ValueError, TypeError) as e:
            raise ConfigError("eval", str(e)) from None
    cfg = replace(cfg, **kw)

    if not cfg.curves:
        raise ConfigError("curves", "at least one curve is required")
    if cfg.eps1_rule not in ("Tminus1", "T"):
        raise ConfigError("eps1_rule", f"expected Tminus1 or T, got {cfg.eps1_rule!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("output.format", f"expected csv or json, got {cfg.format!r}")
    if cfg.eval.method == "mc" and cfg.eval.n_samples < 1000:
        raise ConfigError("eval.n_samples", "Monte Carlo needs at least 1000 samples")
    if cfg.eval.seed < 0 or cfg.eval.seed >= 2**64:
        raise ConfigError("eval.seed", "expected an unsigned 64-bit integer")
    if cfg.axis is not None:
        vals = list(cfg.values)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep.values", "must be strictly increasing")
    try:
        ChannelParams(cfg.rho, cfg.var_h, cfg.var_g)
    except ValueError as e:
        raise ConfigError("system", str(e)) from None
    for T, snr in cfg.points():
        if T is None or T < 2:
            raise ConfigError("system.T" if cfg.axis != "coherence_T" else "sweep.values", "T must be >= 2")
        if snr is None or not math.isfinite(snr):
            raise ConfigError("system.snr_db", "a finite SNR is required")
    try:
        for target in ("lower_pd", "lower_nodisc"):
            cfg.spec(target)
    except (ValueError, TypeError) as e:
        raise ConfigError("optimizer", str(e)) from None
    return cfg


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError("--config", str(e)) from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("--config", f"TOML syntax error: {e}") from None
    return parse_config(data, base)


def preset(name: str, fig5_snr_db: float = 30.0) -> ExperimentConfig:
    """The rate-vs-SNR (``fig4``) and rate-vs-coherence-period (``fig5``) sweeps."""
    if name == "fig4":
        return ExperimentConfig(
            axis="snr_db", values=tuple(float(v) for v in range(0, 55, 5)), T=10, snr_db=None, rho=0.95
        )
    if name == "fig5":
        return ExperimentConfig(
            axis="coherence_T", values=(2, 5, 10, 20, 50, 100), T=None, snr_db=float(fig5_snr_db), rho=0.99
        )
    raise ConfigError("--preset", f"unknown preset {name!r}")


# -- evaluation ---------------------------------------------------------------

def _round9(v):
    if v is None:
        return None
    v = float(v)
    if not math.isfinite(v):
        return v
    return float(f"{v:.9g}")


def columns(cfg: ExperimentConfig) -> list[str]:
    cols = ["T" if cfg.axis == "coherence_T" else "snr_db"]
    for c in cfg.curves:
        cols += [c, f"{c}_se", f"{c}_flags"]
        if c in ("lower_pd", "lower_nodisc"):
            cols += [f"{c}_{s}" for s in SCHEME_COLUMNS]
    cols.append("status")
    return cols


def system_for(cfg: ExperimentConfig, T: int, snr_db: float) -> SystemParams:
    return SystemParams(T, db_to_linear(snr_db), ChannelParams(cfg.rho, cfg.var_h, cfg.var_g))


def compute_rates(cfg: ExperimentConfig, T: int, snr_db: float) -> dict:
    """Every requested bound at one point, as :class:`RateBreakdown` objects."""
    sys = system_for(cfg, T, snr_db)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # surfaced through flags
        for c in cfg.curves:
            if c == "training":
                out[c] = rate_training(T, cfg.rho)
            elif c == "upper":
                out[c] = rate_upper(sys, cfg.eval)
            else:
                out[c] = optimize_scheme(sys, cfg.spec(c), cfg.rnc, cfg.eval).best_rate
    return out


def evaluate_point(cfg: ExperimentConfig, T: int, snr_db: float) -> dict:
    """One sweep row; failures are recorded in ``status`` and leave NA columns."""
    row: dict[str, Any] = {c: None for c in columns(cfg)}
    row[columns(cfg)[0]] = T if cfg.axis == "coherence_T" else _round9(snr_db)
    try:
        rates = compute_rates(cfg, T, snr_db)
    except (NumericalError, FloatingPointError, ValueError, ArithmeticError) as e:
        row["status"] = f"error:{type(e).__name__}"
        return row
    for c, r in rates.items():
        row[c] = _round9(r.total)
        row[f"{c}_se"] = _round9(r.std_error)
        row[f"{c}_flags"] = ";".join(r.flags) or None
        if r.scheme is not None:
            d = r.scheme.to_dict()
            for s in SCHEME_COLUMNS:
                row[f"{c}_{s}"] = _round9(d[s])
    row["status"] = "ok"
    return row


def _point_job(args):
    cfg, T, snr = args
    return evaluate_point(cfg, T, snr)


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Evaluate every axis point; rows come back in axis order for any worker count."""
    jobs = [(cfg, T, snr) for T, snr in cfg.points()]
    workers = cfg.eval.workers
    # axis points own the parallelism; the MC shards inside run sequentially
    inner = replace(cfg, eval=cfg.eval.with_(workers=1))
    jobs = [(inner, T, snr) for _, T, snr in jobs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(j) for j in jobs]


# -- output -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.9g}"


def write_csv(rows: list[dict], cols: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Inverse of :func:`write_csv`: ``NA`` becomes None, numbers become int/float."""
    reader = csv.reader(io.StringIO(text))
    cols = next(reader)
    rows = []
    for rec in reader:
        row = {}
        for c, s in zip(cols, rec):
            if s == NA:
                row[c] = None
            elif c == "status" or c.endswith("_flags"):
                row[c] = s
            elif c == "T":
                row[c] = int(s)
            else:
                row[c] = float(s)
        rows.append(row)
    return rows


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "config": cfg.canonical(),
        "seed": cfg.eval.seed,
        "method": cfg.eval.method,
        "n_samples": cfg.eval.n_samples if cfg.eval.method == "mc" else None,
        "rng": ALGORITHM,
        "versions": {
            "skrate": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# -- validation suite ---------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    observed: Any
    expected: Any
    tolerance: Any
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: observed={self.observed} expected={self.expected} tol={self.tolerance} {self.detail}".rstrip()


def check_closed_forms(seed: int = 0, n: int = 200, fault: str | None = None) -> Check:
    """Closed-form quantized-chain identities against the determinant oracle."""
    rng = random.Random(seed)
    worst = 0.0
    sign = -1.0 if fault == "q1-sign" else 1.0
    for _ in range(n):
        p1 = 10 ** rng.uniform(-1, 4)
        rho = rng.uniform(0, 0.999)
        q1 = 10 ** rng.uniform(-4, 2)
        alpha = gi.lmmse_alpha(p1)
        model = gi.build_quantized_chain(rho, p1, q1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", gi.NearSingularWarning)
            oracle = (
                gi.gaussian_mi(model, ["u_AB"], ["hh_AB"]),
                gi.gaussian_mi(model, ["u_AB"], ["hh_BA"]),
                gi.gaussian_mi(model, ["u_AB"], ["u_BA"]),
            )
        with np.errstate(all="ignore"):
            try:
                closed = (
                    gi.mi_quantized_same(alpha, sign * q1),
                    gi.mi_quantized_cross(alpha, rho, sign * q1),
                    gi.mi_quantized_pair(alpha, rho, sign * q1),
                )
            except ValueError:
                closed = (math.nan,) * 3
        for a, b in zip(closed, oracle):
            err = abs(a - b)
            worst = err if not err <= worst else worst
    return Check("closed-form MI identities", worst <= 1e-10, worst, 0.0, 1e-10, f"n={n}")


def check_reduction(seed: int = 0, n: int = 100, cfg: EvalConfig = EvalConfig()) -> Check:
    """Zero quantization noise and no overhead turns the no-discussion bound into the discussion bound."""
    rng = random.Random(seed + 1)
    worst = 0.0
    for _ in range(n):
        T = rng.choice([2, 3, 5, 10, 20, 50, 100])
        P = 10 ** rng.uniform(-1, 6)
        sys = SystemParams(T, P, ChannelParams(rng.uniform(0, 0.999)))
        scheme = SchemeParams.from_split(sys, rng.uniform(0.01, 0.99), rng.uniform(0, 1), rng.uniform(0, 1))
        a = rate_lower_pd(sys, scheme, cfg).total
        b = rate_lower_nodisc(sys, scheme, cfg=cfg, q1=0.0, q2=0.0, apply_overhead=False).total
        worst = max(worst, abs(a - b))
    return Check("zero-noise reduction", worst <= 1e-12, worst, 0.0, 1e-12, f"n={n}")


def ab_grid(n_a: int = 10, n_b: int = 5) -> list[tuple[float, float]]:
    return [(a, b) for a in np.logspace(-2, 4, n_a) for b in np.concatenate([[0.0], np.logspace(-2, 4, n_b - 1)])]


def check_mc_vs_quadrature(cfg: EvalConfig) -> Check:
    """Monte Carlo against quadrature on a 50-point (a, b) grid, 4 standard errors."""
    mc_cfg = cfg.with_(method="mc", n_samples=max(cfg.n_samples, 10**5))
    worst = 0.0
    for k, (a, b) in enumerate(ab_grid()):
        f = Functional.ratio(a, b)
        m = eval_mc(f, mc_cfg, RngStream(cfg.seed, 2).shard(k))
        q = eval_quadrature(f, cfg.quad_order)
        worst = max(worst, abs(m.value - q.value) / m.std_error)
    return Check("MC vs quadrature", worst < 4.0, round(worst, 3), 0.0, "4 std errors", "max |mc-quad|/se over 50 points")


def check_ordering(cfg: ExperimentConfig, snrs=(0.0, 20.0, 40.0), Ts=(2, 10), rhos=(0.5, 0.95)) -> Check:
    """lower_nodisc <= lower_pd <= upper within 3 combined standard errors."""
    worst = -math.inf
    for rho in rhos:
        sub = replace(cfg, rho=rho, curves=("upper", "lower_pd", "lower_nodisc"))
        for T in Ts:
            for snr in snrs:
                r = compute_rates(sub, T, snr)
                u, pd, nd = r["upper"], r["lower_pd"], r["lower_nodisc"]
                for lo, hi in ((nd, pd), (pd, u)):
                    slack = 3.0 * math.hypot(lo.std_error, hi.std_error) + 1e-9
                    worst = max(worst, lo.total - hi.total - slack)
    return Check("bound ordering", worst <= 0.0, worst, "<= 0", "3 std errors", "max violation")


def check_gap(cfg: ExperimentConfig) -> list[Check]:
    """High-SNR gap between the upper bound and the optimized discussion bound."""
    g = gamma_constant(ChannelParams(), cfg.eval.with_(method="quadrature"))
    out = [Check("gap constant (quadrature)", abs(g.value - 2 / math.log(2)) <= 1e-5, g.value, 2 / math.log(2), 1e-5)]
    sub = replace(cfg, rho=0.95, curves=("upper", "lower_pd"))
    r = compute_rates(sub, 10, 60.0)
    gap = r["upper"].total - r["lower_pd"].total
    target = g.value / 10
    out.append(Check("high-SNR gap, T=10, 60 dB", abs(gap / target - 1) <= 0.05, gap, target, "5%"))
    return out


def run_validation(cfg: ExperimentConfig, fault: str | None = None) -> list[Check]:
    seed = cfg.eval.seed
    checks = [
        check_closed_forms(seed, fault=fault),
        check_reduction(seed, cfg=cfg.eval),
        check_mc_vs_quadrature(cfg.eval),
        check_ordering(cfg),
    ]
    checks += check_gap(cfg)
    return checks
