"""Secret-key rate bounds for the two-way reciprocal block-fading channel.

Rates are in bits per channel use.  ``P`` is the average transmit power
against unit-variance noise (the linear SNR), ``T`` the coherence period.

Every bound is returned as a :class:`RateBreakdown` with
``total = overhead * (reciprocity_term + forward_term + reverse_term)``,
where the three terms already carry their ``1/T`` and ``(T-1)/T`` weights
and ``overhead`` is 1 except for the no-discussion bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np

from . import gaussian_info as gi
from .expectation import (
    LN2,
    EvalConfig,
    EvalResult,
    Functional,
    _scaled_exp1,
    evaluate,
    log1p_exp_mean,
)
from .fading import ChannelParams, RngStream
from .search import bisect_decreasing, golden_max

EULER_GAMMA = 0.5772156649015329
POWER_RTOL = 1e-9


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy value."""


@dataclass(frozen=True)
class SystemParams:
    """Coherence period ``T`` (symbols per block), average power ``P`` and fading law."""

    T: int
    P: float
    channel: ChannelParams = ChannelParams()

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 2:
            raise ValueError("T must be an integer >= 2")
        if not (self.P > 0 and math.isfinite(self.P)):
            raise ValueError("P must be positive and finite")
        object.__setattr__(self, "T", int(self.T))

    @classmethod
    def from_db(cls, T: int, snr_db: float, rho: float = 0.0, var_h=1.0, var_g=1.0):
        return cls(T, db_to_linear(snr_db), ChannelParams(rho, var_h, var_g))

    @property
    def rho(self) -> float:
        return self.channel.rho


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SchemeParams:
    """Training/randomness-sharing scheme.

    ``p1`` is the pilot power, ``p2`` the per-symbol sharing power, ``eps1``
    and ``eps2`` the fractions of extra blocks spent on the channel and source
    public messages.  ``q1``, ``q2`` and ``sigma_sq`` are filled in once the
    quantization constraints are solved (see :func:`quantization_noise`).
    """

    p1: float
    p2: float
    eps1: float = 0.0
    eps2: float = 0.0
    q1: float | None = None
    q2: float | None = None
    sigma_sq: float | None = None
    note: str = ""

    def __post_init__(self):
        for name in ("p1", "p2", "eps1", "eps2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")

    @property
    def alpha(self) -> float:
        return gi.lmmse_alpha(self.p1)

    def power_used(self, T: int) -> float:
        return self.p1 + (T - 1) * self.p2

    def check_power(self, sys: SystemParams) -> None:
        if self.power_used(sys.T) > sys.T * sys.P * (1.0 + POWER_RTOL):
            raise ValueError(
                f"scheme violates P1 + (T-1) P2 <= T P: {self.power_used(sys.T):.6g} > {sys.T * sys.P:.6g}"
            )

    @classmethod
    def from_split(cls, sys: SystemParams, tau: float, eps1=0.0, eps2=0.0) -> "SchemeParams":
        """Scheme spending the fraction ``tau`` of the block energy ``T P`` on the pilot."""
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        energy = sys.T * sys.P
        p1 = tau * energy
        return cls(p1, (energy - p1) / (sys.T - 1), eps1, eps2)

    def to_dict(self) -> dict:
        return {
            "P1": self.p1,
            "P2": self.p2,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "Q1": self.q1,
            "Q2": self.q2,
            "sigma_sq": self.sigma_sq,
        }


Label = Literal["training", "upper", "lower_pd", "lower_nodisc"]


@dataclass
class RateBreakdown:
    label: Label
    total: float
    reciprocity_term: float = 0.0
    forward_term: float = 0.0
    reverse_term: float = 0.0
    penalty_terms: float = 0.0
    std_error: float = 0.0
    overhead: float = 1.0
    flags: tuple[str, ...] = ()
    scheme: SchemeParams | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "total": self.total,
            "reciprocity_term": self.reciprocity_term,
            "forward_term": self.forward_term,
            "reverse_term": self.reverse_term,
            "penalty_terms": self.penalty_terms,
            "std_error": self.std_error,
            "overhead": self.overhead,
            "flags": list(self.flags),
            "details": self.details,
        }
        if self.scheme is not None:
            out["scheme"] = self.scheme.to_dict()
        return out


@dataclass(frozen=True)
class RncModel:
    """Achievable rate of the non-coherent block-fading channel, used to price public messages.

    ``training_based``: one pilot per block, optimized pilot/data split.
    ``coherent_genie``: ``E[log2(1 + P |h|^2)]`` (receiver knows the gain).
    ``constant_override``: a fixed value in bits per channel use.
    """

    kind: Literal["training_based", "coherent_genie", "constant_override"] = "training_based"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("training_based", "coherent_genie", "constant_override"):
            raise ValueError(f"unknown R_NC model {self.kind!r}")
        if self.kind == "constant_override" and (self.value is None or self.value < 0):
            raise ValueError("constant_override needs a non-negative value")

    @classmethod
    def parse(cls, text: str) -> "RncModel":
        """Parse the command-line spelling ``training``, ``genie`` or ``const:VALUE``."""
        if text == "training":
            return cls("training_based")
        if text == "genie":
            return cls("coherent_genie")
        if text.startswith("const:"):
            return cls("constant_override", float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse R_NC model {text!r}")

    def spelling(self) -> str:
        if self.kind == "training_based":
            return "training"
        if self.kind == "coherent_genie":
            return "genie"
        return f"const:{self.value!r}"


# -- training baseline ----------------------------------------------------------

def rate_training(T: int, rho: float) -> RateBreakdown:
    """Best training-only rate ``-(1/T) log2(1 - rho^2)`` (genie estimates, no overhead)."""
    if T < 2:
        raise ValueError("T must be >= 2")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    r = gi.mi_gains(rho) / T
    return RateBreakdown("training", r, reciprocity_term=r)


# -- upper bound ------------------------------------------------------------------

def exp_cell_means(n: int) -> np.ndarray:
    """Conditional means of Exp(1) over its ``n`` equiprobable quantile cells."""
    k = np.arange(n + 1)
    surv = 1.0 - k / n
    edges = -np.log(np.where(surv > 0, surv, 1.0))
    # int_l^r x e^-x dx = (l+1)e^-l - (r+1)e^-r, divided by the cell mass 1/n;
    # the last edge is +inf where (r+1)e^-r vanishes
    part = (edges + 1.0) * surv
    return n * (part[:-1] - part[1:])


def link_objective(p, x, var_g):
    """``E_g[log2(1 + p x / (1 + p |g|^2))]`` for a realized ``|h|^2 = x``; exact.

    Uses ``log(1 + px/(1+qY)) = log(1 + px + qY) - log(1 + qY)`` with
    ``q = p var_g`` and ``E[ln(1 + cY)] = e^(1/c) E1(1/c)``.
    """
    p = np.asarray(p, dtype=float)
    q = p * var_g
    base = 1.0 + p * x
    return (np.log(base) + log1p_exp_mean(q / base) - log1p_exp_mean(q)) / LN2


def saturation_objective(x, var_g):
    """``E_g[log2(1 + x / |g|^2)]``, the ``p -> inf`` limit of :func:`link_objective`."""
    c = np.asarray(x, dtype=float) / var_g
    pos = c > 0
    cc = np.where(pos, c, 1.0)
    val = np.log(cc) + _scaled_exp1(cc) + EULER_GAMMA
    return np.where(pos, val, 0.0) / LN2


@dataclass
class PowerAllocation:
    """Optimal power policy on the quantile grid of ``|h|^2``."""

    nodes: np.ndarray
    power: np.ndarray
    value: float
    dual_value: float
    multiplier: float
    constant_value: float
    saturation_value: float

    @property
    def dual_gap(self) -> float:
        return self.dual_value - self.value

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.power))


def optimize_power_allocation(sys: SystemParams, cfg: EvalConfig = EvalConfig()) -> PowerAllocation:
    """Maximize ``E_h[phi(P(h), |h|^2)]`` subject to ``E[P(h)] <= P``.

    ``|h|^2`` is discretized into ``cfg.grid_size`` equiprobable cells, each
    represented by its conditional mean.  Because ``phi`` is concave in
    ``|h|^2``, a constant policy scores at least its exact expectation on this
    grid.  The Lagrangian ``phi(p, x) - lam p`` is concave in ``p`` and is
    maximized per cell by golden section over ``p in [0, max_power_factor P]``
    (searched in ``log1p`` coordinates); ``lam`` is found by bisection so the
    mean power meets the budget.
    """
    n = cfg.grid_size
    var_h, var_g = sys.channel.var_h, sys.channel.var_g
    x = var_h * exp_cell_means(n)
    P = sys.P
    umax = math.log1p(cfg.max_power_factor)

    def best_response(lam):
        def obj(u):
            p = P * np.expm1(u)
            return link_objective(p, x, var_g) - lam * p

        u, _ = golden_max(obj, np.zeros(n), np.full(n, umax), tol=cfg.golden_tol)
        return P * np.expm1(u)

    # mean power is non-increasing in lam; zero at the largest p=0 slope x/ln2.
    # The multiplier spans many decades across P, so bisect on log(lam).
    log_max = math.log(float(x.max()) / LN2)
    lo, hi = bisect_decreasing(
        lambda t: float(np.mean(best_response(math.exp(t)))),
        P,
        log_max - 80.0,
        log_max,
        tol=cfg.bisect_tol,
    )
    hi = math.exp(hi)
    resp = best_response(hi)
    # weak duality: max_p [phi - lam p] + lam P bounds every feasible policy from above
    dual = hi * P + float(np.mean(link_objective(resp, x, var_g) - hi * resp))
    # the bracket leaves the budget met to ~1e-8; phi grows with p, so spend it all
    power = resp * (P / resp.mean()) if resp.mean() > 0 else resp
    value = float(np.mean(link_objective(power, x, var_g)))
    const = float(np.mean(link_objective(np.full(n, P), x, var_g)))
    sat = float(np.mean(saturation_objective(x, var_g)))
    return PowerAllocation(x, power, value, max(dual, value), hi, const, sat)


def rate_upper(sys: SystemParams, cfg: EvalConfig = EvalConfig()) -> RateBreakdown:
    """Upper bound: ``(1/T) I(h_AB; h_BA)`` plus the optimized one-way link terms."""
    alloc = optimize_power_allocation(sys, cfg)
    recip = gi.mi_gains(sys.rho) / sys.T
    flags = ()
    if alloc.dual_gap > 1e-6 or not alloc.value >= alloc.constant_value - 1e-9:
        flags = ("allocation-not-converged",)
        warnings.warn(
            f"power allocation did not converge (dual gap {alloc.dual_gap:.3e} bits)",
            RuntimeWarning,
            stacklevel=2,
        )
    # both directions share the same marginal fading law
    return RateBreakdown(
        "upper",
        recip + 2.0 * alloc.value,
        reciprocity_term=recip,
        forward_term=alloc.value,
        reverse_term=alloc.value,
        flags=flags,
        details={
            "dual_gap": alloc.dual_gap,
            "multiplier": alloc.multiplier,
            "constant_policy_value": alloc.constant_value,
            "saturation_value": alloc.saturation_value,
        },
    )


# -- non-coherent channel rate ---------------------------------------------------

@lru_cache(maxsize=4096)
def _rnc_training(T: int, P: float, var_h: float) -> float:
    energy = T * P

    def rate(frac):
        frac = np.asarray(frac, dtype=float)
        p_tau = frac * energy
        p_d = (energy - p_tau) / (T - 1)
        est = var_h * var_h * p_tau / (1.0 + var_h * p_tau)
        err = var_h - est
        snr = est * p_d / (1.0 + err * p_d)
        return (T - 1) / T * log1p_exp_mean(snr) / LN2

    # coarse scan first: the objective is unimodal but very flat near the ends
    grid = np.linspace(0.0, 1.0, 65)
    vals = rate(grid)
    i = int(np.argmax(vals))
    _, best = golden_max(rate, grid[max(i - 1, 0)], grid[min(i + 1, 64)], tol=1e-12)
    return max(float(best), float(vals[i]))


def rate_nc(model: RncModel, sys: SystemParams, cfg: EvalConfig | None = None) -> float:
    """Achievable non-coherent channel rate R_NC(P) in bits per channel use."""
    if model.kind == "constant_override":
        return float(model.value)
    if model.kind == "coherent_genie":
        return float(log1p_exp_mean(sys.P * sys.channel.var_h)) / LN2
    return _rnc_training(sys.T, float(sys.P), float(sys.channel.var_h))


# -- lower bounds -------------------------------------------------------------------

def _link_streams(cfg: EvalConfig):
    return RngStream(cfg.seed, 0), RngStream(cfg.seed, 1)


def _links(a, b, cfg: EvalConfig) -> tuple[EvalResult, EvalResult]:
    f = Functional.ratio(a, b)
    s_fwd, s_rev = _link_streams(cfg)
    fwd = evaluate(f, cfg, s_fwd)
    rev = evaluate(f, cfg, s_rev) if cfg.method == "mc" else fwd
    return fwd, rev


def _clamped(value: float, name: str, flags: list) -> float:
    if value < 0:
        flags.append(f"{name}-clamped")
        return 0.0
    return value


def rate_lower_pd(sys: SystemParams, scheme: SchemeParams, cfg: EvalConfig = EvalConfig()) -> RateBreakdown:
    """Lower bound with an external public discussion channel.

    ``(1/T)(-log2(1 - alpha^2 rho^2)) + ((T-1)/T)(R_AB + R_BA)`` with
    ``R_AB = F(P2 var_h, P2 var_g) - log2(1 + P2/(1+P1))``.  A negative link
    term is clamped to zero (the scheme can leave that direction idle) and
    flagged; the unclamped values are kept in ``details``.
    """
    scheme.check_power(sys)
    T, rho = sys.T, sys.rho
    alpha = scheme.alpha
    r_t = gi.mi_estimates(alpha, rho)
    penalty = math.log2(1.0 + scheme.p2 / (1.0 + scheme.p1))
    ch = sys.channel
    fwd, rev = _links(scheme.p2 * ch.var_h, scheme.p2 * ch.var_g, cfg)
    flags: list[str] = []
    r_ab = fwd.value - penalty
    r_ba = rev.value - penalty
    w = (T - 1) / T
    fwd_term = w * _clamped(r_ab, "forward", flags)
    rev_term = w * _clamped(r_ba, "reverse", flags)
    se = w * math.hypot(fwd.std_error if r_ab >= 0 else 0.0, rev.std_error if r_ba >= 0 else 0.0)
    recip = r_t / T
    return RateBreakdown(
        "lower_pd",
        recip + fwd_term + rev_term,
        reciprocity_term=recip,
        forward_term=fwd_term,
        reverse_term=rev_term,
        penalty_terms=2.0 * w * penalty,
        std_error=se,
        flags=tuple(flags),
        scheme=scheme,
        details={"R_T": r_t, "R_AB": r_ab, "R_BA": r_ba, "alpha": alpha},
    )


def quantization_noise(
    sys: SystemParams,
    scheme: SchemeParams,
    rnc_value: float,
    eps1_rule: Literal["Tminus1", "T"] = "Tminus1",
) -> tuple[float, float, float]:
    """Smallest ``(Q1, Q2)`` meeting the public-message rate constraints, and sigma^2.

    ``log2(1 + alpha(1-alpha^2 rho^2)/Q1) <= eps1 m R_NC`` with ``m = T-1``
    (or ``T`` under ``eps1_rule="T"``), and
    ``log2(1 + (sigma^2 P2 + 1)/Q2) <= eps2 R_NC``, both solved with equality.
    Raises :class:`ValueError` when either budget is zero.
    """
    if eps1_rule not in ("Tminus1", "T"):
        raise ValueError(f"unknown eps1 rule {eps1_rule!r}")
    m = sys.T - 1 if eps1_rule == "Tminus1" else sys.T
    alpha = scheme.alpha
    c1 = scheme.eps1 * m * rnc_value
    c2 = scheme.eps2 * rnc_value
    if not (c1 > 0 and c2 > 0):
        raise ValueError("infeasible quantization: zero public-message budget")
    q1 = alpha * (1.0 - (alpha * sys.rho) ** 2) / math.expm1(min(c1, 1000.0) * LN2)
    sigma_sq = gi.sigma_sq_from_pilot(scheme.p1, q1)
    q2 = (sigma_sq * scheme.p2 + 1.0) / math.expm1(min(c2, 1000.0) * LN2)
    return q1, q2, sigma_sq


def rate_lower_nodisc(
    sys: SystemParams,
    scheme: SchemeParams,
    rnc: RncModel = RncModel(),
    cfg: EvalConfig = EvalConfig(),
    *,
    q1: float | None = None,
    q2: float | None = None,
    apply_overhead: bool = True,
    eps1_rule: Literal["Tminus1", "T"] = "Tminus1",
) -> RateBreakdown:
    """Lower bound when public messages travel over the fading channel itself.

    ``(1/(1+eps1+eps2)) ((1/T) R_I + ((T-1)/T)(R_AB + R_BA))`` with the
    quantization noises from :func:`quantization_noise`.  ``q1``/``q2``
    override the solved values and ``apply_overhead=False`` drops the
    ``1/(1+eps1+eps2)`` factor; with ``q1 = q2 = 0`` and no overhead this
    reproduces :func:`rate_lower_pd`.
    """
    scheme.check_power(sys)
    T, rho = sys.T, sys.rho
    alpha = scheme.alpha
    rnc_value = None
    if q1 is None or q2 is None:
        rnc_value = rate_nc(rnc, sys, cfg)
        try:
            s1, s2, _ = quantization_noise(sys, scheme, rnc_value, eps1_rule)
        except ValueError:
            return RateBreakdown(
                "lower_nodisc",
                0.0,
                flags=("infeasible-quantization",),
                scheme=scheme,
                details={"R_NC": rnc_value},
            )
        q1 = s1 if q1 is None else q1
        q2 = s2 if q2 is None else q2
    if q1 < 0 or q2 < 0:
        raise ValueError("quantization noise variances must be non-negative")
    sigma_sq = gi.sigma_sq_from_pilot(scheme.p1, q1)
    r_i = gi.channel_key_rate(alpha, rho, q1)

    ch = sys.channel
    p2 = scheme.p2
    fwd, rev = _links(p2 * ch.var_h / (1.0 + q2), p2 * ch.var_g, cfg)
    penalty = math.log2(sigma_sq * p2 / (1.0 + q2) + 1.0)
    flags: list[str] = []
    r_ab = fwd.value - penalty
    r_ba = rev.value - penalty
    w = (T - 1) / T
    fwd_term = w * _clamped(r_ab, "forward", flags)
    rev_term = w * _clamped(r_ba, "reverse", flags)
    recip = r_i / T
    overhead = 1.0 / (1.0 + scheme.eps1 + scheme.eps2) if apply_overhead else 1.0
    se = overhead * w * math.hypot(
        fwd.std_error if r_ab >= 0 else 0.0, rev.std_error if r_ba >= 0 else 0.0
    )
    solved = replace(scheme, q1=q1, q2=q2, sigma_sq=sigma_sq)
    return RateBreakdown(
        "lower_nodisc",
        overhead * (recip + fwd_term + rev_term),
        reciprocity_term=recip,
        forward_term=fwd_term,
        reverse_term=rev_term,
        penalty_terms=2.0 * w * penalty,
        std_error=se,
        overhead=overhead,
        flags=tuple(flags),
        scheme=solved,
        details={"R_I": r_i, "R_AB": r_ab, "R_BA": r_ba, "alpha": alpha, "R_NC": rnc_value},
    )
