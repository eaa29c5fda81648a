import json
import math
from pathlib import Path

import numpy as np
import pytest

from skrate.expectation import EvalConfig
from skrate.fading import ChannelParams
from skrate.optimize import OptimizeSpec, corollary_schedule, optimize_scheme
from skrate.rates import RncModel, SchemeParams, SystemParams, rate_lower_pd, rate_nc, rate_training

ORACLE = json.loads((Path(__file__).parent / "fixtures" / "optimizer_oracle.json").read_text())


def test_high_snr_schedule_schedule_values():
    s = corollary_schedule(1e6, 10)
    assert s.p1 == pytest.approx(999000.0)
    assert s.p2 == pytest.approx(111.111111, rel=1e-8)
    assert s.eps1 == s.eps2 == pytest.approx(1 / math.sqrt(math.log2(1 + 1e6)))
    assert s.note
    with pytest.raises(ValueError):
        corollary_schedule(1.0, 10)


def test_high_snr_schedule_schedule_small_power():
    s = corollary_schedule(4.0, 2)
    assert (s.p1, s.p2) == (2.0, 2.0)
    assert s.power_used(2) <= 2 * 4.0


@pytest.mark.parametrize("model", [RncModel(), RncModel("coherent_genie")])
def test_high_snr_schedule_eps_conditions(model):
    Ps = [1e2, 1e4, 1e6, 1e8]
    eps = [corollary_schedule(P, 10).eps1 for P in Ps]
    prod = [e * rate_nc(model, SystemParams(10, P)) for e, P in zip(eps, Ps)]
    assert all(np.diff(eps) < 0)
    assert all(np.diff(prod) > 0)


def test_high_snr_schedule_with_noise_solution():
    P = 1e4
    rnc = rate_nc(RncModel(), SystemParams(10, P))
    s = corollary_schedule(P, 10, rho=0.9, rnc_value=rnc)
    assert s.q1 > 0 and s.q2 > 0 and 0 < s.sigma_sq < 1


@pytest.mark.parametrize("T,snr,rho", [(2, 6.0, 0.5), (10, 30.0, 0.95), (50, 15.0, 0.99), (5, -3.0, 0.9)])
@pytest.mark.parametrize("target", ["lower_pd", "lower_nodisc"])
def test_beats_warm_start_and_respects_power(T, snr, rho, target):
    sys = SystemParams.from_db(T, snr, rho)
    rep = optimize_scheme(sys, OptimizeSpec(target))
    assert rep.best_rate.total >= rep.warm_start_rate - 1e-12
    assert all(np.diff(rep.passes) >= 0)
    for scheme, _ in rep.trace:
        assert scheme.power_used(T) <= T * sys.P * (1 + 1e-9)


def test_small_power_warm_start():
    sys = SystemParams(2, 4.0, ChannelParams(0.5))
    rep = optimize_scheme(sys, OptimizeSpec("lower_pd"))
    assert (rep.warm_start.p1, rep.warm_start.p2) == (2.0, 2.0)
    assert rep.best_rate.total >= rep.warm_start_rate


def test_deterministic():
    sys = SystemParams.from_db(10, 20, 0.9)
    a = optimize_scheme(sys, OptimizeSpec("lower_nodisc"))
    b = optimize_scheme(sys, OptimizeSpec("lower_nodisc"))
    assert a.best.to_dict() == b.best.to_dict()
    assert [v for _, v in a.trace] == [v for _, v in b.trace]


def test_no_reciprocity_matches_brute_force():
    # with rho = 0 the pilot carries no key, but it still shrinks the penalty log2(1 + P2/(1+P1)),
    # so the optimum is interior; compare with a dense scan of the pilot fraction
    sys = SystemParams.from_db(10, 20, 0.0)
    rep = optimize_scheme(sys, OptimizeSpec("lower_pd"))
    assert rep.best_rate.reciprocity_term == 0.0
    taus = np.linspace(0.0, 1.0, 4001)
    brute = max(rate_lower_pd(sys, SchemeParams.from_split(sys, t)).total for t in taus)
    assert rep.best_rate.total >= brute - 1e-6


def test_factor_over_training_at_30db():
    sys = SystemParams.from_db(10, 30, 0.95)
    rep = optimize_scheme(sys, OptimizeSpec("lower_pd"))
    factor = rep.best_rate.total / rate_training(10, 0.95).total
    assert factor > 2
    assert factor == pytest.approx(ORACLE["factor"], rel=ORACLE["rel_tol"])


def test_infeasible_everywhere():
    sys = SystemParams.from_db(10, 10, 0.9)
    rep = optimize_scheme(sys, OptimizeSpec("lower_nodisc"), RncModel("constant_override", 0.0))
    assert "infeasible-quantization" in rep.best_rate.flags
    assert all(v == -math.inf for _, v in rep.trace)


def test_mc_final_reevaluation():
    sys = SystemParams.from_db(5, 20, 0.9)
    cfg = EvalConfig(method="mc", n_samples=5000, seed=1)
    rep = optimize_scheme(sys, OptimizeSpec("lower_pd", passes=1), cfg=cfg)
    assert rep.best_rate.std_error > 0
    again = optimize_scheme(sys, OptimizeSpec("lower_pd", passes=1), cfg=cfg)
    assert rep.best_rate.total == again.best_rate.total


def test_spec_validation():
    with pytest.raises(ValueError):
        OptimizeSpec("upper")
    with pytest.raises(ValueError):
        OptimizeSpec(logit_range=(1.0, -1.0))
    with pytest.raises(ValueError):
        OptimizeSpec(tau_grid=1)
