import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import exp1

from skrate.expectation import (
    LN2,
    EvalConfig,
    Functional,
    eval_mc,
    eval_quadrature,
    evaluate,
    gamma_constant,
    log1p_exp_mean,
    simple_closed_form,
)
from skrate.fading import ChannelParams, RngStream


def ratio_reference(a, b):
    # independent oracle: adaptive quadrature of the inner closed form over Y
    def inner(y):
        c = a / (1.0 + b * y)
        return math.exp(1.0 / c) * exp1(1.0 / c) * math.exp(-y)

    brk = sorted({0.0, 1.0 / b if b > 0 else 1.0, 1.0, 50.0})
    total = sum(integrate.quad(inner, lo, hi, limit=200, epsabs=1e-15, epsrel=1e-13)[0] for lo, hi in zip(brk, brk[1:]))
    return total / LN2


@pytest.mark.parametrize("a", [1e-3, 0.5, 1.0, 30.0, 1e5, 1e9])
def test_closed_form_simple(a):
    ref = integrate.quad(lambda x: math.log1p(a * x) * math.exp(-x), 0, np.inf, limit=400)[0] / LN2
    assert simple_closed_form(a) == pytest.approx(ref, rel=1e-9)
    assert eval_quadrature(Functional.simple(a)).value == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_log1p_exp_mean_known_value():
    assert log1p_exp_mean(1.0) / LN2 == pytest.approx(0.86034738, abs=1e-8)
    assert log1p_exp_mean(0.0) == 0.0
    # large-argument branch matches log c - Euler gamma asymptotics
    c = 1e12
    assert log1p_exp_mean(c) == pytest.approx(math.log(c) - 0.5772156649015329, rel=1e-10)


@pytest.mark.parametrize("a,b", [(0.01, 0.0), (1.0, 1.0), (10.0, 0.1), (100.0, 100.0), (1e4, 1.0), (1e8, 1e8)])
def test_ratio_quadrature_vs_reference(a, b):
    assert eval_quadrature(Functional.ratio(a, b)).value == pytest.approx(ratio_reference(a, b), abs=1e-10)


@pytest.mark.parametrize("c", [0.25, 1.0, 4.0, 100.0])
def test_ratio_limit_closed_form(c):
    exact = 1.0 / LN2 if c == 1.0 else c * math.log2(c) / (c - 1.0)
    r = eval_quadrature(Functional.ratio_limit(c))
    assert r.converged
    assert r.value == pytest.approx(exact, abs=1e-10)


def test_ratio_approaches_limit():
    big = eval_quadrature(Functional.ratio(1e9, 1e9)).value
    assert big == pytest.approx(1.0 / LN2, abs=1e-6)


def test_mc_matches_quadrature_and_is_seeded():
    cfg = EvalConfig(method="mc", n_samples=200_000, seed=4)
    f = Functional.ratio(20.0, 3.0)
    r1 = evaluate(f, cfg)
    r2 = evaluate(f, cfg)
    assert r1 == r2
    q = eval_quadrature(f).value
    assert abs(r1.value - q) < 4 * r1.std_error
    assert r1.std_error > 0


def test_mc_worker_invariance():
    f = Functional.ratio(5.0, 5.0)
    cfg = EvalConfig(method="mc", n_samples=300_000, shard_size=2**14)
    a = eval_mc(f, cfg, RngStream(9))
    b = eval_mc(f, cfg.with_(workers=4), RngStream(9))
    assert a.value == b.value and a.std_error == b.std_error


def test_antithetic_reduces_error():
    f = Functional.simple(2.0)
    cfg = EvalConfig(method="mc", n_samples=200_000)
    anti = eval_mc(f, cfg, RngStream(1))
    plain = eval_mc(f, cfg.with_(antithetic=False), RngStream(1))
    assert anti.std_error < plain.std_error


def test_mc_rejects_small_runs():
    with pytest.raises(ValueError):
        eval_mc(Functional.simple(1.0), EvalConfig(method="mc", n_samples=10), RngStream(0))


def test_functional_validation():
    with pytest.raises(ValueError):
        Functional("bogus", 1.0)
    with pytest.raises(ValueError):
        Functional.ratio(-1.0, 0.0)
    with pytest.raises(ValueError):
        EvalConfig(quad_order=4)


def test_gamma_unit_and_scaled():
    assert gamma_constant(ChannelParams(), EvalConfig()).value == pytest.approx(2 / LN2, abs=1e-10)
    # var_h = 4 var_g: each term is 4 log2(4) / 3 = 8/3
    assert gamma_constant(ChannelParams(0.0, 4.0, 1.0), EvalConfig()).value == pytest.approx(16 / 3, abs=1e-10)
    mc = gamma_constant(ChannelParams(), EvalConfig(method="mc", n_samples=400_000))
    assert abs(mc.value - 2 / LN2) < 4 * mc.std_error
