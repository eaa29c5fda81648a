import numpy as np
import pytest

from skrate.fading import ChannelParams, RngStream, sample_exp_magnitude, sample_gain_tuple


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(rho=1.0)
    with pytest.raises(ValueError):
        ChannelParams(rho=-0.1)
    with pytest.raises(ValueError):
        ChannelParams(var_g=0.0)


def test_stream_reproducible():
    a = RngStream(5, 2).uniform(100)
    b = RngStream(5, 2).uniform(100)
    c = RngStream(5, 3).uniform(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(RngStream(5).shard(4).uniform(10), RngStream(5).shard(4).uniform(10))


def test_uniform_excludes_zero():
    u = RngStream(0).uniform(10**6)
    assert u.min() > 0.0 and u.max() <= 1.0


def test_exp_magnitude_moments():
    x = sample_exp_magnitude(RngStream(1), 10**6)
    assert abs(x.mean() - 1) < 5e-3
    assert abs(x.var() - 1) < 2e-2


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.95])
def test_gain_correlation(rho):
    g = sample_gain_tuple(ChannelParams(rho, var_h=2.0), RngStream(3), size=400_000)
    corr = np.mean(g.h_ab * np.conj(g.h_ba)) / 2.0
    assert abs(corr - rho) < 0.01
    assert abs(np.mean(np.abs(g.h_ab) ** 2) - 2.0) < 0.02
    assert abs(np.mean(np.abs(g.h_ba) ** 2) - 2.0) < 0.02
    # eavesdropper gains independent of the legitimate pair
    assert abs(np.mean(g.g_ae * np.conj(g.h_ab))) < 0.01
    assert abs(np.mean(g.g_ae * np.conj(g.g_be))) < 0.01
    # circular symmetry: no pseudo-covariance
    assert abs(np.mean(g.h_ab**2)) < 0.02


def test_scalar_sample():
    g = sample_gain_tuple(ChannelParams(0.3), RngStream(0))
    assert isinstance(g.h_ab, complex) and isinstance(g.g_be, complex)
