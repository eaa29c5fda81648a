"""Seedable sampling of reciprocal Rayleigh channel gains.

All randomness flows through :class:`RngStream`, a Philox (counter-based)
generator keyed by ``(seed, substream)``.  Shards of a Monte Carlo run are
derived with :meth:`RngStream.shard`, so the sample population depends only on
the seed and the shard layout, never on how shards are scheduled.

Complex gains are produced with the polar (Box-Muller) construction from two
uniforms: ``h = sqrt(-v ln U1) * exp(2j*pi*U2)`` is exactly CN(0, v), and
``|h|**2 = -v ln U1`` is exactly exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALGORITHM = "philox4x64-10"


@dataclass(frozen=True)
class ChannelParams:
    """Fading statistics of the legitimate and eavesdropper links.

    ``rho`` is the correlation coefficient between the forward gain ``h_AB``
    and the reverse gain ``h_BA``.  ``var_h`` and ``var_g`` are the variances
    of the legitimate and eavesdropper gains.
    """

    rho: float = 0.0
    var_h: float = 1.0
    var_g: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho!r}")
        if not (self.var_h > 0 and self.var_g > 0):
            raise ValueError("gain variances must be strictly positive")


@dataclass
class GainSample:
    """One draw (or a vector of draws) of the four channel gains."""

    h_ab: complex | np.ndarray
    h_ba: complex | np.ndarray
    g_ae: complex | np.ndarray
    g_be: complex | np.ndarray


class RngStream:
    """Single-consumer random stream identified by ``(seed, substream)``.

    Two streams built with the same seed, substream and shard path produce
    identical sequences.  Do not share one instance between threads; derive
    a shard per worker instead.
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int, substream: int = 0, _path: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if substream < 0:
            raise ValueError("substream index must be non-negative")
        self.seed = int(seed)
        self.substream = int(substream)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.substream, *self._path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, substream={self.substream}, path={self._path})"

    def shard(self, index: int) -> "RngStream":
        """Independent child stream number ``index`` (fresh, not yet consumed)."""
        return RngStream(self.seed, self.substream, (*self._path, int(index)))

    def uniform(self, size=None):
        """Uniform draws on the half-open interval (0, 1]."""
        return 1.0 - self._gen.random(size)


def sample_exp_magnitude(stream: RngStream, size=None):
    """Exp(1) variates as ``-ln(U)``, the law of ``|h|**2`` for unit CN gains."""
    return -np.log(stream.uniform(size))


def _complex_gaussian(stream: RngStream, var: float, size):
    r = np.sqrt(var * -np.log(stream.uniform(size)))
    theta = 2.0 * np.pi * stream.uniform(size)
    return r * np.exp(1j * theta)


def sample_gain_tuple(params: ChannelParams, stream: RngStream, size=None) -> GainSample:
    """Draw ``(h_ab, h_ba, g_ae, g_be)``.

    ``h_ba = rho * h_ab + sqrt(1 - rho**2) * w`` with ``w`` an independent copy
    of ``h_ab``; the eavesdropper gains are independent of everything else.
    With ``size=None`` scalars are returned, otherwise arrays of that shape.
    """
    h_ab = _complex_gaussian(stream, params.var_h, size)
    w = _complex_gaussian(stream, params.var_h, size)
    h_ba = params.rho * h_ab + np.sqrt(1.0 - params.rho**2) * w
    g_ae = _complex_gaussian(stream, params.var_g, size)
    g_be = _complex_gaussian(stream, params.var_g, size)
    if size is None:
        h_ab, h_ba, g_ae, g_be = (complex(v) for v in (h_ab, h_ba, g_ae, g_be))
    return GainSample(h_ab, h_ba, g_ae, g_be)
