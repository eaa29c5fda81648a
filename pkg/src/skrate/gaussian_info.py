"""Mutual information of jointly circularly-symmetric complex Gaussians.

The determinant route (:func:`gaussian_mi` on a :class:`CovarianceModel`) is
kept deliberately generic; the closed forms at the bottom of the module are
what the rate formulas use, and the tests check one against the other.

All values are in bits.  For complex circular Gaussians
``I(A; B) = log2(det S_A * det S_B / det S_AB)`` with no factor 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
EIG_CLAMP_TOL = 1e-12
SINGULAR_TOL = 1e-13
COND_WARN = 1e12


class NearSingularWarning(RuntimeWarning):
    """Joint covariance is ill-conditioned; the MI value may be inaccurate."""


@dataclass(frozen=True)
class CovarianceModel:
    """Labelled Hermitian PSD covariance of a set of complex scalars."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        labels = tuple(self.labels)
        if m.shape != (len(labels), len(labels)):
            raise ValueError("matrix shape does not match the number of labels")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate symbol labels")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
            raise ValueError("covariance matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        if m.size:
            w, v = np.linalg.eigh(m)
            if w.min() < -EIG_CLAMP_TOL * scale:
                raise ValueError(f"covariance matrix is not PSD (min eigenvalue {w.min():.3e})")
            if w.min() < 0:
                m = (v * np.clip(w, 0.0, None)) @ v.conj().T
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", m)

    def index(self, symbols: Iterable[str]) -> list[int]:
        out = []
        for s in symbols:
            try:
                out.append(self.labels.index(s))
            except ValueError:
                raise KeyError(f"unknown symbol {s!r}") from None
        return out

    def sub(self, symbols: Sequence[str]) -> np.ndarray:
        idx = self.index(symbols)
        return self.matrix[np.ix_(idx, idx)]


def _logdet2(m: np.ndarray) -> float:
    # slogdet factorizes with partial pivoting (LAPACK getrf)
    sign, logdet = np.linalg.slogdet(m)
    return float(logdet) / math.log(2.0)


def gaussian_mi(model: CovarianceModel, group_a: Iterable[str], group_b: Iterable[str]) -> float:
    """I(A; B) in bits between two disjoint groups of symbols of ``model``.

    Symbols with zero variance are constants and are dropped.  If the joint
    covariance is singular while both marginals are not, ``math.inf`` is
    returned.  An ill-conditioned joint (condition number above 1e12) raises
    a :class:`NearSingularWarning`.
    """
    a, b = list(group_a), list(group_b)
    if set(a) & set(b):
        raise ValueError("groups must be disjoint")
    model.index(a + b)  # raises KeyError on unknown symbols

    diag = {s: model.matrix[i, i].real for s, i in zip(model.labels, range(len(model.labels)))}
    a = [s for s in a if diag[s] > 0]
    b = [s for s in b if diag[s] > 0]
    if not a or not b:
        return 0.0

    joint = model.sub(a + b)
    d = np.sqrt(np.real(np.diag(joint)))
    corr = joint / np.outer(d, d)
    eig = np.linalg.eigvalsh(corr)
    na = len(a)
    eig_a = np.linalg.eigvalsh(corr[:na, :na])
    eig_b = np.linalg.eigvalsh(corr[na:, na:])
    if eig_a.min() <= SINGULAR_TOL or eig_b.min() <= SINGULAR_TOL:
        raise ValueError("a marginal covariance is singular; remove redundant symbols")
    if eig.min() <= SINGULAR_TOL:
        return math.inf
    if eig.max() / eig.min() > COND_WARN:
        warnings.warn("near-singular joint covariance", NearSingularWarning, stacklevel=2)

    # correlation normalization cancels between numerator and denominator
    value = _logdet2(corr[:na, :na]) + _logdet2(corr[na:, na:]) - _logdet2(corr)
    return max(value, 0.0)


def lmmse_alpha(p1: float) -> float:
    """Estimation coefficient ``P1 / (1 + P1)`` of a single pilot of power ``p1``."""
    if p1 < 0:
        raise ValueError("pilot power must be non-negative")
    if math.isinf(p1):
        return 1.0
    return p1 / (1.0 + p1)


@dataclass(frozen=True)
class EstimationChain:
    """Parameters of the training/quantization chain.

    ``alpha`` is the LMMSE coefficient, ``q1`` the variance of the Gaussian
    noise quantizing the channel estimates, ``q2`` the variance of the noise
    quantizing the received source symbols.
    """

    alpha: float
    q1: float = 0.0
    q2: float = 0.0

    @classmethod
    def from_pilot(cls, p1: float, q1: float = 0.0, q2: float = 0.0) -> "EstimationChain":
        return cls(lmmse_alpha(p1), q1, q2)


TRAINING_LABELS = ("h_AB", "h_BA", "hh_AB", "hh_BA")
QUANTIZED_LABELS = TRAINING_LABELS + ("u_AB", "u_BA")


def _training_matrix(rho: float, alpha: float) -> np.ndarray:
    a = alpha
    return np.array(
        [
            [1.0, rho, a, a * rho],
            [rho, 1.0, a * rho, a],
            [a, a * rho, a, a * a * rho],
            [a * rho, a, a * a * rho, a],
        ],
        dtype=complex,
    )


def build_training_chain(rho: float, p1: float) -> CovarianceModel:
    """Joint covariance of ``(h_AB, h_BA, hh_AB, hh_BA)``.

    ``hh = alpha * h + e`` with ``e ~ CN(0, alpha (1 - alpha))`` independent of
    the gains and of the other estimate's error.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    return CovarianceModel(TRAINING_LABELS, _training_matrix(rho, lmmse_alpha(p1)))


def build_quantized_chain(rho: float, p1: float, q1: float) -> CovarianceModel:
    """Training chain extended with ``u = hh + q``, ``q ~ CN(0, q1)`` on each side."""
    if q1 < 0:
        raise ValueError("q1 must be non-negative")
    base = build_training_chain(rho, p1).matrix
    m = np.zeros((6, 6), dtype=complex)
    m[:4, :4] = base
    # u_X = hh_X + q_X with q independent of everything
    m[4, :4] = base[2]
    m[5, :4] = base[3]
    m[:4, 4] = base[:, 2]
    m[:4, 5] = base[:, 3]
    m[4, 4] = base[2, 2] + q1
    m[5, 5] = base[3, 3] + q1
    m[4, 5] = m[5, 4] = base[2, 3]
    return CovarianceModel(QUANTIZED_LABELS, m)


def sigma_sq_residual(alpha: float, q1: float) -> float:
    """Residual variance ``1 - alpha**2 / (q1 + alpha)`` of a gain given its quantized estimate."""
    if not 0.0 <= alpha <= 1.0 or q1 < 0:
        raise ValueError("need alpha in [0, 1] and q1 >= 0")
    if alpha == 0.0:
        return 1.0
    return 1.0 - alpha * alpha / (q1 + alpha)


def sigma_sq_from_pilot(p1: float, q1: float) -> float:
    """:func:`sigma_sq_residual` evaluated from the pilot power.

    Written as ``(q1 + alpha (1 - alpha)) / (q1 + alpha)`` with ``1 - alpha =
    1/(1 + p1)`` so that it stays accurate when ``alpha`` is close to 1.
    """
    if p1 < 0 or q1 < 0:
        raise ValueError("need p1 >= 0 and q1 >= 0")
    if p1 == 0.0:
        return 1.0
    alpha = lmmse_alpha(p1)
    return (q1 + alpha / (1.0 + p1)) / (q1 + alpha)


# Closed forms (bits).  Arguments follow the estimation chain notation.

def mi_estimates(alpha: float, rho: float) -> float:
    """I(hh_AB; hh_BA) = -log2(1 - alpha^2 rho^2)."""
    return -math.log2(1.0 - (alpha * rho) ** 2)


def mi_gains(rho: float) -> float:
    """I(h_AB; h_BA) = -log2(1 - rho^2)."""
    return -math.log2(1.0 - rho * rho)


def mi_quantized_same(alpha: float, q1: float) -> float:
    """I(u_AB; hh_AB) = log2(1 + alpha / q1)."""
    if alpha == 0.0:
        return 0.0
    if q1 == 0.0:
        return math.inf
    return math.log2(1.0 + alpha / q1)


def mi_quantized_cross(alpha: float, rho: float, q1: float) -> float:
    """I(u_AB; hh_BA) = -log2(1 - alpha^2 rho^2 / (1 + q1/alpha))."""
    if alpha == 0.0:
        return 0.0
    return -math.log2(1.0 - (alpha * rho) ** 2 / (1.0 + q1 / alpha))


def mi_quantized_pair(alpha: float, rho: float, q1: float) -> float:
    """I(u_AB; u_BA) = -log2(1 - alpha^2 rho^2 / (1 + q1/alpha)^2)."""
    if alpha == 0.0:
        return 0.0
    return -math.log2(1.0 - (alpha * rho) ** 2 / (1.0 + q1 / alpha) ** 2)


def mi_quantized_gap(alpha: float, rho: float, q1: float) -> float:
    """I(u_AB; hh_AB) - I(u_AB; hh_BA) = log2(1 + alpha (1 - alpha^2 rho^2) / q1)."""
    if alpha == 0.0:
        return 0.0
    if q1 == 0.0:
        return math.inf
    return math.log2(1.0 + alpha * (1.0 - (alpha * rho) ** 2) / q1)


def channel_key_rate(alpha: float, rho: float, q1: float) -> float:
    """Key rate (bits per block) distilled from the quantized channel estimates.

    ``I(u_AB; hh_BA) + I(u_BA; hh_AB) - I(u_AB; u_BA)``; at ``q1 = 0`` this
    collapses to ``-log2(1 - alpha^2 rho^2)``.
    """
    if alpha == 0.0:
        return 0.0
    x = (alpha * rho) ** 2
    k = 1.0 + q1 / alpha
    return -2.0 * math.log2(1.0 - x / k) + math.log2(1.0 - x / (k * k))
