"""Finite-alphabet probability and information measures (natural log units).

All functions are pure.  Masses below ``ZERO_MASS`` are treated as exact
zeros inside entropy sums, so ``0 log 0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ZERO_MASS = 1e-15
NORM_TOL = 1e-12
RENORM_TOL = 1e-9

__all__ = [
    "Pmf",
    "JointPMF",
    "BinarySourceSpec",
    "entropy",
    "entropy_array",
    "binary_entropy_f",
    "binary_source",
    "mutual_information",
    "markov_joint",
    "cond_mi_markov",
    "ux_information",
]


def _checked_masses(arr, what: str) -> np.ndarray:
    a = np.array(arr, dtype=float)
    if a.size == 0:
        raise ValidationError(f"{what} is empty")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what} has non-finite entries")
    if np.any(a < 0):
        raise ValidationError(f"{what} has negative entries")
    s = a.sum()
    dev = abs(s - 1.0)
    if dev > RENORM_TOL:
        raise ValidationError(f"{what} sums to {s!r}, not 1")
    if dev > NORM_TOL:
        a = a / s
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on ``{0, ..., alphabet_size - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        a = _checked_masses(self.probs, "pmf")
        if a.ndim != 1:
            raise ValidationError("pmf must be one-dimensional")
        object.__setattr__(self, "probs", a)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class JointPMF:
    """Joint mass function P_XY stored as an ``(nx, ny)`` table."""

    table: np.ndarray

    def __post_init__(self):
        a = _checked_masses(self.table, "joint pmf")
        if a.ndim != 2:
            raise ValidationError("joint pmf must be a 2-D table")
        object.__setattr__(self, "table", a)

    @property
    def nx(self) -> int:
        return self.table.shape[0]

    @property
    def ny(self) -> int:
        return self.table.shape[1]

    @property
    def px(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.table.sum(axis=0)

    @property
    def channel(self) -> np.ndarray:
        """Row-stochastic P_{Y|X}; rows with zero mass become uniform."""
        px = self.px[:, None]
        safe = np.where(px > 0, px, 1.0)
        return np.where(px > 0, self.table / safe, 1.0 / self.ny)

    def cond_entropy_x_given_y(self) -> float:
        return entropy_array(self.table) - entropy_array(self.py)


@dataclass(frozen=True)
class BinarySourceSpec:
    """Doubly symmetric binary source with crossover ``mu`` in [0, 1/2]."""

    mu: float

    def __post_init__(self):
        if not (0.0 <= self.mu <= 0.5):
            raise ValidationError(f"mu must lie in [0, 1/2], got {self.mu!r}")


def entropy_array(p, axis=None) -> np.ndarray | float:
    """Entropy of (a batch of) unchecked mass arrays, summed over ``axis``."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > ZERO_MASS, p, 1.0)
    return -np.sum(np.where(p > ZERO_MASS, p * np.log(safe), 0.0), axis=axis)


def entropy(p: Pmf | np.ndarray) -> float:
    """Shannon entropy in nats.

    Examples
    --------
    >>> round(entropy(Pmf([0.9, 0.1])), 6)
    0.325083
    """
    if not isinstance(p, Pmf):
        p = Pmf(p)
    return float(max(entropy_array(p.probs), 0.0))


def binary_entropy_f(mu: float) -> float:
    """Binary entropy ``-(1-mu) ln(1-mu) - mu ln mu`` for ``mu`` in [0, 1]."""
    if not (0.0 <= mu <= 1.0) or not np.isfinite(mu):
        raise ValidationError(f"binary entropy needs mu in [0, 1], got {mu!r}")
    return float(entropy_array([mu, 1.0 - mu]))


def binary_source(spec: BinarySourceSpec | float) -> JointPMF:
    """Joint P_XY of a uniform bit sent through a BSC(mu)."""
    if not isinstance(spec, BinarySourceSpec):
        spec = BinarySourceSpec(float(spec))
    mu = spec.mu
    return JointPMF(np.array([[1 - mu, mu], [mu, 1 - mu]]) / 2.0)


def mutual_information(j: JointPMF | np.ndarray) -> float:
    """I(X;Y) = H(X) + H(Y) - H(X,Y) of a joint table."""
    if not isinstance(j, JointPMF):
        j = JointPMF(j)
    t = j.table
    val = entropy_array(t.sum(1)) + entropy_array(t.sum(0)) - entropy_array(t)
    return float(max(val, 0.0))


def _check_theta_channel(theta, channel) -> tuple[np.ndarray, np.ndarray]:
    th = np.asarray(theta, dtype=float)
    w = np.asarray(channel, dtype=float)
    if th.ndim != 2 or w.ndim != 2 or th.shape[1] != w.shape[0]:
        raise ValidationError(
            f"shape mismatch: theta {th.shape} vs channel {w.shape}")
    if np.any(w < 0) or not np.allclose(w.sum(1), 1.0, atol=1e-9):
        raise ValidationError("channel must be row-stochastic")
    return th, w


def markov_joint(theta, channel) -> np.ndarray:
    """P_UXY(u,x,y) = P_UX(u,x) P_{Y|X}(y|x) as a ``(|U|,|X|,|Y|)`` array."""
    th, w = _check_theta_channel(theta, channel)
    return th[:, :, None] * w[None, :, :]


def ux_information(theta, channel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (I(U;X), I(U;X|Y)) for a batch ``(..., |U|, |X|)`` of joints.

    No validation is done; used in the optimiser inner loops.
    """
    th = np.asarray(theta, dtype=float)
    w = np.asarray(channel, dtype=float)
    pu = th.sum(-1)
    px = th.sum(-2)
    h_ux = entropy_array(th, axis=(-2, -1))
    i_ux = entropy_array(pu, axis=-1) + entropy_array(px, axis=-1) - h_ux
    uxy = th[..., :, :, None] * w
    uy = uxy.sum(-2)
    xy = px[..., :, None] * w
    i_c = (entropy_array(uy, axis=(-2, -1)) + entropy_array(xy, axis=(-2, -1))
           - entropy_array(uxy, axis=(-3, -2, -1))
           - entropy_array(uy.sum(-2), axis=-1))
    return np.maximum(i_ux, 0.0), np.maximum(i_c, 0.0)


def cond_mi_markov(theta, channel) -> float:
    """I(U;X|Y) under the Markov chain U - X - Y."""
    th, w = _check_theta_channel(theta, channel)
    _checked_masses(th, "theta")
    return float(ux_information(th, w)[1])
