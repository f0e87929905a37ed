"""Closed-form Gaussian capacities, the saturation power and waterfilling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ValidationError
from .prob_core import binary_entropy_f

Convention = Literal["real", "complex"]

__all__ = [
    "SisoChannelSpec",
    "MimoChannelSpec",
    "WaterfillAllocation",
    "siso_capacity",
    "p_star",
    "waterfill",
    "waterfill_singular",
    "kkt_residual",
    "mimo_capacity",
]


def _check_convention(convention: str) -> float:
    if convention == "real":
        return 0.5
    if convention == "complex":
        return 1.0
    raise ValidationError(f"convention must be 'real' or 'complex', got {convention!r}")


def _check_power_noise(power: float, noise_var: float) -> None:
    if not np.isfinite(power) or power < 0:
        raise ValidationError(f"power must be >= 0, got {power!r}")
    if not np.isfinite(noise_var) or noise_var <= 0:
        raise ValidationError(f"noise variance must be > 0, got {noise_var!r}")


@dataclass(frozen=True)
class SisoChannelSpec:
    """Scalar AWGN channel with power budget ``power`` and noise ``noise_var``."""

    power: float
    noise_var: float = 1.0

    def __post_init__(self):
        _check_power_noise(self.power, self.noise_var)


@dataclass(frozen=True)
class MimoChannelSpec:
    """Full-rank ``N_R x N_T`` channel matrix with total power budget."""

    H: np.ndarray
    power: float
    noise_var: float = 1.0

    def __post_init__(self):
        _check_power_noise(self.power, self.noise_var)
        h = np.atleast_2d(np.asarray(self.H))
        if h.ndim != 2 or h.size == 0 or not np.all(np.isfinite(h)):
            raise ValidationError("H must be a finite, non-empty matrix")
        s = np.linalg.svd(h, compute_uv=False)
        if s[-1] <= 1e-12 * max(s[0], 1.0):
            raise ValidationError("H is rank deficient")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "H", h)

    @classmethod
    def from_singular_values(cls, values, power: float, noise_var: float = 1.0):
        return cls(np.diag(np.asarray(values, dtype=float)), power, noise_var)

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.H, compute_uv=False)


@dataclass(frozen=True)
class WaterfillAllocation:
    singular_values: np.ndarray
    powers: np.ndarray
    water_level: float


def siso_capacity(spec: SisoChannelSpec, convention: Convention = "real") -> float:
    """Capacity ``c ln(1 + P/sigma^2)`` with c = 1/2 (real) or 1 (complex)."""
    c = _check_convention(convention)
    return c * float(np.log1p(spec.power / spec.noise_var))


def p_star(mu: float, sigma2: float = 1.0) -> float:
    """Smallest power whose real-convention capacity equals f(mu)."""
    if not (0.0 <= mu <= 0.5):
        raise ValidationError(f"mu must lie in [0, 1/2], got {mu!r}")
    if not np.isfinite(sigma2) or sigma2 <= 0:
        raise ValidationError(f"noise variance must be > 0, got {sigma2!r}")
    return float(sigma2 * np.expm1(2.0 * binary_entropy_f(mu)))


def waterfill_singular(singular_values, power: float, noise_var: float = 1.0,
                       tol: float = 1e-12) -> WaterfillAllocation:
    """Maximise sum ln(1 + lam^2 p / sigma^2) subject to sum p <= power.

    The water level is bracketed by bisection on
    ``[0, sigma^2 / lam_min^2 + power]``; once the active set is fixed the
    level is recomputed in closed form so the budget is met to rounding.
    """
    _check_power_noise(power, noise_var)
    lam = np.sort(np.asarray(singular_values, dtype=float).ravel())[::-1]
    if lam.size == 0 or np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise ValidationError("singular values must be positive and finite")
    floors = noise_var / lam**2
    if power == 0:
        return WaterfillAllocation(lam, np.zeros_like(lam), float(floors[0]))
    lo, hi = 0.0, float(floors[-1] + power)
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if np.maximum(0.0, mid - floors).sum() > power:
            hi = mid
        else:
            lo = mid
    w = 0.5 * (lo + hi)
    active = floors < w
    w = float((power + floors[active].sum()) / active.sum())
    powers = np.maximum(0.0, w - floors)
    return WaterfillAllocation(lam, powers, w)


def waterfill(spec: MimoChannelSpec) -> WaterfillAllocation:
    return waterfill_singular(spec.singular_values, spec.power, spec.noise_var)


def kkt_residual(alloc: WaterfillAllocation, power: float, noise_var: float = 1.0) -> float:
    """Largest violation of the waterfilling optimality conditions."""
    floors = noise_var / alloc.singular_values**2
    p = alloc.powers
    w = alloc.water_level
    res = [abs(p.sum() - power), max(0.0, -p.min())]
    on = p > 0
    if on.any():
        res.append(np.max(np.abs(p[on] + floors[on] - w)))
    if (~on).any():
        res.append(max(0.0, np.max(w - floors[~on])))
    return float(max(res))


def mimo_capacity(spec: MimoChannelSpec, convention: Convention = "complex") -> float:
    """Sum of subchannel capacities under the waterfilling allocation."""
    c = _check_convention(convention)
    a = waterfill(spec)
    return c * float(np.sum(np.log1p(a.singular_values**2 * a.powers / spec.noise_var)))
