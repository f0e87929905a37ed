"""Lower bound on correlation-assisted secure identification over a
Gaussian wiretap channel, and the gain over randomized encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel_capacity import Convention, SisoChannelSpec, siso_capacity
from .cr_optimizer import OptimizerConfig, solve_cr
from .errors import ValidationError
from .prob_core import JointPMF

__all__ = [
    "WiretapSpec",
    "SchemeAccounting",
    "SecureIdBound",
    "secrecy_capacity",
    "secure_id_lower_bound",
    "randomized_encoding_capacity",
    "identification_gain",
    "scheme_accounting",
]

SECRECY_ASSUMPTION = "degraded Gaussian wiretap: C_S = max(0, C(P/s2) - C(P/s2_eve))"


@dataclass(frozen=True)
class WiretapSpec:
    power: float
    sigma2_main: float = 1.0
    sigma2_eve: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.power) and self.power >= 0):
            raise ValidationError("power must be >= 0")
        if not (self.sigma2_main > 0 and self.sigma2_eve > 0):
            raise ValidationError("noise variances must be > 0")

    @property
    def main(self) -> SisoChannelSpec:
        return SisoChannelSpec(self.power, self.sigma2_main)

    @property
    def eve(self) -> SisoChannelSpec:
        return SisoChannelSpec(self.power, self.sigma2_eve)


@dataclass(frozen=True)
class SchemeAccounting:
    n: int
    m: int
    tag_block: int
    wiretap_code_size: int


@dataclass(frozen=True)
class SecureIdBound:
    bound: float | None
    applicable: bool
    secrecy_capacity: float
    assumption: str = SECRECY_ASSUMPTION


def secrecy_capacity(spec: WiretapSpec, convention: Convention = "real") -> float:
    """Difference of main and eavesdropper capacities, floored at 0."""
    if spec.sigma2_eve <= spec.sigma2_main:
        return 0.0
    return max(0.0, siso_capacity(spec.main, convention) - siso_capacity(spec.eve, convention))


def secure_id_lower_bound(source: JointPMF, spec: WiretapSpec,
                          config: OptimizerConfig = OptimizerConfig()) -> SecureIdBound:
    """CR capacity over the main channel, reported only when C_S > 0."""
    cs = secrecy_capacity(spec)
    if cs <= 0:
        return SecureIdBound(None, False, cs)
    return SecureIdBound(solve_cr(source, spec.main, config, with_gap=False).value, True, cs)


def randomized_encoding_capacity(spec: WiretapSpec) -> float:
    """Reference curve: capacity of the legitimate channel, real convention."""
    return siso_capacity(spec.main, "real")


def identification_gain(source: JointPMF, spec: WiretapSpec,
                        config: OptimizerConfig = OptimizerConfig(),
                        bound: SecureIdBound | None = None) -> float:
    """Bound minus the randomized-encoding capacity, clipped at 0."""
    if bound is None:
        bound = secure_id_lower_bound(source, spec, config)
    if not bound.applicable:
        raise ValidationError("secrecy capacity is zero; the bound does not apply")
    return max(0.0, bound.bound - randomized_encoding_capacity(spec))


def scheme_accounting(n: int, eps_id: float) -> SchemeAccounting:
    """Block lengths of the concatenated scheme and size of the tag code."""
    if int(n) < 1:
        raise ValidationError("n must be >= 1")
    if not eps_id > 0:
        raise ValidationError("eps_id must be > 0")
    r = math.isqrt(int(n))
    tag = r if r * r == n else r + 1
    return SchemeAccounting(int(n), int(n) + tag, tag, math.ceil(math.exp(math.sqrt(n) * eps_id)))
