"""Non-linear energy harvesting model: logistic rectifier curve, its exact
inversion, and the constant used by the log-domain harvest constraint.

All powers in this module are in microwatts.
"""

import math
from dataclasses import dataclass


class UnattainableDemandError(ValueError):
    """Requested harvest target at or above the rectifier saturation level."""


@dataclass(frozen=True)
class EHParams:
    """Rectifier circuit parameters.

    a    saturation-scale numerator (microwatt)
    c    inflection input power (microwatt)
    rho  steepness (1/microwatt)

    The zero-input/zero-output normalizer xi = 1/(1 + exp(rho*c)) is derived
    on demand and never stored, so it cannot go stale.
    """

    a: float = 20.0
    c: float = 6400.0
    rho: float = 0.003

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0 and self.rho > 0):
            raise ValueError(f"EH parameters must be positive, got {self}")

    @property
    def xi(self) -> float:
        # 1/(1+exp(rho*c)); shares _sigmoid with the forward curve so the
        # zero-input response cancels exactly in floating point
        return _sigmoid(-self.rho * self.c)


def _sigmoid(y: float) -> float:
    """Overflow-safe logistic 1/(1+exp(-y))."""
    if y >= 0:
        return 1.0 / (1.0 + math.exp(-y))
    e = math.exp(y)
    return e / (1.0 + e)


def harvested_power(p_rf: float, params: EHParams) -> float:
    """Harvested power (microwatt) for received RF power ``p_rf`` (microwatt).

    Normalized logistic: (lam - a*xi) / (1 - xi) with
    lam = a / (1 + exp(-rho*(p_rf - c))).  Range is [0, a); exactly 0 at 0.
    """
    if p_rf < 0:
        raise ValueError(f"received RF power must be nonnegative, got {p_rf}")
    xi = params.xi
    lam = params.a * _sigmoid(params.rho * (p_rf - params.c))
    value = (lam - params.a * xi) / (1.0 - xi)
    # mathematically in [0, a); keep rounding in deep saturation from touching a
    return min(max(value, 0.0), math.nextafter(params.a, 0.0))


def harvest_constraint_constant(e_req: float, params: EHParams) -> float:
    """Constant pairing with exp(-rho * P_rf) in the exponential-form harvest
    constraint: the constraint holds iff this value >= exp(-rho * P_rf).
    """
    if e_req < 0:
        raise ValueError(f"harvest target must be nonnegative, got {e_req}")
    if e_req >= params.a:
        raise UnattainableDemandError(
            f"harvest target {e_req} uW is unattainable (saturation {params.a} uW)"
        )
    xi = params.xi
    lam_hat = e_req * (1.0 - xi) + params.a * xi
    return (params.a / lam_hat - 1.0) * math.exp(-params.rho * params.c)


def required_rf_power(e_req: float, params: EHParams) -> float:
    """Exact inverse of :func:`harvested_power`.

    Returns the received RF power P (microwatt) with harvested_power(P) == e_req,
    via P = c - ln((a - lam_hat)/lam_hat)/rho where lam_hat = e_req*(1-xi) + a*xi.
    Identical to -ln(C)/rho with C = harvest_constraint_constant(e_req).
    Raises UnattainableDemandError for e_req >= a.
    """
    if e_req < 0:
        raise ValueError(f"harvest target must be nonnegative, got {e_req}")
    if e_req >= params.a:
        raise UnattainableDemandError(
            f"harvest target {e_req} uW is unattainable (saturation {params.a} uW)"
        )
    xi = params.xi
    lam_hat = e_req * (1.0 - xi) + params.a * xi
    p = params.c - math.log((params.a - lam_hat) / lam_hat) / params.rho
    return max(p, 0.0)
