"""Standard-normal CDF and quantile used by the truncated-Gaussian sampler.

The quantile is a piecewise rational approximation (central region in
``p - 1/2``, tails in ``sqrt(-2 log p)``) with relative error below ~1.2e-9,
which is far under the statistical resolution of any Monte Carlo use here.
It is written as a plain scalar function on purpose: the numba backend
compiles this exact function, the scalar reference sampler calls it
directly, and the vectorized numpy fallback mirrors it term for term, so all
three produce bitwise-identical doubles (tests enforce this, and accuracy is
checked against an independent reference).
"""

from __future__ import annotations

import math

# Domain split points for the rational approximation.
_P_LOW = 0.02425
_P_HIGH = 1.0 - _P_LOW

# Central-region numerator/denominator coefficients.
_A = (
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
)
_B = (
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
)

# Tail-region coefficients.
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
)

# Clamp keeps log() off 0 and the upper branch off exactly 1; the probability
# mass involved is below 1e-16 and both backends clamp identically.
_P_MIN = 1e-300
_P_MAX = 1.0 - 1e-16


def norm_cdf(x: float) -> float:
    """Phi(x) via erfc; used host-side to precompute truncation bounds."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_quantile(p: float) -> float:
    """Inverse of Phi on (0, 1).  Scalar; numba-compilable as-is."""
    if p < _P_MIN:
        p = _P_MIN
    if p > _P_MAX:
        p = _P_MAX
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (
            ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        ) / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > _P_HIGH:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(
            ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        ) / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (
        ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
    ) * q / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
