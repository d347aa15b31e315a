"""Normal CDF and quantile: accuracy against scipy, shape properties."""

import math

import pytest

from ppsv._normal import norm_cdf, norm_quantile

scipy_special = pytest.importorskip("scipy.special")


def test_quantile_matches_scipy_to_rational_approx_accuracy():
    # the rational approximation is documented at ~1.15e-9 relative error
    worst = 0.0
    n = 20011
    for i in range(1, n):
        p = i / n
        ref = float(scipy_special.ndtri(p))
        got = norm_quantile(p)
        err = abs(got - ref) / max(1e-12, abs(ref))
        worst = max(worst, err)
    assert worst < 2e-9


def test_quantile_tail_accuracy():
    for p in (1e-12, 1e-9, 1e-6, 1e-3, 0.02, 0.98, 0.999, 1 - 1e-9):
        ref = float(scipy_special.ndtri(p))
        assert norm_quantile(p) == pytest.approx(ref, rel=5e-9, abs=1e-9)


def test_quantile_is_monotone():
    prev = -math.inf
    for i in range(1, 4000):
        x = norm_quantile(i / 4000)
        assert x >= prev
        prev = x


def test_quantile_symmetry():
    for p in (0.01, 0.1, 0.25, 0.4):
        assert norm_quantile(p) == pytest.approx(-norm_quantile(1.0 - p), abs=1e-9)
    assert norm_quantile(0.5) == pytest.approx(0.0, abs=1e-12)


def test_quantile_clamps_degenerate_inputs():
    assert math.isfinite(norm_quantile(0.0))
    assert math.isfinite(norm_quantile(1.0))
    assert norm_quantile(0.0) < -37.0
    assert norm_quantile(1.0) > 8.0


def test_cdf_matches_scipy():
    for x in (-8.0, -3.5, -1.0, -0.1, 0.0, 0.3, 1.0, 4.2, 7.5):
        assert norm_cdf(x) == pytest.approx(float(scipy_special.ndtr(x)), rel=1e-13, abs=1e-300)


def test_cdf_quantile_round_trip():
    for p in (1e-6, 0.01, 0.2, 0.5, 0.77, 0.999):
        assert norm_cdf(norm_quantile(p)) == pytest.approx(p, rel=1e-8, abs=1e-12)
