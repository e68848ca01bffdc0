import math

import numpy as np
import pytest
from scipy.integrate import quad

import gsee
from gsee import filters as flt

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Mollifier
# ---------------------------------------------------------------------------


def test_mollifier_at_edges_is_inverse_norm():
    m = flt.build_mollifier(20, 0.2)
    for x in (0.2, -0.2):
        assert abs(flt.mollifier_value(m, x) * m.normalization - 1.0) < 1e-12


def test_mollifier_bounded_outside_window():
    m = flt.build_mollifier(20, 0.2)
    xs = np.linspace(0.2, math.pi, 2000)
    vals = np.abs(flt.mollifier_value(m, np.concatenate([xs, -xs])))
    # Strict statement of the outside bound, plus the weaker 2/N variant
    # the convolution error argument actually consumes.
    assert np.max(vals) <= (1.0 + 1e-10) / m.normalization
    assert np.max(vals) <= 2.0 / m.normalization


def test_mollifier_peak_value():
    d, delta = 20, 0.2
    m = flt.build_mollifier(d, delta)
    peak_arg = 1.0 + 2.0 * math.tan(delta / 2.0) ** 2
    expected = math.cosh(d * math.acosh(peak_arg)) / m.normalization
    assert abs(flt.mollifier_value(m, 0.0) - expected) < 1e-10 * expected
    # peaked-bump shape: maximum at 0, decaying through the window edge
    xs = np.linspace(0.0, math.pi, 400)
    vals = flt.mollifier_value(m, xs)
    assert vals[0] == np.max(vals)
    assert vals[0] > 10.0 * abs(vals[-1])


def test_mollifier_validity_range():
    bad = 2.0 * math.atan(1.0 - 1.0 / math.sqrt(2.0)) + 0.05
    with pytest.raises(flt.FilterError):
        flt.build_mollifier(16, bad)


def test_mollifier_unit_mass_quadrature():
    m = flt.build_mollifier(24, 0.15)
    val, _ = quad(lambda x: flt.mollifier_value(m, x), -math.pi, math.pi,
                  points=[-0.15, 0.0, 0.15], limit=200)
    assert abs(val - 1.0) < 1e-10


def test_mollifier_coeffs_match_adaptive_quadrature():
    d, delta = 20, 0.2
    m = flt.build_mollifier(d, delta)
    coeffs = flt.mollifier_fourier_coeffs(d, delta)
    for k in (0, 1, 2, 5, 11, 20):
        ref, _ = quad(
            lambda x: flt.mollifier_value(m, x) * math.cos(k * x),
            -math.pi, math.pi, points=[-delta, 0.0, delta], limit=200,
        )
        assert abs(coeffs[d + k] - ref / SQRT_2PI) < 1e-10


def test_mollifier_coeffs_basics():
    d, delta = 32, 0.1
    coeffs = flt.mollifier_fourier_coeffs(d, delta)
    assert abs(coeffs[d] - 1.0 / SQRT_2PI) < 1e-13
    assert np.max(np.abs(coeffs.imag)) < 1e-13
    assert np.max(np.abs(coeffs - np.conj(coeffs[::-1]))) < 1e-13
    m = flt.build_mollifier(d, delta)
    cap = (1.0 + 4.0 * math.pi / m.normalization) / SQRT_2PI
    assert np.max(np.abs(coeffs)) <= cap + 1e-12


def test_mollifier_coeffs_quadrature_exactness():
    d, delta = 48, 0.08
    base = flt.mollifier_fourier_coeffs(d, delta)
    doubled = flt.mollifier_fourier_coeffs(d, delta, n_grid=2 * flt._grid_size(d))
    assert np.max(np.abs(base - doubled)) < 1e-12


# ---------------------------------------------------------------------------
# Step-function coefficients
# ---------------------------------------------------------------------------


def test_heaviside_coefficients():
    assert flt.heaviside_fourier_coeff(0) == pytest.approx(math.sqrt(math.pi / 2.0))
    assert flt.heaviside_fourier_coeff(2) == 0.0
    assert flt.heaviside_fourier_coeff(4) == 0.0
    assert abs(flt.heaviside_fourier_coeff(1) - (-2.0j / SQRT_2PI)) < 1e-15
    assert abs(flt.heaviside_fourier_coeff(-3) - np.conj(flt.heaviside_fourier_coeff(3))) < 1e-15


# ---------------------------------------------------------------------------
# Built filters
# ---------------------------------------------------------------------------


def test_filter_structure():
    f = flt.build_filter(64, 0.1)
    assert abs(f.coeff(0) - 0.5) < 1e-13
    js = f.js
    even = (js % 2 == 0) & (js != 0)
    assert np.max(np.abs(f.coeffs[even]), initial=0.0) < 1e-12
    assert np.max(np.abs(f.coeffs - np.conj(f.coeffs[::-1]))) < 1e-14
    assert f.l1_norm > 0


def test_filter_certified_band_error():
    f = flt.build_filter(200, 0.05)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0.05, math.pi - 0.05, 300)
    xs = np.concatenate([xs, -xs])
    h = (xs >= 0).astype(float)
    vals = flt.filter_values(f, xs)
    # random in-band points obey the analytic certificate; the measured
    # sup-norm is attained at the band edge and bounds the dense grid.
    assert np.max(np.abs(vals - h)) <= max(f.eps_bound, f.eps_achieved * (1 + 1e-9))
    edge = flt.filter_value(f, 0.05)
    assert abs(edge - 1.0) <= f.eps_achieved + 1e-15


def test_filter_global_range_bound():
    f = flt.build_filter(150, 0.08)
    xs = np.linspace(-math.pi, math.pi, 10_000)
    vals = flt.filter_values(f, xs)
    tol = 1e-10
    assert np.min(vals) >= -f.eps_bound / 2.0 - tol
    assert np.max(vals) <= 1.0 + f.eps_bound + tol


def test_filter_decay_bound_exact():
    for d, delta in [(64, 0.1), (200, 0.05), (800, 0.02), (400, 0.01)]:
        f = flt.build_filter(d, delta)
        js = f.js[f.js != 0]
        mags = np.abs(f.coeffs[f.js != 0])
        assert np.all(mags * np.pi * np.abs(js) <= 1.0 + f.eps_bound + 1e-12)


def test_filter_value_against_convolution_quadrature():
    # Independent route: F(x) = integral of the mollifier over (x - pi, x],
    # where the step is 1, computed by adaptive quadrature.
    d, delta = 40, 0.15
    f = flt.build_filter(d, delta)
    m = flt.build_mollifier(d, delta)

    def oracle(x):
        total = 0.0
        lo, hi = x - math.pi, x
        # integrate over [lo, hi] with the peak region isolated; wrap the
        # mollifier periodically.
        def g(y):
            y = (y + math.pi) % (2.0 * math.pi) - math.pi
            return flt.mollifier_value(m, y)

        pts = sorted(
            p for p in (-delta, 0.0, delta, lo + 2 * math.pi, hi - 2 * math.pi) if lo < p < hi
        )
        val, _ = quad(g, lo, hi, points=pts or None, limit=400)
        return val

    rng = np.random.default_rng(3)
    for x in rng.uniform(delta, math.pi - delta, 6):
        assert abs(flt.filter_value(f, x) - oracle(x)) < 1e-8
        assert abs(flt.filter_value(f, -x) - oracle(-x)) < 1e-8


def test_filter_value_deep_in_band():
    f = flt.build_filter(300, 0.02)
    assert abs(flt.filter_value(f, math.pi / 2.0) - 1.0) <= f.eps_achieved + 1e-12
    assert abs(flt.filter_value(f, -math.pi / 2.0)) <= f.eps_achieved + 1e-12


def test_filter_values_matches_horner():
    f = flt.build_filter(120, 0.06)
    xs = np.linspace(-3.0, 3.0, 17)
    a = flt.filter_values(f, xs)
    b = np.array([flt.filter_value(f, x) for x in xs])
    assert np.max(np.abs(a - b)) < 1e-11


def test_l1_norm_grows_logarithmically():
    # along the d = 4/delta family the l1 norm grows like log d: successive
    # doublings add a bounded increment and the ratio stays near 1.
    degrees = [256, 512, 1024, 2048, 4096, 8192]
    norms = [flt.build_filter(d, 4.0 / d).l1_norm for d in degrees]
    for a, b in zip(norms, norms[1:]):
        assert b > a
        assert b / a < 1.6
    increments = np.diff(norms)
    assert np.all(increments < 1.0)
    assert np.all(increments > 0.05)


def test_eps_achieved_monotone_in_degree():
    delta = 0.05
    eps = [flt.build_filter(d, delta).eps_achieved for d in (64, 96, 128, 192, 256, 384)]
    assert np.all(np.diff(eps) <= 1e-12)


# ---------------------------------------------------------------------------
# Degree selection
# ---------------------------------------------------------------------------


def test_certified_degree_definitional():
    for delta, eps in [(0.05, 0.1), (0.02, 0.01)]:
        d = flt.certified_degree(delta, eps)
        built = flt.build_filter(d, delta)
        assert built.eps_achieved <= eps
        if d > 8:
            below = flt.build_filter(d - 1, delta)
            assert below.eps_achieved > eps


def test_certified_degree_scaling_in_delta():
    ds = [flt.certified_degree(delta, 0.01) for delta in (0.04, 0.02, 0.01)]
    assert ds[0] < ds[1] < ds[2]
    for a, b in zip(ds, ds[1:]):
        assert 1.6 <= b / a <= 2.6


def test_certified_degree_grows_with_log_accuracy():
    d_loose = flt.certified_degree(0.02, 0.1)
    d_tight = flt.certified_degree(0.02, 0.001)
    assert d_tight > d_loose
    assert d_tight < 6 * d_loose


def test_certified_degree_validates():
    with pytest.raises(flt.FilterError):
        flt.certified_degree(0.7, 0.01)
    with pytest.raises(flt.FilterError):
        flt.certified_degree(0.01, 1.5)


def test_heuristic_degree():
    assert flt.heuristic_degree(0.01) == 400
    assert flt.heuristic_degree(2e-4) == 20000


def test_filter_roundtrip_bit_identical(tmp_path):
    f = flt.build_filter(90, 0.07)
    path = tmp_path / "filter.txt"
    flt.save_filter(f, path)
    g = flt.load_filter(path)
    assert g.degree == f.degree
    assert g.smearing == f.smearing
    assert g.eps_achieved == f.eps_achieved
    assert g.eps_bound == f.eps_bound
    assert np.array_equal(g.coeffs, f.coeffs)
    assert np.array_equal(g.theta, f.theta)
    assert g.l1_norm == f.l1_norm
