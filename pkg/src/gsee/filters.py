"""Approximate-Heaviside Fourier filters built by mollifying the periodic
step function with a Chebyshev-based smeared delta.

Coefficient convention: a built filter stores F_hat_j such that
F(x) = sum_{|j|<=d} F_hat_j e^{ijx} directly, i.e. no 1/sqrt(2pi)
prefactor at evaluation time.  All bounds quoted on the filter are
translated into this convention once, at build time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LN2 = math.log(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# tan(delta/2) <= 1 - 1/sqrt(2) keeps the mollifier's normalization bound valid.
TAN_HALF_LIMIT = 1.0 - 1.0 / math.sqrt(2.0)
SMEARING_LIMIT = math.pi / 6.0


class FilterError(ValueError):
    pass


def _check_mollifier_range(delta: float) -> None:
    if not (0.0 < delta and math.tan(delta / 2.0) <= TAN_HALF_LIMIT):
        raise FilterError(f"smearing {delta} outside the mollifier validity range")


@dataclass(frozen=True, eq=False)
class Mollifier:
    """Smeared delta function T_d(1 + 2(cos x - cos delta)/(1 + cos delta))
    divided by its own integral over the period."""

    degree: int
    smearing: float
    normalization: float
    log_normalization: float = field(repr=False)


@dataclass(frozen=True, eq=False)
class FourierFilter:
    """Degree-d approximate Heaviside function, stored as Fourier coefficients.

    `eps_achieved` is the measured sup-norm deviation from the step on the
    certified band [-pi+delta, -delta] u [delta, pi-delta]; `eps_bound` is
    the analytic certificate 4*pi / N_{d,delta} that also controls the
    coefficient-decay and global-range bounds.
    """

    degree: int
    smearing: float
    coeffs: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    l1_norm: float = 0.0
    eps_achieved: float = 0.0
    eps_bound: float = 0.0

    def coeff(self, j: int) -> complex:
        if abs(j) > self.degree:
            return 0.0 + 0.0j
        return complex(self.coeffs[j + self.degree])

    def phase(self, j: int) -> float:
        return float(self.theta[j + self.degree])

    @property
    def js(self) -> np.ndarray:
        return np.arange(-self.degree, self.degree + 1)


# ---------------------------------------------------------------------------
# Mollifier evaluation.  T_d is evaluated through the trigonometric /
# hyperbolic closed forms with the peak magnitude factored out in log space,
# so degrees in the tens of thousands neither overflow nor cost O(d) a point.
# ---------------------------------------------------------------------------


def _cheb_argument(x, delta: float):
    return 1.0 + 2.0 * (np.cos(x) - math.cos(delta)) / (1.0 + math.cos(delta))


def _log_cheb_geq1(d: int, y):
    """log T_d(y) for y >= 1, via T_d = cosh(d * arccosh y)."""
    u = np.arccosh(np.maximum(y, 1.0))
    du = d * u
    return du + np.log1p(np.exp(-2.0 * du)) - LN2


def _scaled_cheb_values(d: int, delta: float, x):
    """T_d(arg(x)) / T_d(arg(0)) together with log T_d(arg(0))."""
    arg = np.clip(_cheb_argument(x, delta), -1.0, None)
    peak = 1.0 + 2.0 * math.tan(delta / 2.0) ** 2
    log_peak = float(_log_cheb_geq1(d, peak))
    inside = arg > 1.0
    out = np.empty_like(arg)
    if np.any(inside):
        out[inside] = np.exp(_log_cheb_geq1(d, arg[inside]) - log_peak)
    rest = ~inside
    if np.any(rest):
        with np.errstate(under="ignore"):
            out[rest] = np.cos(d * np.arccos(np.clip(arg[rest], -1.0, 1.0))) * math.exp(
                max(-log_peak, -745.0)
            )
    return out, log_peak


def _grid_size(d: int) -> int:
    # >= 4d + 4 keeps the trapezoid rule exact for the degree <= 2d integrands.
    return 1 << max(6, int(math.ceil(math.log2(4 * d + 4))))


def _mollifier_grid(d: int, delta: float, n_grid: int | None = None):
    """Mollifier values on the uniform periodic grid, plus log N_{d,delta}."""
    if n_grid is None:
        n_grid = _grid_size(d)
    xs = -math.pi + 2.0 * math.pi * np.arange(n_grid) / n_grid
    scaled, log_peak = _scaled_cheb_values(d, delta, xs)
    norm_scaled = 2.0 * math.pi * float(scaled.mean())
    if norm_scaled <= 0.0:
        raise FilterError(
            f"mollifier normalization is not positive at d={d}, delta={delta}; "
            "the degree is too small for this smearing"
        )
    log_norm = log_peak + math.log(norm_scaled)
    return xs, scaled / norm_scaled, log_norm


def build_mollifier(d: int, delta: float, n_grid: int | None = None) -> Mollifier:
    if d < 1:
        raise FilterError(f"degree must be positive, got {d}")
    _check_mollifier_range(delta)
    _, _, log_norm = _mollifier_grid(d, delta, n_grid)
    with np.errstate(over="ignore"):
        norm = float(np.exp(log_norm))
    return Mollifier(d, delta, norm, log_norm)


def mollifier_value(m: Mollifier, x):
    """Evaluate the normalized mollifier at x (scalar or array)."""
    xs = np.asarray(x, dtype=float)
    scaled, log_peak = _scaled_cheb_values(m.degree, m.smearing, np.atleast_1d(xs))
    with np.errstate(under="ignore", over="ignore"):
        vals = scaled * math.exp(min(log_peak - m.log_normalization, 709.0))
    return vals if xs.ndim else float(vals[0])


def mollifier_fourier_coeffs(d: int, delta: float, n_grid: int | None = None) -> np.ndarray:
    """Fourier coefficients M_hat_{-d..d} = (1/sqrt(2pi)) int M e^{-ikx} dx,
    by trapezoidal quadrature on a grid dense enough to be exact."""
    _check_mollifier_range(delta)
    if n_grid is None:
        n_grid = _grid_size(d)
    if n_grid < 2 * d + 2:
        raise FilterError(f"grid of {n_grid} points cannot resolve degree {d}")
    _, values, _ = _mollifier_grid(d, delta, n_grid)
    transform = np.fft.fft(values)
    ks = np.arange(-d, d + 1)
    signs = np.where(ks % 2 == 0, 1.0, -1.0)
    raw = transform[np.mod(ks, n_grid)]
    return (2.0 * math.pi / n_grid) / SQRT_2PI * signs * raw


def heaviside_fourier_coeff(k: int) -> complex:
    """Fourier coefficient of the 2pi-periodic unit step (1 on [0, pi))."""
    if k == 0:
        return complex(math.sqrt(math.pi / 2.0))
    if k % 2 == 0:
        return 0.0 + 0.0j
    return 2.0 / (1j * SQRT_2PI * k)


def _heaviside_coeff_array(d: int) -> np.ndarray:
    ks = np.arange(-d, d + 1)
    out = np.zeros(2 * d + 1, dtype=complex)
    odd = ks % 2 != 0
    out[odd] = -2.0j / (SQRT_2PI * ks[odd])
    out[d] = math.sqrt(math.pi / 2.0)
    return out


# ---------------------------------------------------------------------------
# Trigonometric polynomial evaluation
# ---------------------------------------------------------------------------


def trig_poly_uniform(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    """Evaluate sum_j c_j e^{ijx} on the n_points-point uniform grid over
    [-pi, pi) in O(n log n).  Requires n_points >= len(coeffs)."""
    d = (coeffs.shape[0] - 1) // 2
    if n_points < 2 * d + 1:
        raise FilterError("uniform evaluation grid must resolve the polynomial degree")
    js = np.arange(-d, d + 1)
    spectrum = np.zeros(n_points, dtype=complex)
    np.add.at(spectrum, np.mod(js, n_points), coeffs * np.where(js % 2 == 0, 1.0, -1.0))
    return np.fft.ifft(spectrum) * n_points


def trig_poly_values(coeffs: np.ndarray, xs, chunk: int = 1024) -> np.ndarray:
    """Evaluate sum_j c_j e^{ijx} at arbitrary points, chunked over x."""
    d = (coeffs.shape[0] - 1) // 2
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    support = np.nonzero(coeffs)[0]
    js = support - d
    cs = coeffs[support]
    out = np.empty(xs.shape[0], dtype=complex)
    for start in range(0, xs.shape[0], chunk):
        block = xs[start : start + chunk]
        out[start : start + chunk] = np.exp(1j * np.outer(block, js)) @ cs
    return out


def uniform_grid(n_points: int) -> np.ndarray:
    return -math.pi + 2.0 * math.pi * np.arange(n_points) / n_points


# ---------------------------------------------------------------------------
# Filter construction
# ---------------------------------------------------------------------------

EPS_EVAL_MIN_POINTS = 1 << 15


def _measure_heaviside_error(coeffs: np.ndarray, d: int, delta: float) -> float:
    n_eval = 1 << max(int(math.ceil(math.log2(2 * d + 2))), int(math.log2(EPS_EVAL_MIN_POINTS)))
    xs = uniform_grid(n_eval)
    vals = trig_poly_uniform(coeffs, n_eval)
    if np.max(np.abs(vals.imag)) > 1e-9:
        raise FilterError("filter values are not real; conjugate symmetry is broken")
    f_vals = vals.real
    h_vals = (xs >= 0.0).astype(float)
    band = (np.abs(xs) >= delta) & (np.abs(xs) <= math.pi - delta)
    err = float(np.max(np.abs(f_vals[band] - h_vals[band])))
    edges = np.array([delta, math.pi - delta, -delta, -math.pi + delta])
    edge_h = np.array([1.0, 1.0, 0.0, 0.0])
    edge_f = trig_poly_values(coeffs, edges).real
    return max(err, float(np.max(np.abs(edge_f - edge_h))))


def build_filter(d: int, delta: float, n_grid: int | None = None) -> FourierFilter:
    """Mollify the periodic step at degree d and smearing delta.

    The stored coefficients are the products M_hat_j * H_hat_j, which is the
    evaluation-ready convention (the lemma-style 1/sqrt(2pi) prefactor is
    absorbed here, once).  Build fails if the translated coefficient-decay
    bound |F_hat_j| <= (1 + eps) / (pi |j|) is not met exactly.
    """
    if d < 1:
        raise FilterError(f"degree must be positive, got {d}")
    if not 0.0 < delta < SMEARING_LIMIT:
        raise FilterError(f"smearing must lie in (0, pi/6), got {delta}")
    m_hat = mollifier_fourier_coeffs(d, delta, n_grid)
    _, _, log_norm = _mollifier_grid(d, delta, n_grid)
    coeffs = m_hat * _heaviside_coeff_array(d)
    coeffs.setflags(write=False)

    with np.errstate(under="ignore"):
        eps_bound = float(4.0 * math.pi * np.exp(-log_norm))
    js = np.arange(-d, d + 1)
    nonzero = js != 0
    decay = np.abs(coeffs[nonzero]) * np.pi * np.abs(js[nonzero])
    worst = float(np.max(decay - (1.0 + eps_bound)))
    if worst > 1e-12:
        raise FilterError(f"coefficient decay bound violated by {worst:.3e}")

    theta = np.angle(coeffs)
    theta.setflags(write=False)
    l1 = float(np.sum(np.abs(coeffs)))
    if l1 <= 0.0:
        raise FilterError("filter has vanishing l1 norm")
    eps_achieved = _measure_heaviside_error(coeffs, d, delta)
    return FourierFilter(d, delta, coeffs, theta, l1, eps_achieved, eps_bound)


def filter_value(f: FourierFilter, x) -> float | np.ndarray:
    """Re sum_j F_hat_j e^{ijx}, by a Horner recurrence in e^{ix}."""
    xs = np.asarray(x, dtype=float)
    z = np.exp(1j * np.atleast_1d(xs))
    acc = np.zeros_like(z)
    for c in f.coeffs[::-1]:
        acc = acc * z + c
    vals = acc * np.exp(-1j * f.degree * np.atleast_1d(xs))
    if np.max(np.abs(vals.imag)) > 1e-10:
        raise FilterError("filter evaluation has a non-real residue")
    return vals.real if xs.ndim else float(vals.real[0])


def filter_values(f: FourierFilter, xs) -> np.ndarray:
    """Vectorized real filter values at arbitrary points."""
    vals = trig_poly_values(f.coeffs, xs)
    if np.max(np.abs(vals.imag)) > 1e-9:
        raise FilterError("filter evaluation has a non-real residue")
    return vals.real


# ---------------------------------------------------------------------------
# Degree selection
# ---------------------------------------------------------------------------


def heuristic_degree(delta: float) -> int:
    """The 4/delta experiment rule of thumb."""
    return int(math.ceil(4.0 / delta))


def certified_filter(delta: float, eps: float, d_max: int = 10**7) -> tuple[int, FourierFilter]:
    """Smallest degree whose built filter certifies at sup error <= eps,
    found by doubling then bisection (the measured error is monotone
    non-increasing in the degree over the search range)."""
    if not 0.0 < delta < SMEARING_LIMIT:
        raise FilterError(f"smearing must lie in (0, pi/6), got {delta}")
    if not 0.0 < eps < 1.0:
        raise FilterError(f"target error must lie in (0, 1), got {eps}")

    def attempt(d):
        try:
            built = build_filter(d, delta)
        except FilterError:
            return None
        return built if built.eps_achieved <= eps else None

    d = 8
    lo = 0
    while True:
        built = attempt(d)
        if built is not None:
            hi, best = d, built
            break
        lo = d
        d *= 2
        if d > d_max:
            raise FilterError(f"certified degree search exceeded the cap of {d_max}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        built = attempt(mid)
        if built is not None:
            hi, best = mid, built
        else:
            lo = mid
    return hi, best


def certified_degree(delta: float, eps: float, d_max: int = 10**7) -> int:
    return certified_filter(delta, eps, d_max)[0]


# ---------------------------------------------------------------------------
# Text export: "d delta eps_achieved" header, one "j re im" line per
# coefficient.  Floats round-trip via repr.
# ---------------------------------------------------------------------------


def save_filter(f: FourierFilter, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{f.degree} {f.smearing!r} {f.eps_achieved!r}\n")
        for j, c in zip(f.js, f.coeffs):
            fh.write(f"{j} {float(c.real)!r} {float(c.imag)!r}\n")


def load_filter(path) -> FourierFilter:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise FilterError(f"bad filter header {header!r}")
        d = int(header[0])
        delta = float(header[1])
        eps_achieved = float(header[2])
        coeffs = np.zeros(2 * d + 1, dtype=complex)
        for line in fh:
            if not line.strip():
                continue
            j_str, re_str, im_str = line.split()
            coeffs[int(j_str) + d] = complex(float(re_str), float(im_str))
    coeffs.setflags(write=False)
    theta = np.angle(coeffs)
    theta.setflags(write=False)
    _, _, log_norm = _mollifier_grid(d, delta)
    with np.errstate(under="ignore"):
        eps_bound = float(4.0 * math.pi * np.exp(-log_norm))
    return FourierFilter(
        d, delta, coeffs, theta, float(np.sum(np.abs(coeffs))), eps_achieved, eps_bound
    )
