"""Stochastic estimation of the smoothed spectral CDF.

The filtered CDF is a trigonometric polynomial whose coefficients pair the
filter coefficients with circuit amplitudes.  Instead of estimating every
amplitude, a single shot draws the evolution length J with probability
proportional to |F_hat_J| and forms G = F_l1 * Z * e^{i(theta_J + J x)},
an unbiased estimate of the whole sum with |G| = sqrt(2) * F_l1 always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filters import FourierFilter, trig_poly_values
from .hamiltonian import SpectralMeasure


class AcdfError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Importance distribution over evolution lengths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JDistribution:
    """Alias-table sampler for Pr[J = j] = |F_hat_j| / F_l1."""

    filter: FourierFilter
    support: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    _accept: np.ndarray = field(repr=False)
    _alias: np.ndarray = field(repr=False)

    @property
    def mean_abs_j(self) -> float:
        return float(np.sum(self.probabilities * np.abs(self.support)))

    def probability(self, j: int) -> float:
        hits = np.nonzero(self.support == j)[0]
        return float(self.probabilities[hits[0]]) if hits.size else 0.0

    def sample_many(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cells = rng.integers(0, self.support.shape[0], size=n)
        keep = rng.random(n) < self._accept[cells]
        return self.support[np.where(keep, cells, self._alias[cells])]


def build_j_distribution(filt: FourierFilter) -> JDistribution:
    weights = np.abs(filt.coeffs)
    nonzero = np.nonzero(weights)[0]
    support = (nonzero - filt.degree).astype(np.int64)
    probs = weights[nonzero] / weights[nonzero].sum()
    if abs(probs.sum() - 1.0) > 1e-12:
        raise AcdfError("importance probabilities do not normalize")

    # Vose alias construction.
    k = probs.shape[0]
    accept = probs * k
    alias = np.arange(k)
    small = [i for i in range(k) if accept[i] < 1.0]
    large = [i for i in range(k) if accept[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        alias[s] = l
        accept[l] -= 1.0 - accept[s]
        (small if accept[l] < 1.0 else large).append(l)
    for leftover in small + large:
        accept[leftover] = 1.0
    return JDistribution(filt, support, probs, accept, alias)


def sample_j(dist: JDistribution, rng: np.random.Generator) -> int:
    return int(dist.sample_many(1, rng)[0])


# ---------------------------------------------------------------------------
# Sample batches and the unbiased estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Records {(J_k, Z_k)} drawn for one filter at one rescaling."""

    js: np.ndarray
    zs: np.ndarray
    filter_degree: int
    tau: float
    master_seed: int

    def __post_init__(self):
        js = np.asarray(self.js, dtype=np.int64)
        zs = np.asarray(self.zs, dtype=complex)
        if js.shape != zs.shape or js.ndim != 1:
            raise AcdfError("js and zs must be matching 1-d arrays")
        if js.size and int(np.max(np.abs(js))) > self.filter_degree:
            raise AcdfError("evolution length exceeds the filter degree")
        if zs.size and (np.any(np.abs(zs.real) != 1.0) or np.any(np.abs(zs.imag) != 1.0)):
            raise AcdfError("every z must lie in {+-1 +-i}")
        js.setflags(write=False)
        zs.setflags(write=False)
        object.__setattr__(self, "js", js)
        object.__setattr__(self, "zs", zs)

    def __len__(self) -> int:
        return self.js.shape[0]

    def records(self):
        for j, z in zip(self.js, self.zs):
            yield int(j), complex(z)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"tau={self.tau!r} d={self.filter_degree} seed={self.master_seed}\n")
            for j, z in zip(self.js, self.zs):
                fh.write(f"{j} {float(z.real)!r} {float(z.imag)!r}\n")

    @classmethod
    def load(cls, path) -> "SampleBatch":
        with open(path) as fh:
            fields = dict(item.split("=") for item in fh.readline().split())
            js, zs = [], []
            for line in fh:
                if not line.strip():
                    continue
                j_str, re_str, im_str = line.split()
                js.append(int(j_str))
                zs.append(complex(float(re_str), float(im_str)))
        return cls(
            np.array(js, dtype=np.int64),
            np.array(zs, dtype=complex),
            int(fields["d"]),
            float(fields["tau"]),
            int(fields["seed"]),
        )


def g_term(x: float, j: int, z: complex, filt: FourierFilter) -> complex:
    """Single-shot estimator F_l1 * z * e^{i(theta_j + j x)}."""
    if abs(j) > filt.degree or filt.coeff(j) == 0:
        raise AcdfError(f"j={j} has zero filter coefficient; its phase is undefined")
    return filt.l1_norm * z * np.exp(1j * (filt.phase(j) + j * x))


def g_bar(x, batch: SampleBatch, filt: FourierFilter):
    """Batch mean of the single-shot estimator; vectorized over x."""
    if len(batch) == 0:
        raise AcdfError("empty sample batch")
    phases = filt.theta[batch.js + filt.degree]
    weights = batch.zs * np.exp(1j * phases)
    xs = np.asarray(x, dtype=float)
    if xs.ndim == 0:
        value = filt.l1_norm * np.mean(weights * np.exp(1j * batch.js * float(xs)))
        return complex(value)
    # Aggregate repeated evolution lengths before sweeping over x.
    agg = np.zeros(2 * filt.degree + 1, dtype=complex)
    np.add.at(agg, batch.js + filt.degree, weights)
    vals = trig_poly_values(agg, xs)
    return filt.l1_norm * vals / len(batch)


# ---------------------------------------------------------------------------
# Exact references
# ---------------------------------------------------------------------------


def exact_cdf(measure: SpectralMeasure, x):
    """Right-continuous cumulative weight, via the periodic step function.

    Matches sum_{x_k <= x} p_k on the principal window that contains the
    measure; atoms at exactly x are counted.
    """
    xs = np.asarray(x, dtype=float)
    offsets = np.mod(np.atleast_1d(xs)[:, None] - measure.positions[None, :], 2.0 * math.pi)
    vals = np.sum(np.where(offsets < math.pi, measure.weights[None, :], 0.0), axis=1)
    return float(vals[0]) if xs.ndim == 0 else vals


def spectral_moments(measure: SpectralMeasure, d: int) -> np.ndarray:
    """Tr[rho e^{-ij tau H}] for j = -d..d, from the measure."""
    js = np.arange(-d, d + 1)
    out = np.empty(2 * d + 1, dtype=complex)
    chunk = max(1, (1 << 22) // max(measure.n_atoms, 1))
    for start in range(0, js.shape[0], chunk):
        block = js[start : start + chunk]
        out[start : start + chunk] = np.exp(
            -1j * np.outer(block, measure.positions)
        ) @ measure.weights.astype(complex)
    return out


def exact_acdf(measure: SpectralMeasure, filt: FourierFilter, x):
    """The filter-smoothed CDF sum_j F_hat_j e^{ijx} Tr[rho e^{-ij tau H}]."""
    coeffs = filt.coeffs * spectral_moments(measure, filt.degree)
    xs = np.asarray(x, dtype=float)
    vals = trig_poly_values(coeffs, np.atleast_1d(xs))
    residue = float(np.max(np.abs(vals.imag), initial=0.0))
    if residue > 1e-6:
        raise AcdfError(f"imaginary residue {residue:.3e}; coefficient conventions are inconsistent")
    return vals.real if xs.ndim else float(vals.real[0])


def required_samples(eta: float, filt: FourierFilter, constant: float = 512.0) -> int:
    """Per-vote sample count keeping var[G_bar] <= eta^2 / 256, from the
    shot-variance bound 2 * F_l1^2."""
    if not 0.0 < eta <= 1.0:
        raise AcdfError(f"eta must lie in (0, 1], got {eta}")
    return int(math.ceil(constant * filt.l1_norm**2 / eta**2))


def write_trace(path, xs, gbar_vals, acdf_vals, cdf_vals, header: dict | None = None) -> None:
    """CSV trace: x, re_gbar, im_gbar, exact_acdf, exact_cdf."""
    with open(path, "w") as fh:
        for key, value in (header or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write("x,re_gbar,im_gbar,exact_acdf,exact_cdf\n")
        for x, g, a, c in zip(xs, gbar_vals, acdf_vals, cdf_vals):
            fh.write(f"{float(x)!r},{float(g.real)!r},{float(g.imag)!r},{float(a)!r},{float(c)!r}\n")
