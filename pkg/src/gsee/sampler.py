"""Statevector simulation of the one-ancilla Hadamard-test circuit.

Outcomes are drawn from the exact analytic law of the circuit: the ancilla
measurement is a Bernoulli variable whose bias is the real or imaginary
part of the evolved-state overlap <phi| U^j |phi>.  Simulating the ancilla
register explicitly would reproduce the same law at O(dim) extra cost per
shot, so only the law is implemented.  Overlap amplitudes are cached per
(state, time step) since every shot at a given j shares them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import SparseHermitian, SpectralDecomposition, StateVector

# Trotter backends materialize dense step unitaries; keep them desk-scale.
TROTTER_DENSE_LIMIT = 1 << 12


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class CircuitSample:
    """One Hadamard-test shot: evolution length j and outcome Z = X + iY."""

    j: int
    z: complex

    def __post_init__(self):
        if abs(abs(self.z.real) - 1.0) > 0 or abs(abs(self.z.imag) - 1.0) > 0:
            raise SamplerError(f"z must lie in {{+-1 +-i}}, got {self.z}")


@dataclass(frozen=True)
class ControlFreeSample:
    """One two-ancilla control-free shot: Z~ = 2 e^{-i lambda_R j tau} (X~ - iY~)."""

    j: int
    z_tilde: complex
    x_tilde: int
    y_tilde: int


class _AmplitudeCache:
    """Per-(state, tau) table of A_j = <phi| U^j |phi> for j >= 0.

    Negative steps follow by conjugation since U is unitary.  Reads are
    concurrent-safe; insertion replaces the whole table once per extension.
    """

    def __init__(self):
        self._tables: dict[tuple[int, float], tuple[StateVector, np.ndarray]] = {}

    def get(self, state: StateVector, tau: float, j_max: int, compute) -> np.ndarray:
        key = (id(state), float(tau))
        entry = self._tables.get(key)
        if entry is None or entry[1].shape[0] <= j_max:
            table = compute(state, tau, max(j_max, 16))
            self._tables[key] = (state, table)
            return table
        return entry[1]


class ExactBackend:
    """Time evolution through the spectral decomposition (machine precision)."""

    kind = "exact"

    def __init__(self, decomposition: SpectralDecomposition):
        self.decomposition = decomposition
        vals, vecs = decomposition.flat()
        self._eigenvalues = vals
        self._vectors = vecs
        self._support = decomposition.support
        self._cache = _AmplitudeCache()

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    def _project(self, psi: np.ndarray) -> np.ndarray:
        if self._support is None:
            return psi
        restricted = psi[self._support]
        leak = np.linalg.norm(psi) ** 2 - np.linalg.norm(restricted) ** 2
        if leak > 1e-10:
            raise SamplerError(f"state leaks {leak:.3e} outside the decomposed sector")
        return restricted

    def evolve_array(self, psi: np.ndarray, t: float) -> np.ndarray:
        block = self._project(psi)
        coords = self._vectors.conj().T @ block
        evolved = self._vectors @ (np.exp(-1j * t * self._eigenvalues) * coords)
        if self._support is None:
            return evolved
        out = np.array(psi, dtype=complex)
        out[self._support] = evolved
        return out

    def _amplitude_block(self, state: StateVector, tau: float, j_max: int) -> np.ndarray:
        coords = self._vectors.conj().T @ self._project(state.amplitudes)
        weights = np.abs(coords) ** 2
        phase = np.exp(-1j * tau * self._eigenvalues)
        table = np.empty(j_max + 1, dtype=complex)
        current = weights.astype(complex)
        for j in range(j_max + 1):
            table[j] = current.sum()
            current *= phase
        table[0] = 1.0  # <phi|phi> for a normalized state, exactly
        return table

    def amplitude_table(self, state: StateVector, tau: float, j_max: int) -> np.ndarray:
        return self._cache.get(state, tau, j_max, self._amplitude_block)


def _suzuki_sequence(n_terms: int, order: int) -> list[tuple[int, float]]:
    if order < 2 or order % 2 != 0:
        raise SamplerError(f"product formula order must be a positive even integer, got {order}")
    seq = [(g, 0.5) for g in range(n_terms - 1)]
    seq.append((n_terms - 1, 1.0))
    seq.extend((g, 0.5) for g in reversed(range(n_terms - 1)))
    for k in range(2, order // 2 + 1):
        u = 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))
        outer = [(g, c * u) for g, c in seq]
        middle = [(g, c * (1.0 - 4.0 * u)) for g, c in seq]
        seq = outer + outer + middle + outer + outer
    merged: list[tuple[int, float]] = []
    for g, c in seq:
        if merged and merged[-1][0] == g:
            merged[-1] = (g, merged[-1][1] + c)
        else:
            merged.append((g, c))
    return merged


class TrotterBackend:
    """Order-p Suzuki product evolution with r steps per rescaled time unit.

    Needs the Hamiltonian as a term decomposition (hopping vs interaction
    groups for Hubbard); each group is exponentiated exactly through its
    own dense eigendecomposition, so the product is unitary to roundoff.
    """

    kind = "trotter"

    def __init__(
        self,
        terms: list[SparseHermitian],
        order: int = 2,
        steps_per_tau: int = 1,
        time_unit: float | None = None,
    ):
        if not terms:
            raise SamplerError("Trotter evolution requested without a term decomposition")
        if steps_per_tau < 1:
            raise SamplerError(f"steps_per_tau must be >= 1, got {steps_per_tau}")
        dims = {term.dim for term in terms}
        if len(dims) != 1:
            raise SamplerError("term dimensions disagree")
        (self._dim,) = dims
        if self._dim > TROTTER_DENSE_LIMIT:
            raise SamplerError(f"Trotter backend is dense; dim {self._dim} above {TROTTER_DENSE_LIMIT}")
        self.order = int(order)
        self.steps_per_tau = int(steps_per_tau)
        self.time_unit = time_unit
        self._sequence = _suzuki_sequence(len(terms), self.order)
        self._eig = [np.linalg.eigh(term.to_dense()) for term in terms]
        self._step_cache: dict[float, np.ndarray] = {}
        self._cache = _AmplitudeCache()

    @property
    def dim(self) -> int:
        return self._dim

    def _term_exponential(self, g: int, t: float) -> np.ndarray:
        vals, vecs = self._eig[g]
        return (vecs * np.exp(-1j * t * vals)) @ vecs.conj().T

    def _slice_unitary(self, dt: float) -> np.ndarray:
        u = np.eye(self._dim, dtype=complex)
        for g, c in self._sequence:
            u = self._term_exponential(g, c * dt) @ u
        return u

    def one_step(self, tau: float) -> np.ndarray:
        """The unit evolution U approximating e^{-i tau H}."""
        key = float(tau)
        cached = self._step_cache.get(key)
        if cached is None:
            cached = np.linalg.matrix_power(self._slice_unitary(tau / self.steps_per_tau), self.steps_per_tau)
            self._step_cache[key] = cached
        return cached

    def evolve_array(self, psi: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return np.array(psi, dtype=complex)
        if self.time_unit is not None:
            n_slices = max(1, math.ceil(self.steps_per_tau * abs(t) / self.time_unit - 1e-12))
        else:
            n_slices = self.steps_per_tau
        u = self._slice_unitary(t / n_slices)
        return np.linalg.matrix_power(u, n_slices) @ psi

    def _amplitude_block(self, state: StateVector, tau: float, j_max: int) -> np.ndarray:
        u = self.one_step(tau)
        table = np.empty(j_max + 1, dtype=complex)
        psi = np.array(state.amplitudes, dtype=complex)
        for j in range(j_max + 1):
            table[j] = np.vdot(state.amplitudes, psi)
            if j < j_max:
                psi = u @ psi
        table[0] = 1.0
        return table

    def amplitude_table(self, state: StateVector, tau: float, j_max: int) -> np.ndarray:
        return self._cache.get(state, tau, j_max, self._amplitude_block)


EvolutionBackend = ExactBackend | TrotterBackend


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def evolve(state: StateVector, H: SparseHermitian, t: float, backend: EvolutionBackend) -> StateVector:
    """Apply e^{-itH} (exact) or its product-formula approximation."""
    if H is not None and H.dim != state.dim:
        raise SamplerError("state and Hamiltonian dimensions disagree")
    return StateVector(backend.evolve_array(state.amplitudes, t))


def expectation_phase(
    state: StateVector, H: SparseHermitian, j: int, tau: float, backend: EvolutionBackend
) -> complex:
    """<phi| U^j |phi> for the backend's one-step evolution U of time tau."""
    table = backend.amplitude_table(state, tau, abs(int(j)))
    amp = table[abs(int(j))]
    if j < 0:
        amp = np.conj(amp)
    if abs(amp) > 1.0 + 1e-10:
        raise SamplerError(f"amplitude magnitude {abs(amp)} exceeds 1")
    return complex(amp)


def _bernoulli_pm1(bias: float, rng: np.random.Generator) -> int:
    if abs(bias) > 1.0 + 1e-9:
        raise SamplerError(f"outcome bias {bias} outside [-1, 1]; backend bug")
    p_plus = min(max((1.0 + bias) / 2.0, 0.0), 1.0)
    return 1 if rng.random() < p_plus else -1


def sample_xy(
    state: StateVector,
    H: SparseHermitian,
    j: int,
    tau: float,
    part: str,
    backend: EvolutionBackend,
    rng: np.random.Generator,
) -> int:
    """One ancilla measurement: +1 with probability (1 + v)/2 where v is the
    real part (W = I) or imaginary part (W = S^dagger) of the overlap."""
    amp = expectation_phase(state, H, j, tau, backend)
    if part == "Re":
        v = amp.real
    elif part == "Im":
        v = amp.imag
    else:
        raise SamplerError(f"part must be 'Re' or 'Im', got {part!r}")
    return _bernoulli_pm1(v, rng)


def sample_z(
    state: StateVector,
    H: SparseHermitian,
    j: int,
    tau: float,
    backend: EvolutionBackend,
    rng: np.random.Generator,
) -> CircuitSample:
    """Independent real/imaginary shots combined into Z = X + iY."""
    amp = expectation_phase(state, H, j, tau, backend)
    x = _bernoulli_pm1(amp.real, rng)
    y = _bernoulli_pm1(amp.imag, rng)
    return CircuitSample(int(j), complex(x, y))


def draw_samples(
    state: StateVector,
    H: SparseHermitian,
    js: np.ndarray,
    tau: float,
    backend: EvolutionBackend,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized Z shots for an array of evolution lengths."""
    js = np.asarray(js, dtype=np.int64)
    if js.size == 0:
        return np.zeros(0, dtype=complex)
    table = backend.amplitude_table(state, tau, int(np.max(np.abs(js))))
    amps = table[np.abs(js)]
    amps = np.where(js < 0, np.conj(amps), amps)
    if np.max(np.abs(amps)) > 1.0 + 1e-9:
        raise SamplerError("outcome bias outside [-1, 1]; backend bug")
    p_re = np.clip((1.0 + amps.real) / 2.0, 0.0, 1.0)
    p_im = np.clip((1.0 + amps.imag) / 2.0, 0.0, 1.0)
    x = np.where(rng.random(js.shape[0]) < p_re, 1.0, -1.0)
    y = np.where(rng.random(js.shape[0]) < p_im, 1.0, -1.0)
    return x + 1j * y


# ---------------------------------------------------------------------------
# Control-free circuit (two ancillas plus a reference eigenstate)
# ---------------------------------------------------------------------------


def control_free_law(alpha: complex) -> tuple[float, float, float, float]:
    """Marginal outcome probabilities (X~=+1, X~=-1, Y~=+1, Y~=-1) for the
    two-ancilla circuit, given alpha = <phi| e^{-it(H - lambda_R)} |phi>.
    The remaining probability mass in each run leaves the variable at 0."""
    a2 = abs(alpha) ** 2
    px_plus = (1.0 + a2 + 2.0 * alpha.real) / 8.0
    px_minus = (1.0 + a2 - 2.0 * alpha.real) / 8.0
    py_plus = (1.0 + a2 - 2.0 * alpha.imag) / 8.0
    py_minus = (1.0 + a2 + 2.0 * alpha.imag) / 8.0
    return px_plus, px_minus, py_plus, py_minus


def _validate_reference(
    state: StateVector,
    H: SparseHermitian,
    lambda_ref: float,
    reference_state: StateVector | None,
) -> np.ndarray:
    if reference_state is None:
        ref = np.zeros(state.dim, dtype=complex)
        ref[0] = 1.0
    else:
        ref = reference_state.amplitudes
    if abs(np.vdot(ref, state.amplitudes)) > 1e-10:
        raise SamplerError("reference state is not orthogonal to the initial state")
    residual = np.linalg.norm(H.matrix @ ref - lambda_ref * ref)
    if residual > 1e-8 * (1.0 + abs(lambda_ref)):
        raise SamplerError(
            f"reference is not an eigenstate at lambda_R={lambda_ref} (residual {residual:.3e})"
        )
    return ref


def _control_free_alpha(state, H, j, tau, lambda_ref, backend) -> complex:
    amp = expectation_phase(state, H, j, tau, backend)
    return amp * np.exp(1j * lambda_ref * j * tau)


def sample_z_control_free(
    state: StateVector,
    H: SparseHermitian,
    j: int,
    tau: float,
    lambda_ref: float,
    backend: EvolutionBackend,
    rng: np.random.Generator,
    reference_state: StateVector | None = None,
) -> ControlFreeSample:
    """One control-free shot; E[Z~] equals the controlled-circuit amplitude,
    with var[Z~] <= 8 instead of 2."""
    _validate_reference(state, H, lambda_ref, reference_state)
    alpha = _control_free_alpha(state, H, j, tau, lambda_ref, backend)
    px_plus, px_minus, py_plus, py_minus = control_free_law(alpha)
    u, v = rng.random(), rng.random()
    x = 1 if u < px_plus else (-1 if u < px_plus + px_minus else 0)
    y = 1 if v < py_plus else (-1 if v < py_plus + py_minus else 0)
    phase = np.exp(-1j * lambda_ref * j * tau)
    return ControlFreeSample(int(j), complex(2.0 * phase * (x - 1j * y)), x, y)


def draw_control_free_many(
    state: StateVector,
    H: SparseHermitian,
    j: int,
    tau: float,
    lambda_ref: float,
    backend: EvolutionBackend,
    rng: np.random.Generator,
    n: int,
    reference_state: StateVector | None = None,
) -> np.ndarray:
    """Vectorized control-free Z~ shots at a fixed evolution length."""
    _validate_reference(state, H, lambda_ref, reference_state)
    alpha = _control_free_alpha(state, H, j, tau, lambda_ref, backend)
    px_plus, px_minus, py_plus, py_minus = control_free_law(alpha)
    u = rng.random(n)
    v = rng.random(n)
    x = np.where(u < px_plus, 1.0, np.where(u < px_plus + px_minus, -1.0, 0.0))
    y = np.where(v < py_plus, 1.0, np.where(v < py_plus + py_minus, -1.0, 0.0))
    phase = np.exp(-1j * lambda_ref * j * tau)
    return 2.0 * phase * (x - 1j * y)


# ---------------------------------------------------------------------------
# Product-formula step count
# ---------------------------------------------------------------------------


def trotter_step_argument(d: int, eta: float, c_trotter: float, tau: float, order: int) -> float:
    """The scaling expression whose ceiling gives the required step count."""
    p = float(order)
    return (d ** (1.0 / p)) * (eta ** (-1.0 / p)) * (c_trotter ** (1.0 / p)) * (tau ** (1.0 + 1.0 / p))


def trotter_steps_required(
    d: int, eta: float, c_trotter: float, tau: float, order: int, safety: float = 1.0
) -> int:
    """Steps per tau unit keeping the filtered evolution error at O(eta).

    Asymptotic guide with unit constants (`safety` rescales it); pair with
    an empirical comparison of Trotterized vs exact smoothed CDFs.
    """
    if d <= 0 or eta <= 0 or tau <= 0 or order <= 0 or c_trotter < 0:
        raise SamplerError("all step-count inputs must be positive (c_trotter may be 0)")
    if c_trotter == 0.0:
        return 1
    return max(1, math.ceil(safety * trotter_step_argument(d, eta, c_trotter, tau, order)))
