import math
from dataclasses import dataclass

import numpy as np
import pytest

import gsee


@dataclass(frozen=True)
class System:
    spec: gsee.HubbardSpec
    H: gsee.SparseHermitian
    decomposition: gsee.SpectralDecomposition
    tau: float
    hf: gsee.StateVector
    measure: gsee.SpectralMeasure

    @property
    def ground_energy(self) -> float:
        return self.decomposition.ground_energy()

    def backend(self) -> gsee.ExactBackend:
        return gsee.ExactBackend(self.decomposition)


def _make_system(sites: int, u: float, t: float = 1.0, boundary: str = "open") -> System:
    spec = gsee.HubbardSpec.half_filling(sites, t=t, u=u, boundary=boundary)
    H = gsee.build_hubbard(spec)
    decomp = gsee.spectral_decompose(H)
    tau = gsee.select_tau(bound=decomp.spectral_radius)
    hf = gsee.hartree_fock_state(spec)
    measure = gsee.overlap_distribution(decomp, hf, tau)
    return System(spec, H, decomp, tau, hf, measure)


@pytest.fixture(scope="session")
def hub2() -> System:
    return _make_system(2, u=4.0)


@pytest.fixture(scope="session")
def hub4() -> System:
    return _make_system(4, u=4.0)


@pytest.fixture(scope="session")
def hub4_u10() -> System:
    return _make_system(4, u=10.0)


def random_measure(rng: np.random.Generator, n_atoms: int | None = None, spread: float = 0.9):
    """Random atomic spectral measure supported inside (-pi/3, pi/3)."""
    if n_atoms is None:
        n_atoms = int(rng.integers(1, 5))
    limit = spread * math.pi / 3.0
    while True:
        positions = np.sort(rng.uniform(-limit, limit, size=n_atoms))
        if n_atoms == 1 or np.min(np.diff(positions)) > 1e-6:
            break
    weights = rng.dirichlet(np.ones(n_atoms))
    weights = weights / weights.sum()
    return gsee.SpectralMeasure(positions, weights)


def measure_backend(measure, dim: int | None = None):
    """Diagonal Hamiltonian + state realizing a measure exactly at tau = 1."""
    n = measure.n_atoms
    if dim is None:
        dim = 1 << max(1, int(math.ceil(math.log2(max(n, 2)))))
    diag = np.zeros(dim)
    diag[:n] = measure.positions
    H = gsee.SparseHermitian.from_triplets(dim, np.arange(dim), np.arange(dim), diag.astype(complex))
    amps = np.zeros(dim, dtype=complex)
    amps[:n] = np.sqrt(measure.weights)
    state = gsee.StateVector(amps)
    decomp = gsee.spectral_decompose(H, degeneracy_tol=1e-12)
    return H, state, gsee.ExactBackend(decomp)
