"""Fermi-Hubbard chains under the Jordan-Wigner mapping, plus the dense
spectral oracles (eigendecomposition, overlap measure, rescaling factor)
that the sampling and search layers are checked against."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Hard desk-scale guard: refuse Hilbert spaces beyond 2^20 amplitudes.
MAX_QUBITS = 20

# Dense full-space eigensolves are only attempted up to this dimension;
# larger problems go through the particle-number sector path.
DENSE_EIG_CUTOFF = 1 << 12

RESCALING_LIMIT = math.pi / 3.0


class HamiltonianError(ValueError):
    pass


@dataclass(frozen=True)
class HubbardSpec:
    """One-dimensional Fermi-Hubbard chain.

    `filling` is the (n_up, n_down) particle content used for the
    Hartree-Fock state and for sector-restricted diagonalization; it is
    not needed to build the Hamiltonian itself.
    """

    sites: int
    t: float = 1.0
    u: float = 4.0
    boundary: str = "open"
    filling: tuple[int, int] | None = None

    def __post_init__(self):
        if self.sites < 2:
            raise HamiltonianError(f"need at least 2 sites, got {self.sites}")
        if self.boundary not in ("open", "periodic"):
            raise HamiltonianError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.filling is not None:
            n_up, n_dn = self.filling
            if not (0 <= n_up <= self.sites and 0 <= n_dn <= self.sites):
                raise HamiltonianError(f"filling {self.filling} exceeds {self.sites} sites")
            object.__setattr__(self, "filling", (int(n_up), int(n_dn)))

    @property
    def n_qubits(self) -> int:
        return 2 * self.sites

    @staticmethod
    def half_filling(sites: int, t: float = 1.0, u: float = 4.0, boundary: str = "open") -> "HubbardSpec":
        n_up = (sites + 1) // 2
        n_dn = sites // 2
        return HubbardSpec(sites, t, u, boundary, (n_up, n_dn))


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """Explicit sparse Hermitian matrix on a 2^n-dimensional qubit space."""

    dim: int
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        if self.dim < 1 or (self.dim & (self.dim - 1)) != 0:
            raise HamiltonianError(f"dim must be a power of two, got {self.dim}")
        if self.matrix.shape != (self.dim, self.dim):
            raise HamiltonianError("matrix shape does not match dim")
        resid = abs(self.matrix - self.matrix.conjugate().T)
        if resid.nnz and resid.max() > 1e-12:
            raise HamiltonianError(f"matrix is not Hermitian (residual {resid.max():.3e})")

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def from_triplets(cls, dim, rows, cols, values) -> "SparseHermitian":
        """Build from an upper triangle (row <= col); conjugates are implied."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=complex)
        if np.any(rows > cols):
            raise HamiltonianError("triplets must satisfy row <= col")
        upper = sp.coo_matrix((values, (rows, cols)), shape=(dim, dim)).tocsr()
        diag = sp.diags(upper.diagonal())
        if np.max(np.abs(upper.diagonal().imag), initial=0.0) > 1e-12:
            raise HamiltonianError("diagonal entries must be real")
        full = upper + upper.conjugate().T - diag
        return cls(dim, full.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def upper_triplets(self):
        """Yield (row, col, value) for the stored upper triangle."""
        coo = self.matrix.tocoo()
        keep = coo.row <= coo.col
        order = np.lexsort((coo.col[keep], coo.row[keep]))
        for r, c, v in zip(coo.row[keep][order], coo.col[keep][order], coo.data[keep][order]):
            yield int(r), int(c), complex(v)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"dim={self.dim}\n")
            for r, c, v in self.upper_triplets():
                fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")

    @classmethod
    def load(cls, path) -> "SparseHermitian":
        with open(path) as fh:
            header = fh.readline().strip()
            if not header.startswith("dim="):
                raise HamiltonianError(f"bad header {header!r}")
            dim = int(header[4:])
            rows, cols, vals = [], [], []
            for line in fh:
                if not line.strip():
                    continue
                r, c, re, im = line.split()
                rows.append(int(r))
                cols.append(int(c))
                vals.append(complex(float(re), float(im)))
        return cls.from_triplets(dim, rows, cols, vals)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on the full qubit register."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise HamiltonianError(f"state norm {norm!r} is not 1 within 1e-12")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def basis_state(cls, dim: int, index: int) -> "StateVector":
        amp = np.zeros(dim, dtype=complex)
        amp[index] = 1.0
        return cls(amp)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues grouped by degeneracy, with an orthonormal basis per group.

    When `support` is set, the eigenvectors are expressed on that index
    subset of the full space (an invariant particle-number sector); the
    decomposition then covers the restricted block only.
    """

    eigenvalues: np.ndarray
    groups: tuple[np.ndarray, ...] = field(repr=False)
    dim: int = 0
    support: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.eigenvalues) <= 0):
            raise HamiltonianError("eigenvalues must be strictly ascending")

    @property
    def spectral_radius(self) -> float:
        return float(max(abs(self.eigenvalues[0]), abs(self.eigenvalues[-1])))

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """All eigenvalues repeated by multiplicity and the stacked basis."""
        vals = np.concatenate(
            [np.full(g.shape[1], lam) for lam, g in zip(self.eigenvalues, self.groups)]
        )
        vecs = np.hstack(self.groups)
        return vals, vecs

    def project_state(self, state: StateVector) -> np.ndarray:
        amp = state.amplitudes
        if self.support is not None:
            amp = amp[self.support]
        return amp

    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def ground_vector(self) -> np.ndarray:
        """One full-dimension representative of the lowest eigenspace."""
        v = self.groups[0][:, 0]
        if self.support is None:
            return v
        out = np.zeros(self.dim, dtype=complex)
        out[self.support] = v
        return out


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atomic overlap measure: weights p_k at rescaled eigenvalues x_k."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pos.shape != wts.shape or pos.ndim != 1:
            raise HamiltonianError("positions/weights must be matching 1-d arrays")
        if np.any(np.diff(pos) <= 0):
            raise HamiltonianError("atom positions must be strictly ascending")
        if np.any(wts < 0):
            raise HamiltonianError("weights must be nonnegative")
        if abs(wts.sum() - 1.0) > 1e-10:
            raise HamiltonianError(f"weights sum to {wts.sum()!r}, expected 1 within 1e-10")
        if np.any(np.abs(pos) >= RESCALING_LIMIT):
            raise HamiltonianError("atom positions must lie inside (-pi/3, pi/3)")
        pos.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", wts)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


# ---------------------------------------------------------------------------
# Jordan-Wigner construction
#
# Spin-orbital q = 2*site + spin (spin 0 = up, 1 = down).  Basis index bit q
# is the occupation of orbital q, and |n> = prod_{q ascending} c_q^dag |vac>,
# so c_p^dag c_q carries the parity of the occupations strictly between p
# and q.  This fixes every amplitude below bit-exactly.
# ---------------------------------------------------------------------------


def spin_orbital(site: int, spin: int) -> int:
    return 2 * site + spin


def _bonds(spec: HubbardSpec) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(spec.sites - 1)]
    if spec.boundary == "periodic" and spec.sites > 2:
        bonds.append((0, spec.sites - 1))
    return bonds


def build_hubbard(spec: HubbardSpec, max_qubits: int = MAX_QUBITS) -> SparseHermitian:
    """Jordan-Wigner image of the Hubbard chain on 2L qubits.

    Hopping -t sum_{<j,j'>,sigma} c^dag_{j,sigma} c_{j',sigma} over both
    orientations of each bond, interaction U sum_j (n_up-1/2)(n_dn-1/2).
    The full Fock space is kept; particle-number sectors are selected by
    the initial state, not here.
    """
    n = spec.n_qubits
    if n > max_qubits:
        raise HamiltonianError(f"{spec.sites} sites need {n} qubits, above the guard of {max_qubits}")
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)

    occ = [(idx >> q) & 1 for q in range(n)]
    diag = np.zeros(dim, dtype=float)
    for j in range(spec.sites):
        diag += spec.u * (occ[spin_orbital(j, 0)] - 0.5) * (occ[spin_orbital(j, 1)] - 0.5)

    rows = [idx]
    cols = [idx]
    data = [diag.astype(complex)]
    for a, b in _bonds(spec):
        for spin in (0, 1):
            p, q = sorted((spin_orbital(a, spin), spin_orbital(b, spin)))
            between = ((1 << q) - 1) & ~((1 << (p + 1)) - 1)
            flip = (1 << p) | (1 << q)
            src = idx[(occ[q] == 1) & (occ[p] == 0)]
            tgt = src ^ flip
            sign = 1.0 - 2.0 * (np.bitwise_count(np.bitwise_and(src, between)) & 1)
            val = (-spec.t * sign).astype(complex)
            rows.extend((tgt, src))
            cols.extend((src, tgt))
            data.extend((val, val))

    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    return SparseHermitian(dim, matrix)


def hubbard_terms(spec: HubbardSpec, max_qubits: int = MAX_QUBITS) -> list[SparseHermitian]:
    """The hopping and interaction groups of the Hubbard Hamiltonian,
    as used by product-formula evolution."""
    hopping = build_hubbard(
        HubbardSpec(spec.sites, spec.t, 0.0, spec.boundary, spec.filling), max_qubits
    )
    interaction = build_hubbard(
        HubbardSpec(spec.sites, 0.0, spec.u, spec.boundary, spec.filling), max_qubits
    )
    return [hopping, interaction]


def jw_number_diagonal(n_qubits: int) -> np.ndarray:
    """Diagonal of the total JW number operator, one entry per basis state."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    return np.bitwise_count(idx).astype(float)


def sector_indices(sites: int, n_up: int, n_dn: int) -> np.ndarray:
    """Basis indices with the given spin-resolved particle numbers."""
    n = 2 * sites
    idx = np.arange(1 << n, dtype=np.int64)
    up_mask = sum(1 << spin_orbital(j, 0) for j in range(sites))
    dn_mask = sum(1 << spin_orbital(j, 1) for j in range(sites))
    ups = np.bitwise_count(np.bitwise_and(idx, up_mask))
    dns = np.bitwise_count(np.bitwise_and(idx, dn_mask))
    return idx[(ups == n_up) & (dns == n_dn)]


# ---------------------------------------------------------------------------
# Spectral oracles
# ---------------------------------------------------------------------------


def _group_eigenpairs(evals: np.ndarray, evecs: np.ndarray, tol: float):
    cuts = np.nonzero(np.diff(evals) > tol)[0] + 1
    starts = np.concatenate(([0], cuts))
    stops = np.concatenate((cuts, [evals.shape[0]]))
    grouped_vals = np.array([evals[a:b].mean() for a, b in zip(starts, stops)])
    groups = tuple(np.ascontiguousarray(evecs[:, a:b]) for a, b in zip(starts, stops))
    return grouped_vals, groups


def spectral_decompose(H: SparseHermitian, degeneracy_tol: float | None = None) -> SpectralDecomposition:
    """Dense eigendecomposition with degenerate eigenvalues merged.

    Gaps below `degeneracy_tol` (default 1e-9 * spectral radius) collapse
    into a single eigenspace.  Brute-force oracle; dimension is guarded.
    """
    if H.dim > (1 << MAX_QUBITS):
        raise HamiltonianError(f"dim {H.dim} above the 2^{MAX_QUBITS} guard")
    evals, evecs = np.linalg.eigh(H.to_dense())
    if degeneracy_tol is None:
        degeneracy_tol = 1e-9 * max(abs(evals[0]), abs(evals[-1]), 1e-300)
    vals, groups = _group_eigenpairs(evals, evecs, degeneracy_tol)
    return SpectralDecomposition(vals, groups, dim=H.dim)


def sector_decompose(
    H: SparseHermitian,
    spec: HubbardSpec,
    degeneracy_tol: float | None = None,
) -> SpectralDecomposition:
    """Dense eigendecomposition of the (n_up, n_dn) block of a Hubbard
    Hamiltonian.  The block must be an invariant subspace; leakage across
    the sector boundary is rejected.  This is what makes 16-qubit runs
    tractable: the 8-site half-filled block is 4900-dimensional."""
    if spec.filling is None:
        raise HamiltonianError("sector_decompose needs spec.filling")
    support = sector_indices(spec.sites, *spec.filling)
    block = H.matrix[support][:, support]
    rows_abs = np.abs(H.matrix[support])
    leak = rows_abs.sum() - np.abs(block).sum()
    if leak > 1e-10:
        raise HamiltonianError(f"sector is not invariant (leakage {leak:.3e})")
    evals, evecs = np.linalg.eigh(block.toarray())
    if degeneracy_tol is None:
        scale = max(abs(evals[0]), abs(evals[-1]), 1e-300)
        degeneracy_tol = 1e-9 * scale
    vals, groups = _group_eigenpairs(evals, evecs, degeneracy_tol)
    return SpectralDecomposition(vals, groups, dim=H.dim, support=support)


def spectral_radius(H: SparseHermitian) -> float:
    """Exact spectral radius, dense below the cutoff and via Lanczos extremes above."""
    if H.dim <= DENSE_EIG_CUTOFF:
        evals = np.linalg.eigvalsh(H.to_dense())
        return float(max(abs(evals[0]), abs(evals[-1])))
    lo = spla.eigsh(H.matrix, k=1, which="SA", return_eigenvectors=False)[0]
    hi = spla.eigsh(H.matrix, k=1, which="LA", return_eigenvectors=False)[0]
    return float(max(abs(lo), abs(hi)))


def select_tau(
    H: SparseHermitian | None = None,
    bound: float | None = None,
    policy: str | float = "quarter",
) -> float:
    """Rescaling factor for the time-evolution phase.

    Default policy puts tau*bound at pi/4 (the setting used by every
    numerical experiment here); any policy must keep tau*bound strictly
    below pi/3, which is the hard validity limit for the spectral measure.
    """
    if bound is None:
        if H is None:
            raise HamiltonianError("select_tau needs a Hamiltonian or an explicit norm bound")
        bound = spectral_radius(H)
    if bound <= 0:
        raise HamiltonianError(f"norm bound must be positive, got {bound}")
    if policy == "quarter":
        numerator = math.pi / 4.0
    else:
        numerator = float(policy)
    if not 0 < numerator < RESCALING_LIMIT:
        raise HamiltonianError(f"policy numerator {numerator} outside (0, pi/3)")
    return numerator / bound


def overlap_distribution(
    decomp: SpectralDecomposition,
    state: StateVector,
    tau: float,
    weight_floor: float = 1e-14,
) -> SpectralMeasure:
    """Spectral measure of `state`: weight p_k = |<eigenspace_k|state>|^2 at
    position tau*lambda_k.  Atoms below `weight_floor` are dropped; if the
    dropped mass exceeds 1e-12 the call fails rather than renormalizing."""
    amp = decomp.project_state(state)
    weights = np.array([np.linalg.norm(g.conj().T @ amp) ** 2 for g in decomp.groups])
    positions = tau * decomp.eigenvalues

    visible = weights >= weight_floor
    if np.any((np.abs(positions) >= RESCALING_LIMIT) & visible):
        raise HamiltonianError("rescaling violated: tau*|lambda| >= pi/3 carries weight")
    dropped = weights[~visible].sum() + (1.0 - weights.sum())
    if abs(dropped) > 1e-12:
        raise HamiltonianError(
            f"dropped weight {dropped:.3e} exceeds 1e-12; state leaks outside the decomposition"
        )
    return SpectralMeasure(positions[visible], weights[visible])


# ---------------------------------------------------------------------------
# Hartree-Fock initial state
# ---------------------------------------------------------------------------


def single_particle_hopping(spec: HubbardSpec) -> np.ndarray:
    h = np.zeros((spec.sites, spec.sites))
    for a, b in _bonds(spec):
        h[a, b] = h[b, a] = -spec.t
    return h


def hartree_fock_state(spec: HubbardSpec, degeneracy_tol: float = 1e-10) -> StateVector:
    """Slater determinant of the lowest U=0 orbitals at the given filling.

    Amplitudes on each occupation pattern are determinants of the occupied
    orbital components, which encodes every Jordan-Wigner sign exactly.  A
    degenerate Fermi level is an error: an arbitrary tie-break would
    silently change the ground-state overlap.
    """
    if spec.filling is None:
        raise HamiltonianError("hartree_fock_state needs spec.filling")
    n_up, n_dn = spec.filling
    evals, orbitals = np.linalg.eigh(single_particle_hopping(spec))
    for label, n_occ in (("up", n_up), ("down", n_dn)):
        if 0 < n_occ < spec.sites and evals[n_occ] - evals[n_occ - 1] < degeneracy_tol:
            raise HamiltonianError(
                f"degenerate Fermi level for spin {label}: orbitals {n_occ - 1} and {n_occ} "
                f"(energies {evals[n_occ - 1]:.6g}, {evals[n_occ]:.6g}); perturb t or change filling"
            )

    n = spec.n_qubits
    chi = np.zeros((n, n_up + n_dn))
    for a in range(n_up):
        chi[0::2, a] = orbitals[:, a]
    for b in range(n_dn):
        chi[1::2, n_up + b] = orbitals[:, b]

    psi = np.zeros(1 << n, dtype=complex)
    up_orbs = [spin_orbital(j, 0) for j in range(spec.sites)]
    dn_orbs = [spin_orbital(j, 1) for j in range(spec.sites)]
    for ups in itertools.combinations(up_orbs, n_up):
        for dns in itertools.combinations(dn_orbs, n_dn):
            occupied = sorted(ups + dns)
            index = sum(1 << q for q in occupied)
            psi[index] = np.linalg.det(chi[occupied, :])
    return StateVector(psi)
