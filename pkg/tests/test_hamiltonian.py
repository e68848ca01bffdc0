import math

import numpy as np
import pytest

import gsee
from gsee import hamiltonian as ham


def test_rejects_single_site():
    with pytest.raises(ham.HamiltonianError):
        gsee.HubbardSpec(1)


def test_rejects_overfilled():
    with pytest.raises(ham.HamiltonianError):
        gsee.HubbardSpec(2, filling=(3, 1))


def test_qubit_guard():
    with pytest.raises(ham.HamiltonianError, match="guard"):
        gsee.build_hubbard(gsee.HubbardSpec(11))


def test_two_site_single_particle_block():
    # Hopping chain of two sites: one-particle energies are -t and +t,
    # read off the number == 1 block of the 16x16 matrix.
    H = gsee.build_hubbard(gsee.HubbardSpec(2, t=1.0, u=0.0))
    dense = H.to_dense()
    idx = np.arange(16)
    sel = idx[np.bitwise_count(idx) == 1]
    evals = np.linalg.eigvalsh(dense[np.ix_(sel, sel)])
    assert np.allclose(sorted(set(np.round(evals, 12))), [-1.0, 1.0])


def test_hermiticity_exact(hub4):
    resid = hub4.H.matrix - hub4.H.matrix.conjugate().T
    assert abs(resid).max() == 0.0


def test_number_commutation(hub4):
    # [H, N] = 0 justifies working in fixed particle-number sectors.
    n_diag = ham.jw_number_diagonal(hub4.H.n_qubits)
    coo = hub4.H.matrix.tocoo()
    comm = coo.data * (n_diag[coo.row] - n_diag[coo.col])
    assert np.linalg.norm(comm) < 1e-10


def test_four_site_reconstruction_and_ground(hub4):
    dense = hub4.H.to_dense()
    rebuilt = np.zeros_like(dense)
    for lam, group in zip(hub4.decomposition.eigenvalues, hub4.decomposition.groups):
        rebuilt += lam * (group @ group.conj().T)
    rel = np.linalg.norm(rebuilt - dense) / np.linalg.norm(dense)
    assert rel < 1e-8
    assert abs(hub4.ground_energy - np.linalg.eigvalsh(dense)[0]) < 1e-10


def test_group_orthonormality(hub4):
    for group in hub4.decomposition.groups:
        gram = group.conj().T @ group
        assert np.max(np.abs(gram - np.eye(group.shape[1]))) < 1e-10


def test_degeneracy_grouping_merges():
    def diag_system(values):
        dim = len(values)
        return gsee.SparseHermitian.from_triplets(
            dim, np.arange(dim), np.arange(dim), np.asarray(values, dtype=complex)
        )

    d = gsee.spectral_decompose(diag_system([0.0, 0.0, 1.0, 2.0]), degeneracy_tol=1e-9)
    assert [g.shape[1] for g in d.groups] == [2, 1, 1]
    assert np.allclose(d.eigenvalues, [0.0, 1.0, 2.0])

    d = gsee.spectral_decompose(diag_system([0.0, 1e-12, 1.0, 2.0]), degeneracy_tol=1e-9)
    assert [g.shape[1] for g in d.groups] == [2, 1, 1]


def test_hf_exact_at_u0():
    spec = gsee.HubbardSpec.half_filling(2, u=0.0)
    H = gsee.build_hubbard(spec)
    decomp = gsee.spectral_decompose(H)
    hf = gsee.hartree_fock_state(spec)
    tau = gsee.select_tau(bound=decomp.spectral_radius)
    measure = gsee.overlap_distribution(decomp, hf, tau)
    assert measure.n_atoms == 1
    assert abs(measure.weights[0] - 1.0) < 1e-12


def test_hf_degenerate_fermi_level_errors():
    # 3-site ring at U=0 has single-particle levels {-2t, t, t}; filling the
    # second orbital hits the degenerate pair.
    spec = gsee.HubbardSpec(3, boundary="periodic", filling=(2, 1))
    with pytest.raises(ham.HamiltonianError, match="degenerate Fermi level"):
        gsee.hartree_fock_state(spec)


def test_hf_overlap_recorded_4site(hub4):
    # Frozen oracle value: ground-state overlap of the half-filled 4-site
    # U/t=4 Hartree-Fock state, from dense diagonalization.
    assert abs(hub4.measure.weights[0] - 0.7160274252182433) < 1e-9
    assert abs(hub4.measure.weights.sum() - 1.0) < 1e-10


def test_overlap_distribution_eigenstate(hub4):
    ground = gsee.StateVector(hub4.decomposition.ground_vector())
    m = gsee.overlap_distribution(hub4.decomposition, ground, hub4.tau)
    assert m.n_atoms == 1
    assert abs(m.positions[0] - hub4.tau * hub4.ground_energy) < 1e-12
    assert abs(m.weights[0] - 1.0) < 1e-12


def test_overlap_distribution_orthogonal_state(hub4):
    excited = hub4.decomposition.groups[3][:, 0]
    m = gsee.overlap_distribution(hub4.decomposition, gsee.StateVector(excited), hub4.tau)
    assert abs(m.positions[0] - hub4.tau * hub4.decomposition.eigenvalues[3]) < 1e-12
    assert m.positions[0] > hub4.tau * hub4.ground_energy


def test_overlap_weights_tau_independent(hub4):
    m1 = gsee.overlap_distribution(hub4.decomposition, hub4.hf, hub4.tau)
    m2 = gsee.overlap_distribution(hub4.decomposition, hub4.hf, hub4.tau / 3.0)
    assert np.array_equal(m1.weights, m2.weights)
    assert np.allclose(m2.positions * 3.0, m1.positions, atol=1e-15)


def test_overlap_rescaling_violation(hub4):
    with pytest.raises(ham.HamiltonianError, match="rescaling"):
        gsee.overlap_distribution(hub4.decomposition, hub4.hf, 10.0 * hub4.tau)


def test_select_tau_values(hub2):
    assert abs(gsee.select_tau(bound=4.0) - math.pi / 16.0) < 1e-15
    assert abs(gsee.select_tau(bound=math.pi / 4.0) - 1.0) < 1e-15
    # looser bound -> smaller tau, still valid
    t1 = gsee.select_tau(bound=5.0)
    t2 = gsee.select_tau(bound=7.0)
    assert t2 < t1
    radius = hub2.decomposition.spectral_radius
    assert gsee.select_tau(hub2.H) * radius <= math.pi / 4.0 + 1e-12
    with pytest.raises(ham.HamiltonianError):
        gsee.select_tau(bound=-1.0)
    with pytest.raises(ham.HamiltonianError):
        gsee.select_tau(bound=2.0, policy=math.pi)


def test_sector_decompose_matches_full(hub4):
    sector = ham.sector_decompose(hub4.H, hub4.spec)
    m_full = hub4.measure
    m_sector = gsee.overlap_distribution(sector, hub4.hf, hub4.tau)
    assert np.allclose(m_full.positions, m_sector.positions, atol=1e-9)
    assert np.allclose(m_full.weights, m_sector.weights, atol=1e-9)
    block = hub4.H.matrix[sector.support][:, sector.support].toarray()
    rebuilt = np.zeros_like(block)
    for lam, group in zip(sector.eigenvalues, sector.groups):
        rebuilt += lam * (group @ group.conj().T)
    assert np.linalg.norm(rebuilt - block) / np.linalg.norm(block) < 1e-8


def test_triplet_roundtrip(tmp_path, hub2):
    path = tmp_path / "h.txt"
    hub2.H.save(path)
    loaded = gsee.SparseHermitian.load(path)
    assert loaded.dim == hub2.H.dim
    assert abs(loaded.matrix - hub2.H.matrix).max() == 0.0


def test_from_triplets_rejects_lower_triangle():
    with pytest.raises(ham.HamiltonianError):
        gsee.SparseHermitian.from_triplets(2, [1], [0], [1.0 + 0j])


def test_state_vector_norm_guard():
    with pytest.raises(ham.HamiltonianError):
        gsee.StateVector(np.array([1.0, 1.0], dtype=complex))


def test_spectral_measure_invariants():
    with pytest.raises(ham.HamiltonianError):
        gsee.SpectralMeasure(np.array([0.2, 0.1]), np.array([0.5, 0.5]))
    with pytest.raises(ham.HamiltonianError):
        gsee.SpectralMeasure(np.array([0.1]), np.array([0.9]))
    with pytest.raises(ham.HamiltonianError):
        gsee.SpectralMeasure(np.array([1.2]), np.array([1.0]))


@pytest.mark.slow
def test_8site_hf_overlap_near_published_value():
    spec = gsee.HubbardSpec.half_filling(8, u=4.0)
    H = gsee.build_hubbard(spec)
    decomp = ham.sector_decompose(H, spec)
    hf = gsee.hartree_fock_state(spec)
    tau = gsee.select_tau(bound=ham.spectral_radius(H))
    measure = gsee.overlap_distribution(decomp, hf, tau)
    # published as "around 0.4"
    assert 0.3 < measure.weights[0] < 0.5
