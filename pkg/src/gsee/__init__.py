"""Ground-state energy estimation by filtered spectral CDF inversion."""

from .hamiltonian import (
    HubbardSpec,
    SparseHermitian,
    SpectralDecomposition,
    SpectralMeasure,
    StateVector,
    build_hubbard,
    hartree_fock_state,
    hubbard_terms,
    overlap_distribution,
    sector_decompose,
    select_tau,
    spectral_decompose,
)
from .filters import (
    FourierFilter,
    Mollifier,
    build_filter,
    build_mollifier,
    certified_degree,
    certified_filter,
    filter_value,
    heaviside_fourier_coeff,
    heuristic_degree,
    mollifier_fourier_coeffs,
    mollifier_value,
)
from .sampler import (
    CircuitSample,
    ControlFreeSample,
    ExactBackend,
    TrotterBackend,
    evolve,
    expectation_phase,
    sample_xy,
    sample_z,
    sample_z_control_free,
    trotter_steps_required,
)
from .acdf import (
    JDistribution,
    SampleBatch,
    build_j_distribution,
    exact_acdf,
    exact_cdf,
    g_bar,
    g_term,
    required_samples,
    sample_j,
)
from .search import (
    EstimationConfig,
    EstimationReport,
    SearchTrace,
    certify,
    derive_parameters,
    estimate_ground_energy,
    heuristic_estimate,
    invert_cdf,
)
from .baselines import CostReport, QpeOutcomeDistribution, cost_model, qpe_distribution, qpe_min_estimate

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
