"""Simulation and analysis toolkit for a flux-tunable cos(2phi) transmon.

The package builds the effective two-loop circuit Hamiltonian in a truncated
charge basis, reproduces spectroscopy observables, fits junction energies to
two-tone data, computes flux-dependent energy-relaxation budgets over six
noise channels (including an N-level rate-matrix model), calibrates flux
cross-talk from raw current-sweep heatmaps, and runs the same noise model on
a reference fluxonium for comparison.
"""

from .constants import CONSTANTS, PhysicalConstants
from .circuit import (
    CircuitParams,
    EffectiveArm,
    EigenSystem,
    FluxBias,
    JunctionSet,
    build_hamiltonian,
    diagonalize,
    effective_arm,
    eigensystem,
    internal_mode_epr,
    operator_matrix_element,
    potential_harmonics,
    small_squid,
    sns_epr,
    total_potential,
)
from .fourier import PeriodicPotential, fourier_decompose
from .spectra import (
    FitResult,
    ResonatorParams,
    SpectroscopyDataset,
    fit_spectrum,
    resonator_shift,
    transition_spectrum_sweep,
)
from .noise import NoiseConfig, T1Budget, golden_rule_rate, purcell_rate, t1_budget, t1_sweep
from .multilevel import RateMatrix, build_rate_matrix, effective_t1, evolve_populations
from .calibration import (
    CrosstalkMatrix,
    Heatmap,
    apply_crosstalk,
    detect_lattice,
    lattice_to_matrix,
    rebase_flux,
    recover_crosstalk,
)
from .fluxonium import (
    FluxoniumParams,
    build_fluxonium,
    fluxonium_eigensystem,
    fluxonium_matrix_element,
    fluxonium_t1_budget,
)

__version__ = "0.1.0"
