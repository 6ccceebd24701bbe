"""Two-qubit spin-boson simulator.

Two independent backends solve the same model at arbitrary system-bath
coupling: a numerically exact hierarchy of auxiliary operators and a
reaction-coordinate master equation.  On top of either sit the coherence,
distinguishability and quantum-thermodynamics observables, and a batch CLI
(`sb2q`) drives parameter studies.  Units: hbar = k_B = 1.
"""

__version__ = "0.1.0"

from .bath import BathExpansion, BathSpec, correlation_expansion, correlation_oracle, spectral_density
from .config import ModelConfig, NumericsConfig, build_config
from .heom import (
    TrajectoryRecord,
    assemble_liouvillian,
    first_tier_expectation,
    heom_rhs,
    propagate,
    steady_state,
)
from .hierarchy import Hierarchy, build_hierarchy
from .observables import (
    NessReport,
    bath_side_current,
    blp_witness,
    build_ness_report,
    entropy_production,
    heat_current_j21,
    l1_coherence,
    spin_current_j12,
    trace_distance,
    von_neumann_entropy,
)
from .qops import build_system_hamiltonian, hermitian_log, partial_trace, pauli
from .rcm import (
    RcParams,
    build_rc_dissipator,
    build_rc_params,
    build_supersystem,
    map_rc_parameters,
    rcm_propagate,
)

__all__ = [
    "BathExpansion",
    "BathSpec",
    "Hierarchy",
    "ModelConfig",
    "NessReport",
    "NumericsConfig",
    "RcParams",
    "TrajectoryRecord",
    "assemble_liouvillian",
    "bath_side_current",
    "blp_witness",
    "build_config",
    "build_hierarchy",
    "build_ness_report",
    "build_rc_dissipator",
    "build_rc_params",
    "build_supersystem",
    "build_system_hamiltonian",
    "correlation_expansion",
    "correlation_oracle",
    "entropy_production",
    "first_tier_expectation",
    "heat_current_j21",
    "heom_rhs",
    "hermitian_log",
    "l1_coherence",
    "map_rc_parameters",
    "partial_trace",
    "pauli",
    "propagate",
    "rcm_propagate",
    "spectral_density",
    "spin_current_j12",
    "steady_state",
    "trace_distance",
    "von_neumann_entropy",
]
