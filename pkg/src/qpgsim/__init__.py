"""Single-pulse quantum phase gates: trapped ions and a two-mode cavity.

Submodules
----------
core        tensor-product spaces, operators, states, exact propagators
special     Laguerre polynomials, Lamb-Dicke factors, quadrature exponential
ion_gate    effective ion Hamiltonian, Stark compensation, the phase gate
ion_full    time-dependent two-ion model used to validate the effective one
cavity      effective two-photon model and the three-level full model
gates       ideal gates, QPG -> CNOT recipe, local-phase equivalence
cli         the ``qpgsim`` command
"""

from .cavity import CavityParams, build_cavity_effective, build_three_level_full, cavity_qpg, effective_omega, validate_adiabatic
from .core import HilbertSpace, Operator, StateVector, expm_unitary, fock, qubit, atom3, state_fidelity, subspace_overlap
from .errors import (
    ConvergenceError,
    GateQualityError,
    HermiticityError,
    InvalidTruncationError,
    NotAProjectorError,
    ParameterError,
    PreconditionError,
    QpgError,
    RecipeMismatchError,
    SpaceMismatchError,
)
from .gates import TwoQubitGate, cnot_from_qpg, equal_up_to_local_phases, hadamard_rotation, ideal_cnot, ideal_qpg
from .ion_full import FullIonParams, dispersive_sweep, propagate, validate_effective
from .ion_gate import IonGateParams, build_effective_hamiltonian, omega_eff, qpg_unitary, stark_compensation, three_qubit_view
from .special import LambDickeContext, f_factor, laguerre, quadrature_exponential

__version__ = "0.1.0"

__all__ = [
    "CavityParams", "build_cavity_effective", "build_three_level_full", "cavity_qpg", "effective_omega",
    "validate_adiabatic", "HilbertSpace", "Operator", "StateVector", "expm_unitary", "fock", "qubit", "atom3",
    "state_fidelity", "subspace_overlap", "ConvergenceError", "GateQualityError", "HermiticityError",
    "InvalidTruncationError", "NotAProjectorError", "ParameterError", "PreconditionError", "QpgError",
    "RecipeMismatchError", "SpaceMismatchError", "TwoQubitGate", "cnot_from_qpg", "equal_up_to_local_phases",
    "hadamard_rotation", "ideal_cnot", "ideal_qpg", "FullIonParams", "dispersive_sweep", "propagate",
    "validate_effective", "IonGateParams", "build_effective_hamiltonian", "omega_eff", "qpg_unitary",
    "stark_compensation", "three_qubit_view", "LambDickeContext", "f_factor", "laguerre",
    "quadrature_exponential",
]
