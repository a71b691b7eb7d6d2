"""shadowrdm: 2-RDM reconstruction from randomized pair-occupation
measurements under D/Q/G N-representability constraints."""

from .fci import (DeterminantBasis, FCISolution, TwoRDM, compute_2rdm,
                  contract_to_1rdm, solve_system)
from .hamiltonians import (MolecularIntegrals, ReducedHamiltonian,
                           hubbard_chain, hydrogen_chain_sto3g, parse_fcidump,
                           reduced_hamiltonian, system_from_key, write_fcidump)
from .numerics import RngStream
from .rdm_sdp import (ConditionSet, RdmResult, SDPProblem, SDPSolution,
                      SolverOptions, SolverStatus, frobenius_error, sv2rdm,
                      v2rdm)
from .shadows import (ShadowRecord, SpinRotationMode, add_gaussian_noise,
                      generate_shadow, rotate_2rdm, sample_shadow_ensemble)

__version__ = "0.1.0"

__all__ = [
    "ConditionSet", "DeterminantBasis", "FCISolution", "MolecularIntegrals",
    "RdmResult", "ReducedHamiltonian", "RngStream", "SDPProblem",
    "SDPSolution", "ShadowRecord", "SolverOptions", "SolverStatus",
    "SpinRotationMode", "TwoRDM", "add_gaussian_noise", "compute_2rdm",
    "contract_to_1rdm", "frobenius_error", "generate_shadow", "hubbard_chain",
    "hydrogen_chain_sto3g", "parse_fcidump", "reduced_hamiltonian",
    "rotate_2rdm", "sample_shadow_ensemble", "solve_system", "sv2rdm",
    "system_from_key", "v2rdm", "write_fcidump",
]
