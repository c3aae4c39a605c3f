"""Dynamical invariants of Lindblad dynamics and decoherence-free subspaces.

The package propagates states and invariants of small open quantum systems,
finds decoherence-free subspaces (DFSs), splits invariants into DFS and
complement blocks, and reproduces the closed-form two-qubit collective
dephasing solution.
"""

from .blocks import (BlockInvariant, BlockModel, assemble_invariant, complement_eigenflow,
                     propagate_IC, propagate_ID, verify_full_invariant)
from .dephasing import (BlochCoefficients, DephasingScenario, analytic_IC, analytic_ID,
                        build_two_qubit_model, compare_analytic_numeric,
                        riccati_solve_second_order)
from .dfs import (BasisTrajectory, DfsDecomposition, block_decompose, compute_G,
                  compute_Heff, find_static_dfs, make_decomposition)
from .errors import (ConfigError, IntegrationQualityError, NotADfsError, QinvError,
                     RejectedInputError, SingularScheduleError, UnsupportedModelError)
from .lindblad import (InvariantTrajectory, LindbladModel, StateTrajectory,
                       apply_adjoint_generator, apply_liouvillian, eigenflow,
                       expectation_series, invariant_residual, propagate_batch,
                       propagate_invariant, propagate_state)
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, spectral_decompose, tensor_product
from .schedules import Schedule

__version__ = "0.1.0"

__all__ = [
    "BasisTrajectory", "BlochCoefficients", "BlockInvariant", "BlockModel", "ConfigError",
    "DephasingScenario", "DfsDecomposition", "IntegrationQualityError", "InvariantTrajectory",
    "LindbladModel", "NotADfsError", "QinvError", "RejectedInputError", "SIGMA_X", "SIGMA_Y",
    "SIGMA_Z", "Schedule", "SingularScheduleError", "StateTrajectory",
    "UnsupportedModelError", "analytic_IC", "analytic_ID", "apply_adjoint_generator",
    "apply_liouvillian", "assemble_invariant", "block_decompose", "build_two_qubit_model",
    "compare_analytic_numeric", "complement_eigenflow", "compute_G", "compute_Heff",
    "eigenflow", "expectation_series", "find_static_dfs", "invariant_residual",
    "make_decomposition", "propagate_IC", "propagate_ID", "propagate_batch",
    "propagate_invariant", "propagate_state", "riccati_solve_second_order",
    "spectral_decompose", "tensor_product", "verify_full_invariant",
]
