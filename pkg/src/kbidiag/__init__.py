"""Lower Lanczos (Golub-Kahan) bidiagonalization with reorthogonalization,
backward-error diagnostics, partial SVD, and LSQR."""

from .bidiag import BidiagFactorization, Status, StepRecord, init, run, step
from .diagnostics import (
    DiagnosticsTrace,
    local_orthogonality_trace,
    orthogonality_level,
    pairwise_level,
    singular_value_window,
    trace_run,
)
from .errors import ConvergenceError, DimensionError, InvalidInput, StateError
from .householder import (
    BackwardErrorReport,
    ReflectorChain,
    StructureReport,
    apply_chain,
    chain_from_factorization,
    compute_Xk,
    exact_equivalence_residual,
    structure_report,
)
from .linops import (
    DenseOperator,
    LinearOperator,
    PrecisionMode,
    SparseOperator,
    adjoint_matvec,
    as_operator,
    clustered_spectrum_matrix,
    dense_svd,
    diagonal_operator,
    identity_operator,
    matvec,
    random_dense,
    rank_one_operator,
    spectral_norm,
)
from .lsqr import LsqrResult, lsqr_solve, oracle_gap, projected_solve
from .reorth import OmegaEstimate, ReorthPolicy, orthogonalize, select_targets
from .svdapprox import (
    ConvergenceHistory,
    RitzDecomposition,
    bidiag_svd,
    multiplicity_gap,
    ritz_triplets,
    track_convergence,
)

__version__ = "0.1.0"
