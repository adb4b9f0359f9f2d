"""Accurate initial conditions for linear higher-index DAEs.

The package computes matrices ``G`` whose nullspace is the canonical
subspace ``N_can`` of a regular linear DAE, using discrete differentiation
of the adjoint coefficients, and uses them as transfer conditions in a
windowed least-squares collocation solver.
"""

from .collocation import (
    AssembledLsq,
    PiecewisePolySolution,
    WindowGrid,
    assemble,
    build_grid,
    eval_Dx_prime,
    hd1_error,
    solve_window,
)
from .errors import (
    AicError,
    ConfigurationError,
    ContractViolation,
    DegenerateInputError,
    DomainError,
    InconsistencyError,
    NonRegularError,
    RankDropError,
    SingularWindowError,
    UnderdeterminedError,
)
from .matfun import (
    DaePair,
    MatrixFunction,
    SampledMatrixStack,
    SampledPair,
    adjoint_pair,
    manufacture_rhs,
    standard_form,
)
from .problems import ProblemBundle, campbell_moore, chua_riaza, get_problem, kcf_index2
from .reduction import (
    ReductionConfig,
    ReductionOutcome,
    accurate_ic_matrix,
    cbasis,
    flow_subspace,
    gap_to_reference,
    transfer_compat,
)
from .specdiff import (
    DiffKind,
    DiffOperator,
    NodeFamily,
    apply,
    barycentric_weights,
    build_operator,
    diff_matrix_interp,
    diff_matrix_lsq,
    make_nodes,
    norm_bound_report,
)
from .stepper import IvpConfig, IvpSolution, global_error, solve_ivp
from .subspace import (
    BasisStrategy,
    RankPolicy,
    SmoothBasisTrack,
    SubspaceBasis,
    corange_basis,
    nullspace_basis,
    opening,
    qr_fixed_pivot,
    range_basis,
    rank_of,
    smooth_basis_svd_ode,
)

__version__ = "0.1.0"
