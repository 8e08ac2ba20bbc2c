"""Transmission eigenvalues of the Helmholtz problem on square-cell meshes.

The fourth-order interior transmission eigenproblem is discretized in a
mixed form over a C1 bicubic Hermite space paired with a biquadratic
Lagrange space, giving a real generalized pencil ``lam A x = B x`` with
``k = 1 / sqrt(lam)``.  Eigenvalues are computed either directly on one
grid or by a two-grid scheme: a coarse eigensolve followed by two fine
linear solves sharing a single factorization and a generalized Rayleigh
quotient.
"""

from .assembly import (
    BlockSystem,
    DofMap,
    MatrixKind,
    Space,
    assemble_block_system,
    assemble_matrix,
    build_dofmap,
    write_matrix_market,
)
from .coefficients import (
    Constant,
    LinearTilt,
    Radial,
    RefractiveIndex,
    eval_n,
    eval_weight,
    index_from_name,
)
from .eigensolver import (
    EigenPair,
    EigensolverError,
    SpectrumRequest,
    apply_shift_invert,
    dense_solve_pencil,
    k_from_lam,
    solve_pencil,
)
from .elements import (
    BfsBasisEval,
    Q2BasisEval,
    QuadratureRule,
    bfs_eval,
    gauss_rule,
    q2_eval,
)
from .harness import StudyConfig, StudyRecord, estimate_order, run_study
from .mesh import DomainKind, StructuredMesh, build_mesh, dump_mesh, refine
from .report import emit_report
from .twogrid import (
    Prolongation,
    TwoGridControls,
    TwoGridError,
    TwoGridResult,
    build_prolongation,
    rayleigh_quotient,
    two_grid_solve,
)

__version__ = "0.1.0"

__all__ = [
    "BfsBasisEval",
    "BlockSystem",
    "Constant",
    "DofMap",
    "DomainKind",
    "EigenPair",
    "EigensolverError",
    "LinearTilt",
    "MatrixKind",
    "Prolongation",
    "Q2BasisEval",
    "QuadratureRule",
    "Radial",
    "RefractiveIndex",
    "Space",
    "SpectrumRequest",
    "StructuredMesh",
    "StudyConfig",
    "StudyRecord",
    "TwoGridControls",
    "TwoGridError",
    "TwoGridResult",
    "apply_shift_invert",
    "assemble_block_system",
    "assemble_matrix",
    "bfs_eval",
    "build_dofmap",
    "build_mesh",
    "build_prolongation",
    "dense_solve_pencil",
    "dump_mesh",
    "emit_report",
    "estimate_order",
    "eval_n",
    "eval_weight",
    "gauss_rule",
    "index_from_name",
    "k_from_lam",
    "q2_eval",
    "rayleigh_quotient",
    "refine",
    "run_study",
    "solve_pencil",
    "two_grid_solve",
    "write_matrix_market",
]
