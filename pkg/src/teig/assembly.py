"""Degree-of-freedom maps and sparse assembly of the coupled system.

Over a mesh two spaces are discretized:

* ``Space.BFS`` - the C1 bicubic Hermite space with homogeneous clamped
  boundary conditions (all four DOF kinds are constrained at boundary
  nodes, since u = du/dnu = 0 on an axis-aligned boundary forces the
  value, both first derivatives and the mixed derivative to vanish);
* ``Space.Q2`` - the biquadratic Lagrange space with homogeneous
  Dirichlet conditions (boundary corner and edge-midpoint nodes are
  constrained; cell centers never are).

Constrained DOFs are eliminated: assembled matrices act on free DOFs only,
numbered consecutively in entity order (nodes, then edges, then cells).

Six matrices are assembled over these spaces; writing ``(u, v)_w`` for the
integral of ``u * v / (n - 1)`` they are::

    A1[i, j] = (lap phi_j, lap phi_i)_w     stiffness, BFS x BFS
    A2[i, j] = (grad psi_j, grad psi_i)     stiffness, Q2 x Q2
    S1[i, j] = (phi_j, lap phi_i)_w         BFS x BFS
    S2[i, j] = (lap phi_j, n phi_i)_w       BFS x BFS
    R[i, j]  = (grad psi_j, grad phi_i)     Q2 trial, BFS test
    M[i, j]  = (n phi_j, psi_i)_w           BFS trial, Q2 test

and combined into the block pencil ``lam * A x = B x`` with

    A = [[A1, 0], [0, A2]],    B = -[[S1 + S2, -R], [M, 0]].

A is symmetric positive definite; B is nonsymmetric, so eigenvalues may
be complex.  The discrete sesquilinear forms are ``a(x, y) = y^H A x``
and ``b(x, y) = y^H B x`` (conjugate-linear in the second argument).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from numpy.typing import NDArray

from .coefficients import MIN_CONTRAST, RefractiveIndex
from .elements import QuadratureRule, bfs_dof_scale, bfs_tabulate, gauss_rule, q2_tabulate
from .mesh import StructuredMesh

DEFAULT_QUAD_ORDER = 6


class Space(enum.Enum):
    BFS = "bfs"
    Q2 = "q2"


class MatrixKind(enum.Enum):
    A1 = "A1"
    A2 = "A2"
    S1 = "S1"
    S2 = "S2"
    R = "R"
    M = "M"


@dataclass
class DofMap:
    """Mapping from mesh entities to free global DOF indices.

    ``full_to_free`` assigns every candidate DOF (one slot per entity and
    kind, see module docstring) either its free index or -1 when it is
    constrained by the boundary condition.  ``cell_to_free`` gives, per
    cell, the free indices of the local basis functions (-1 for
    constrained ones); local ordering matches the reference elements.
    """

    space: Space
    n_dofs: int
    n_full: int
    full_to_free: NDArray[np.int64]
    cell_to_free: NDArray[np.int64]

    def node_dofs(self) -> NDArray[np.int64]:
        """BFS only: (n_nodes, 4) free indices by node and DOF kind."""
        if self.space is not Space.BFS:
            raise ValueError("node_dofs with 4 kinds is a BFS concept")
        return self.full_to_free.reshape(-1, 4)


def build_dofmap(mesh: StructuredMesh, space: Space) -> DofMap:
    """Number the free DOFs of ``space`` on ``mesh``.

    Raises if the boundary conditions constrain everything (mesh too
    coarse to carry the space).
    """
    if space is Space.BFS:
        full = np.repeat(~mesh.node_is_boundary, 4)
        full_to_free = np.where(full, np.cumsum(full) - 1, -1).astype(np.int64)
        n_dofs = int(full.sum())
        # local DOF 4*a + k lives at node cells[c, a], kind k
        full_idx = (4 * mesh.cells[:, :, None] + np.arange(4)).reshape(mesh.n_cells, 16)
        cell_to_free = full_to_free[full_idx]
    else:
        edge_lookup = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}
        free = np.concatenate(
            [
                ~mesh.node_is_boundary,
                ~mesh.edge_is_boundary,
                np.ones(mesh.n_cells, dtype=bool),
            ]
        )
        full_to_free = np.where(free, np.cumsum(free) - 1, -1).astype(np.int64)
        n_dofs = int(free.sum())
        n_n, n_e = mesh.n_nodes, mesh.n_edges
        cell_to_free = np.empty((mesh.n_cells, 9), dtype=np.int64)
        for c, (n00, n10, n11, n01) in enumerate(mesh.cells):
            def eid(a, b):
                return edge_lookup[(a, b) if a < b else (b, a)]

            local_full = (
                n00, n10, n11, n01,
                n_n + eid(n00, n10),   # bottom
                n_n + eid(n10, n11),   # right
                n_n + eid(n01, n11),   # top
                n_n + eid(n00, n01),   # left
                n_n + n_e + c,         # center
            )
            cell_to_free[c] = full_to_free[list(local_full)]

    if n_dofs == 0:
        raise ValueError(
            f"{space.value} space has no free DOFs on this mesh "
            f"(cells_per_unit={mesh.cells_per_unit}); refine the mesh"
        )
    return DofMap(
        space=space,
        n_dofs=n_dofs,
        n_full=len(full_to_free),
        full_to_free=full_to_free,
        cell_to_free=cell_to_free,
    )


@lru_cache(maxsize=8)
def _tables(order: int):
    """Reference basis tabulations at the Gauss points of ``order``."""
    rule = gauss_rule(order)
    bfs = bfs_tabulate(rule.points)
    q2 = q2_tabulate(rule.points)
    return rule, bfs, q2


def _cell_quad_points(mesh: StructuredMesh, rule: QuadratureRule) -> NDArray[np.float64]:
    """Physical quadrature points, shape (n_cells, n_q, 2)."""
    s = mesh.side
    ox, oy = mesh.domain.origin
    origins = np.empty((mesh.n_cells, 2))
    origins[:, 0] = ox + mesh.cell_ij[:, 0] * s
    origins[:, 1] = oy + mesh.cell_ij[:, 1] * s
    return origins[:, None, :] + (rule.points[None, :, :] + 1.0) * (s / 2.0)


def _weights(mesh: StructuredMesh, index: RefractiveIndex, rule: QuadratureRule):
    """n, 1/(n-1) and n/(n-1) at all physical quadrature points."""
    n = index.n(_cell_quad_points(mesh, rule))
    if np.any(n <= 1.0 + MIN_CONTRAST):
        raise ValueError("refractive index too close to 1 on a quadrature point")
    w = 1.0 / (n - 1.0)
    return n, w, n * w


def _scatter(e_cells, rows_cells, cols_cells, shape):
    """Sum per-cell element matrices into a CSR matrix, dropping -1 DOFs."""
    n_c, n_i, n_j = e_cells.shape
    rows = np.repeat(rows_cells, n_j, axis=1).ravel()
    cols = np.tile(cols_cells, (1, n_i)).ravel()
    vals = e_cells.ravel()
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape)
    return mat.tocsr()


def assemble_matrix(
    kind: MatrixKind,
    mesh: StructuredMesh,
    index: RefractiveIndex,
    dofmaps: tuple[DofMap, DofMap],
    rule: QuadratureRule | None = None,
) -> sp.csr_matrix:
    """Assemble one of the six matrices over free DOFs.

    ``dofmaps`` is the (BFS, Q2) pair built on the same mesh.  The
    quadrature rule defaults to the order-6 tensor Gauss rule, which is
    exact for the polynomial part of every integrand here.
    """
    dof_b, dof_q = dofmaps
    if dof_b.space is not Space.BFS or dof_q.space is not Space.Q2:
        raise ValueError("dofmaps must be the (BFS, Q2) pair")
    if dof_b.cell_to_free.shape[0] != mesh.n_cells or dof_q.cell_to_free.shape[0] != mesh.n_cells:
        raise ValueError("dofmaps were built on a different mesh")
    if rule is None:
        rule = gauss_rule(DEFAULT_QUAD_ORDER)
    order = int(round(np.sqrt(len(rule.weights))))
    _, bfs, q2 = _tables(order)
    qw = rule.weights

    s = mesh.side
    dscale = bfs_dof_scale(s)
    lap = bfs["dxx"] + bfs["dyy"]  # reference Laplacian, scales by (2/s)^2

    # Net factors: area element (s/2)^2 combined with the derivative
    # scalings of each slot (see module docstring for the integrands).
    if kind in (MatrixKind.A1, MatrixKind.S1, MatrixKind.S2, MatrixKind.M):
        _, w, wn = _weights(mesh, index, rule)

    if kind is MatrixKind.A1:
        e = np.einsum("cq,qi,qj->cij", qw * w, lap, lap) * (2.0 / s) ** 2
        e *= np.outer(dscale, dscale)
        e = 0.5 * (e + e.transpose(0, 2, 1))
        return _scatter(e, dof_b.cell_to_free, dof_b.cell_to_free,
                        (dof_b.n_dofs, dof_b.n_dofs))
    if kind is MatrixKind.A2:
        e = np.einsum("q,qi,qj->ij", qw, q2["grad_x"], q2["grad_x"])
        e = e + np.einsum("q,qi,qj->ij", qw, q2["grad_y"], q2["grad_y"])
        e = 0.5 * (e + e.T)
        e_cells = np.broadcast_to(e, (mesh.n_cells, 9, 9))
        return _scatter(e_cells, dof_q.cell_to_free, dof_q.cell_to_free,
                        (dof_q.n_dofs, dof_q.n_dofs))
    if kind is MatrixKind.S1:
        e = np.einsum("cq,qi,qj->cij", qw * w, lap, bfs["values"])
        e *= np.outer(dscale, dscale)
        return _scatter(e, dof_b.cell_to_free, dof_b.cell_to_free,
                        (dof_b.n_dofs, dof_b.n_dofs))
    if kind is MatrixKind.S2:
        e = np.einsum("cq,qi,qj->cij", qw * wn, bfs["values"], lap)
        e *= np.outer(dscale, dscale)
        return _scatter(e, dof_b.cell_to_free, dof_b.cell_to_free,
                        (dof_b.n_dofs, dof_b.n_dofs))
    if kind is MatrixKind.R:
        e = np.einsum("q,qi,qj->ij", qw, bfs["grad_x"], q2["grad_x"])
        e = e + np.einsum("q,qi,qj->ij", qw, bfs["grad_y"], q2["grad_y"])
        e = e * dscale[:, None]
        e_cells = np.broadcast_to(e, (mesh.n_cells, 16, 9))
        return _scatter(e_cells, dof_b.cell_to_free, dof_q.cell_to_free,
                        (dof_b.n_dofs, dof_q.n_dofs))
    if kind is MatrixKind.M:
        e = np.einsum("cq,qi,qj->cij", qw * wn, q2["values"], bfs["values"])
        e *= (s / 2.0) ** 2 * dscale[None, None, :]
        return _scatter(e, dof_q.cell_to_free, dof_b.cell_to_free,
                        (dof_q.n_dofs, dof_b.n_dofs))
    raise ValueError(f"unknown matrix kind {kind!r}")


@dataclass
class BlockSystem:
    """The generalized pencil ``lam * A x = B x`` over BFS x Q2 free DOFs."""

    a_mat: sp.csr_matrix
    b_mat: sp.csr_matrix
    dof_bfs: DofMap | None = None
    dof_q2: DofMap | None = None
    mesh: StructuredMesh | None = None
    index: RefractiveIndex | None = None
    _a_lu: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_matrices(cls, a_mat, b_mat) -> BlockSystem:
        """Wrap raw matrices (used by tests and synthetic pencils)."""
        return cls(a_mat=sp.csr_matrix(a_mat), b_mat=sp.csr_matrix(b_mat))

    @property
    def dim(self) -> int:
        return self.a_mat.shape[0]

    @property
    def n_bfs(self) -> int:
        return self.dof_bfs.n_dofs if self.dof_bfs is not None else 0

    def a_form(self, x, y):
        """a(x, y) = y^H A x, conjugate-linear in y."""
        return np.vdot(y, self.a_mat @ x)

    def b_form(self, x, y):
        """b(x, y) = y^H B x, conjugate-linear in y."""
        return np.vdot(y, self.b_mat @ x)

    def a_factor(self):
        """Cached sparse LU factorization of A."""
        if self._a_lu is None:
            from scipy.sparse.linalg import splu

            self._a_lu = splu(self.a_mat.tocsc())
        return self._a_lu


def assemble_block_system(
    mesh: StructuredMesh,
    index: RefractiveIndex,
    rule: QuadratureRule | None = None,
) -> BlockSystem:
    """Assemble the block pencil ``lam * A x = B x`` on ``mesh``.

    The minus sign of the coupled system is folded into the stored B, so
    the same pencil serves the eigensolver, the Rayleigh quotient and the
    two-grid right-hand sides.
    """
    if rule is None:
        rule = gauss_rule(DEFAULT_QUAD_ORDER)
    dof_b = build_dofmap(mesh, Space.BFS)
    dof_q = build_dofmap(mesh, Space.Q2)
    dofmaps = (dof_b, dof_q)

    a1 = assemble_matrix(MatrixKind.A1, mesh, index, dofmaps, rule)
    a2 = assemble_matrix(MatrixKind.A2, mesh, index, dofmaps, rule)
    s1 = assemble_matrix(MatrixKind.S1, mesh, index, dofmaps, rule)
    s2 = assemble_matrix(MatrixKind.S2, mesh, index, dofmaps, rule)
    r = assemble_matrix(MatrixKind.R, mesh, index, dofmaps, rule)
    m = assemble_matrix(MatrixKind.M, mesh, index, dofmaps, rule)

    a_mat = sp.block_diag((a1, a2), format="csr")
    b_mat = -sp.bmat([[s1 + s2, -r], [m, None]], format="csr")
    return BlockSystem(
        a_mat=a_mat, b_mat=b_mat, dof_bfs=dof_b, dof_q2=dof_q, mesh=mesh, index=index
    )


def write_matrix_market(matrix: sp.spmatrix, path: str | Path) -> None:
    """Export a matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))


# ---------------------------------------------------------------------------
# Discrete-field evaluation (testing and diagnostics)

def locate_cell(mesh: StructuredMesh, point) -> int:
    """Index of a cell whose closed square contains ``point``.

    On internal grid lines any incident cell gives the same field values
    for conforming functions; the candidate with the smallest lattice
    coordinates that exists in the mesh is chosen.
    """
    s = mesh.side
    ox, oy = mesh.domain.origin
    n_side = mesh.domain.extent_units * mesh.cells_per_unit
    fx = (float(point[0]) - ox) / s
    fy = (float(point[1]) - oy) / s
    cx0 = min(max(int(np.floor(fx)), 0), n_side - 1)
    cy0 = min(max(int(np.floor(fy)), 0), n_side - 1)
    tol = 1e-12 / s
    xs = [cx0 - 1, cx0] if abs(fx - cx0) <= tol and cx0 > 0 else [cx0]
    ys = [cy0 - 1, cy0] if abs(fy - cy0) <= tol and cy0 > 0 else [cy0]
    for cy in ys:
        for cx in xs:
            hit = mesh.cell_lookup.get((cx, cy))
            if hit is not None:
                return hit
    raise ValueError(f"point {tuple(point)} is outside the mesh")


def _local_coeffs(dofmap: DofMap, coeffs, cell: int):
    idx = dofmap.cell_to_free[cell]
    local = np.where(idx >= 0, np.asarray(coeffs)[np.clip(idx, 0, None)], 0.0)
    return local


def evaluate_bfs(mesh, dofmap: DofMap, coeffs, points, op: str = "value"):
    """Evaluate a BFS field (or a derivative) at physical points.

    ``op`` is one of value, grad_x, grad_y, lap, dxy.  Coefficients are
    over free DOFs; constrained DOFs are zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s = mesh.side
    dscale = bfs_dof_scale(s)
    out = np.empty(len(pts), dtype=np.asarray(coeffs).dtype)
    for i, p in enumerate(pts):
        c = locate_cell(mesh, p)
        cx, cy = mesh.cell_ij[c]
        ref = 2.0 * (p - np.array(mesh.domain.origin) - np.array([cx, cy]) * s) / s - 1.0
        tab = bfs_tabulate(ref.reshape(1, 2))
        local = _local_coeffs(dofmap, coeffs, c) * dscale
        if op == "value":
            out[i] = tab["values"][0] @ local
        elif op == "grad_x":
            out[i] = (2.0 / s) * (tab["grad_x"][0] @ local)
        elif op == "grad_y":
            out[i] = (2.0 / s) * (tab["grad_y"][0] @ local)
        elif op == "lap":
            out[i] = (2.0 / s) ** 2 * ((tab["dxx"][0] + tab["dyy"][0]) @ local)
        elif op == "dxy":
            out[i] = (2.0 / s) ** 2 * (tab["dxy"][0] @ local)
        else:
            raise ValueError(f"unknown op {op!r}")
    return out


def evaluate_q2(mesh, dofmap: DofMap, coeffs, points, op: str = "value"):
    """Evaluate a Q2 field (or a first derivative) at physical points."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s = mesh.side
    out = np.empty(len(pts), dtype=np.asarray(coeffs).dtype)
    for i, p in enumerate(pts):
        c = locate_cell(mesh, p)
        cx, cy = mesh.cell_ij[c]
        ref = 2.0 * (p - np.array(mesh.domain.origin) - np.array([cx, cy]) * s) / s - 1.0
        tab = q2_tabulate(ref.reshape(1, 2))
        local = _local_coeffs(dofmap, coeffs, c)
        if op == "value":
            out[i] = tab["values"][0] @ local
        elif op == "grad_x":
            out[i] = (2.0 / s) * (tab["grad_x"][0] @ local)
        elif op == "grad_y":
            out[i] = (2.0 / s) * (tab["grad_y"][0] @ local)
        else:
            raise ValueError(f"unknown op {op!r}")
    return out
