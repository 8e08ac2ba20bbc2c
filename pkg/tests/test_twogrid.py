"""Prolongation exactness, the Rayleigh quotient and two-grid runs."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import get_physical_k, get_spectrum, get_system
from teig.assembly import BlockSystem, Space, build_dofmap, evaluate_bfs, evaluate_q2
from teig.coefficients import Constant, LinearTilt, Radial, index_from_name
from teig.eigensolver import dense_solve_pencil
from teig.mesh import DomainKind, build_mesh, refine
from teig.twogrid import (
    TwoGridControls,
    TwoGridError,
    build_prolongation,
    physical_pairs,
    rayleigh_quotient,
    select_eigenpair,
    two_grid_solve,
)

SQ = DomainKind.UNIT_SQUARE
L = DomainKind.L_SHAPED


def _dofmaps(mesh):
    return build_dofmap(mesh, Space.BFS), build_dofmap(mesh, Space.Q2)


def _prolongation(domain, coarse_cells, fine_cells):
    coarse = build_mesh(domain, coarse_cells)
    fine = build_mesh(domain, fine_cells)
    cd, fd = _dofmaps(coarse), _dofmaps(fine)
    return coarse, fine, cd, fd, build_prolongation(coarse, fine, cd, fd)


def _interior_points(domain, n, rng):
    if domain is SQ:
        return rng.uniform(-0.499, 0.499, size=(n, 2))
    pts = []
    while len(pts) < n:
        p = rng.uniform(-0.999, 0.999, size=2)
        if not (p[0] >= 0 and p[1] <= 0):
            pts.append(p)
    return np.array(pts)


def test_identity_prolongation():
    _, _, _, _, prol = _prolongation(SQ, 4, 4)
    for mat in (prol.p_bfs, prol.p_q2):
        eye = sp.identity(mat.shape[0], format="csr")
        assert abs(mat - eye).max() < 1e-14


def test_bicubic_reproduced_on_interior_cell():
    coarse, fine, (cd_b, _), (fd_b, _), prol = _prolongation(SQ, 4, 8)
    coeffs = np.zeros(cd_b.n_dofs)
    for node in range(coarse.n_nodes):
        dofs = cd_b.full_to_free[4 * node : 4 * node + 4]
        if dofs[0] < 0:
            continue
        x, y = coarse.nodes[node]
        coeffs[dofs] = [x**3 * y, 3 * x**2 * y, x**3, 3 * x**2]
    fine_coeffs = prol.p_bfs @ coeffs
    # cell (1, 1) has all four corners interior, so the coarse field equals
    # x^3 y there and the prolongated fine field must too
    rng = np.random.default_rng(11)
    pts = np.column_stack([rng.uniform(-0.24, -0.01, 20), rng.uniform(-0.24, -0.01, 20)])
    vals = evaluate_bfs(fine, fd_b, fine_coeffs, pts)
    assert np.max(np.abs(vals - pts[:, 0] ** 3 * pts[:, 1])) < 1e-12


def test_q2_constant_prolongation():
    coarse, fine, (_, cd_q), (_, fd_q), prol = _prolongation(SQ, 4, 8)
    row_sums = np.asarray(prol.p_q2 @ np.ones(cd_q.n_dofs))
    # fine nodes inside coarse cells with no constrained support see exactly 1
    interior_cells = {coarse.cell_lookup[c] for c in [(1, 1), (2, 1), (1, 2), (2, 2)]}
    full_interior = [c for c in interior_cells
                     if np.all(cd_q.cell_to_free[c] >= 0)]
    assert full_interior
    s_fine = fine.side
    for node, (ix, iy) in enumerate(fine.node_ij):
        r = fd_q.full_to_free[node]
        if r < 0:
            continue
        x, y = fine.nodes[node]
        for c in full_interior:
            cx, cy = coarse.cell_ij[c]
            x0, y0 = np.array(coarse.domain.origin) + np.array([cx, cy]) * coarse.side
            if x0 <= x <= x0 + coarse.side and y0 <= y <= y0 + coarse.side:
                assert row_sums[r] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("domain", [SQ, L])
def test_prolongation_exactness_random_fields(domain, rng):
    coarse, fine, (cd_b, cd_q), (fd_b, fd_q), prol = _prolongation(domain, 4, 12)
    xb = rng.standard_normal(cd_b.n_dofs)
    xq = rng.standard_normal(cd_q.n_dofs)
    fb = prol.p_bfs @ xb
    fq = prol.p_q2 @ xq
    pts = _interior_points(domain, 100, rng)
    for op in ("value", "grad_x", "lap"):
        coarse_vals = evaluate_bfs(coarse, cd_b, xb, pts, op=op)
        fine_vals = evaluate_bfs(fine, fd_b, fb, pts, op=op)
        scale = max(1.0, np.max(np.abs(coarse_vals)))
        assert np.max(np.abs(coarse_vals - fine_vals)) < 1e-10 * scale, op
    assert np.max(np.abs(evaluate_q2(coarse, cd_q, xq, pts)
                         - evaluate_q2(fine, fd_q, fq, pts))) < 1e-10


def test_prolongation_rejects_non_nested():
    coarse = build_mesh(SQ, 4)
    fine = build_mesh(SQ, 6)
    with pytest.raises(ValueError):
        build_prolongation(coarse, fine, _dofmaps(coarse), _dofmaps(fine))
    other = build_mesh(L, 8)
    with pytest.raises(ValueError):
        build_prolongation(coarse, other, _dofmaps(coarse), _dofmaps(other))


def test_quotient_trivial_identity():
    a = sp.identity(5, format="csr")
    b = 2.0 * sp.identity(5, format="csr")
    x = np.arange(1.0, 6.0)
    assert rayleigh_quotient(a, b, x, x) == pytest.approx(0.5)


def test_quotient_exact_eigenpair():
    system = get_system("square", "const16", 4)
    for pair in physical_pairs(dense_solve_pencil(system))[:4]:
        q = rayleigh_quotient(system.a_mat, system.b_mat, pair.right_vec, pair.left_vec)
        assert abs(q - 1.0 / pair.lam) <= 1e-10 * abs(1.0 / pair.lam)


def test_quotient_exact_complex_eigenpair():
    system = get_system("square", "tilt", 4)
    pairs = physical_pairs(dense_solve_pencil(system))
    pair = next(p for p in pairs if abs(p.lam.imag) > 1e-10)
    q = rayleigh_quotient(system.a_mat, system.b_mat, pair.right_vec, pair.left_vec)
    assert abs(q - 1.0 / pair.lam) <= 1e-9 * abs(1.0 / pair.lam)


def test_quotient_near_zero_denominator():
    a = sp.identity(2, format="csr")
    b = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(TwoGridError):
        rayleigh_quotient(a, b, np.array([1.0, 0.0]), np.array([1.0, 0.0]))


def test_quotient_error_identity(rng):
    # the quotient error against an exact eigenpair decomposes into the
    # product-form remainder, exactly, at the matrix level
    system = get_system("square", "const16", 4)
    pair = physical_pairs(dense_solve_pencil(system))[0]
    a, b = system.a_mat, system.b_mat
    lam, u, us = pair.lam, pair.right_vec, pair.left_vec
    for _ in range(20):
        x = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
        y = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
        den = np.vdot(y, b @ x)
        lhs = rayleigh_quotient(a, b, x, y) - 1.0 / lam
        rhs = np.vdot(y - us, a @ (x - u)) / den
        rhs -= np.vdot(y - us, b @ (x - u)) / den / lam
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-12)


def test_two_grid_consistency_same_grid():
    result = two_grid_solve(SQ, Constant(16.0), 8, 8, 1)
    assert abs(result.k_tg - result.k_coarse) <= 1e-9 * abs(result.k_coarse)


def test_two_grid_reference_value():
    result = two_grid_solve(SQ, Constant(16.0), 4, 16, 1)
    assert abs(result.k_tg - 1.8796663603) < 2e-5
    assert result.b_pairing > 1e-3
    assert max(result.residuals.values()) <= 1e-9


def test_two_grid_lshape_radial_reference_value():
    result = two_grid_solve(L, Radial(), 4, 16, 1)
    assert abs(result.k_tg - 1.8742672861) < 5e-5


def test_two_grid_conjugate_pair_coherence():
    plus = two_grid_solve(SQ, LinearTilt(), 4, 8, 5, TwoGridControls(extra_eigs=5))
    minus = two_grid_solve(SQ, LinearTilt(), 4, 8, 6, TwoGridControls(extra_eigs=5))
    assert plus.k_tg.imag > 0 > minus.k_tg.imag
    assert abs(minus.k_tg - np.conj(plus.k_tg)) <= 1e-8 * abs(plus.k_tg)


def test_two_grid_rejects_non_nested():
    with pytest.raises(ValueError):
        two_grid_solve(SQ, Constant(16.0), 4, 6, 1)


def test_two_grid_pairing_guard():
    controls = TwoGridControls(b_pairing_min=1e9)
    with pytest.raises(TwoGridError):
        two_grid_solve(SQ, Constant(16.0), 4, 8, 1, controls)


def test_select_eigenpair_range():
    pairs = get_spectrum("square", "const16", 4)
    with pytest.raises(TwoGridError):
        select_eigenpair(pairs, 50)
    assert select_eigenpair(pairs, 1).k.real < select_eigenpair(pairs, 4).k.real


def test_two_grid_error_ordering():
    # the corrected value loses at most a small factor against the direct
    # fine solve it approximates
    k_ref = get_physical_k("square", "const16", 64, 1)
    k_h16 = get_physical_k("square", "const16", 16, 1)
    result = two_grid_solve(SQ, Constant(16.0), 4, 16, 1)
    assert abs(result.k_tg - k_ref) <= 5 * abs(k_h16 - k_ref)
