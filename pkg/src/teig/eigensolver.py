"""Solvers for the real nonsymmetric pencil ``lam * A x = B x``.

The wanted transmission eigenvalues have the smallest ``|k|`` where
``k = 1 / sqrt(lam)``, i.e. the largest ``|lam|``; since the underlying
solution operator is compact the spectrum accumulates at zero, so Arnoldi
iteration on ``A^{-1} B`` targeting the dominant eigenvalues retrieves
them directly, without a shift.

Left vectors: for each right eigenpair ``B x = lam A x`` the stored left
vector ``y`` satisfies ``y^H B = lam y^H A``.  Over the real pencil this
is the eigenvector of the transposed pencil at ``conj(lam)``; for real
eigenvalues the two notions coincide.  This convention makes
``(y^H A x) / (y^H B x) = 1 / lam`` hold exactly for exact eigenpairs,
for complex pairs included, and it is what the generalized Rayleigh
quotient of the two-grid correction consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .assembly import BlockSystem

#: Fixed Arnoldi starting-vector seed so repeated solves are bit-identical.
_V0_SEED = 1902

#: Relative tolerance of the left/right eigenvalue matching.
_MATCH_RTOL = 1e-6

#: Relative gap under which two eigenvalues count as a numerical cluster.
_CLUSTER_RTOL = 1e-8

#: Conjugate-pair closure tolerance for real pencils.
_PAIRING_RTOL = 1e-8


class EigensolverError(RuntimeError):
    """Raised on non-convergence or failed left/right matching.

    ``residuals`` carries the achieved relative residuals when available.
    """

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class EigenPair:
    """One eigenpair of the pencil with its matched left vector.

    ``lam`` is the pencil eigenvalue, ``k = 1 / sqrt(lam)`` on the
    principal branch (``Re k >= 0``).  Both vectors are A-normalized
    (``x^H A x = 1``) with the largest-magnitude entry rotated to the
    positive real axis.  ``residual`` is the relative residual
    ``||lam A x - B x|| / (||x|| (|lam| ||A||_F + ||B||_F))`` maximized
    over the right and left vectors.  ``ascent_flag`` marks members of a
    numerically multiple eigenvalue whose eigenvectors could not be
    orthogonalized to independent directions (possible Jordan structure).
    """

    lam: complex
    k: complex
    right_vec: NDArray[np.complexfloating]
    left_vec: NDArray[np.complexfloating]
    residual: float
    ascent_flag: bool = False


@dataclass
class SpectrumRequest:
    """How many eigenpairs to compute and with what solver controls."""

    how_many: int
    sort: str = "ascending_real_k"
    arnoldi_dim: int | None = None
    max_restarts: int = 50
    tol: float = 1e-10

    def __post_init__(self):
        if self.how_many < 1:
            raise ValueError("how_many must be positive")
        if self.sort != "ascending_real_k":
            raise ValueError(f"unsupported sort {self.sort!r}")


def k_from_lam(lam: complex) -> complex:
    """k = 1 / sqrt(lam), principal branch, so Re(k) >= 0."""
    lam = complex(lam)
    if lam == 0.0:
        return complex(np.inf, 0.0)
    return 1.0 / complex(np.sqrt(lam))


def _sort_key(ks: NDArray[np.complexfloating]) -> NDArray[np.intp]:
    """Order by ascending Re(k), then |Im(k)|, with +Im before -Im."""
    return np.lexsort((-ks.imag, np.abs(ks.imag), ks.real))


def _fix_phase(v: NDArray[np.complexfloating]) -> NDArray[np.complexfloating]:
    i = int(np.argmax(np.abs(v)))
    piv = v[i]
    if piv == 0:
        return v
    return v * (abs(piv) / piv)


def _lu_solve(lu, rhs, trans: str = "N"):
    """SuperLU solve that tolerates a complex rhs over a real factorization."""
    try:
        return lu.solve(rhs, trans=trans)
    except TypeError:
        rhs = np.asarray(rhs)
        re = lu.solve(np.ascontiguousarray(rhs.real), trans=trans)
        im = lu.solve(np.ascontiguousarray(rhs.imag), trans=trans)
        return re + 1j * im


def apply_shift_invert(system: BlockSystem, vector, sigma: float = 0.0):
    """Apply the Arnoldi operator to a vector.

    With the default ``sigma = 0`` this is ``A^{-1} B v``, whose dominant
    eigenvalues are the wanted largest-``|lam|`` pencil eigenvalues.  For
    a nonzero shift the operator is ``(B - sigma A)^{-1} A v``.
    """
    v = np.asarray(vector)
    try:
        if sigma == 0.0:
            lu = system.a_factor()
            return _lu_solve(lu, system.b_mat @ v)
        shifted = (system.b_mat - sigma * system.a_mat).tocsc()
        lu = spla.splu(shifted)
        return _lu_solve(lu, system.a_mat @ v)
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise EigensolverError(f"singular factorization: {exc}") from exc


def _relative_residual(a_mat, b_mat, fro_a, fro_b, lam, x):
    r = lam * (a_mat @ x) - b_mat @ x
    scale = np.linalg.norm(x) * (abs(lam) * fro_a + fro_b)
    return float(np.linalg.norm(r) / scale) if scale > 0 else float("inf")


def _a_normalize(v, a_mat):
    nrm2 = np.vdot(v, a_mat @ v).real
    if nrm2 <= 0:
        raise EigensolverError("vector has nonpositive A-norm; A is not SPD here")
    return v / np.sqrt(nrm2)


def _match_left(right_vals, left_vals):
    """Greedy assignment right -> left without reuse.

    The left vector stored for a right eigenvalue ``lam`` is the
    transposed-pencil eigenvector computed at ``conj(lam)``; real pencils
    have conjugation-closed spectra, so a partner always exists when both
    runs converged to the same dominant set.
    """
    order = np.argsort(-np.abs(right_vals))  # dominant rights matched first
    used: set[int] = set()
    chosen = np.full(len(right_vals), -1, dtype=int)
    # absolute floor so the numerical-zero cluster (kernel of B) still pairs up
    floor = 1e-12 * (np.max(np.abs(right_vals)) if len(right_vals) else 1.0)
    for i in order:
        target = np.conj(right_vals[i])
        dist = np.abs(left_vals - target)
        for m in used:
            dist[m] = np.inf
        m_best = int(np.argmin(dist))
        tol = _MATCH_RTOL * abs(right_vals[i]) + floor
        if dist[m_best] >= tol:
            raise EigensolverError(
                "left/right eigenvalue matching failed: right eigenvalue "
                f"{right_vals[i]} has no transposed-pencil partner within "
                f"{_MATCH_RTOL:g} relative"
            )
        used.add(m_best)
        chosen[i] = m_best
    return chosen


def _flag_ascent(pairs: list[EigenPair], a_mat) -> None:
    """Mark clusters whose right eigenvectors are not A-independent."""
    n = len(pairs)
    visited = np.zeros(n, dtype=bool)
    for i in range(n):
        if visited[i]:
            continue
        cluster = [i]
        for j in range(i + 1, n):
            gap = abs(pairs[i].lam - pairs[j].lam)
            if gap <= _CLUSTER_RTOL * max(abs(pairs[i].lam), abs(pairs[j].lam)):
                cluster.append(j)
        if len(cluster) < 2:
            continue
        for j in cluster:
            visited[j] = True
        vecs = np.stack([pairs[j].right_vec for j in cluster], axis=1)
        gram = vecs.conj().T @ (a_mat @ vecs)
        svals = np.linalg.svd(gram, compute_uv=False)
        if svals[-1] < 1e-6 * svals[0]:
            for j in cluster:
                pairs[j].ascent_flag = True


def _check_conjugate_closure(vals) -> None:
    for lam in vals:
        if abs(lam.imag) <= _PAIRING_RTOL * abs(lam):
            continue
        partner = np.min(np.abs(vals - np.conj(lam)))
        if partner > _PAIRING_RTOL * abs(lam):
            raise EigensolverError(
                f"complex eigenvalue {lam} returned without its conjugate partner"
            )


def _build_pairs(system, right_vals, right_vecs, left_vals, left_vecs):
    a_mat, b_mat = system.a_mat, system.b_mat
    fro_a = float(np.sqrt((a_mat.data ** 2).sum()))
    fro_b = float(np.sqrt((b_mat.data ** 2).sum()))
    match = _match_left(right_vals, left_vals)
    pairs: list[EigenPair] = []
    for i, lam in enumerate(right_vals):
        x = _fix_phase(_a_normalize(right_vecs[:, i], a_mat))
        y = _fix_phase(_a_normalize(left_vecs[:, match[i]], a_mat))
        res_r = _relative_residual(a_mat, b_mat, fro_a, fro_b, lam, x)
        # the left vector solves the transposed pencil at conj(lam)
        res_l = _relative_residual(a_mat.T, b_mat.T, fro_a, fro_b, np.conj(lam), y)
        pairs.append(
            EigenPair(
                lam=complex(lam),
                k=k_from_lam(lam),
                right_vec=x,
                left_vec=y,
                residual=max(res_r, res_l),
            )
        )
    _flag_ascent(pairs, a_mat)
    ks = np.array([p.k for p in pairs])
    return [pairs[i] for i in _sort_key(ks)]


def solve_pencil(system: BlockSystem, req: SpectrumRequest) -> list[EigenPair]:
    """Arnoldi solve for the ``req.how_many`` largest-``|lam|`` eigenpairs.

    Returns the pairs sorted by ascending Re(k) then ascending |Im(k)|;
    conjugate pairs are adjacent (one extra pair may be appended rather
    than splitting a conjugate pair at the requested count).  Left
    vectors come from an independent Arnoldi run on the transposed
    pencil, matched by eigenvalue proximity.
    """
    n = system.dim
    if n < req.how_many + 2:
        raise ValueError(f"system dimension {n} too small for {req.how_many} eigenpairs")
    k_int = min(req.how_many + 2, n - 2)
    ncv = req.arnoldi_dim if req.arnoldi_dim is not None else max(40, 4 * req.how_many)
    ncv = min(max(ncv, 2 * k_int + 3), n)

    lu = system.a_factor()
    b_csr = system.b_mat.tocsr()
    bt_csr = system.b_mat.T.tocsr()
    op = spla.LinearOperator((n, n), matvec=lambda v: _lu_solve(lu, b_csr @ v))
    op_t = spla.LinearOperator(
        (n, n), matvec=lambda v: _lu_solve(lu, bt_csr @ v, trans="T")
    )
    v0 = np.random.default_rng(_V0_SEED).standard_normal(n)

    def run(operator):
        try:
            return spla.eigs(
                operator, k=k_int, which="LM", v0=v0, ncv=ncv,
                maxiter=req.max_restarts, tol=req.tol,
            )
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Arnoldi did not converge within {req.max_restarts} restarts "
                f"({len(exc.eigenvalues)} of {k_int} eigenvalues converged)",
                residuals=exc.eigenvalues,
            ) from exc

    right_vals, right_vecs = run(op)
    left_vals, left_vecs = run(op_t)

    # keep the how_many most dominant, never splitting a conjugate pair
    dom = np.argsort(-np.abs(right_vals), kind="stable")
    keep = list(dom[: req.how_many])
    if len(dom) > req.how_many:
        last = right_vals[keep[-1]]
        nxt = right_vals[dom[req.how_many]]
        if abs(last.imag) > _PAIRING_RTOL * abs(last) and abs(nxt - np.conj(last)) <= _PAIRING_RTOL * abs(last):
            keep.append(dom[req.how_many])
    right_vals = right_vals[keep]
    right_vecs = right_vecs[:, keep]

    _check_conjugate_closure(right_vals)
    return _build_pairs(system, right_vals, right_vecs, left_vals, left_vecs)


def dense_solve_pencil(system: BlockSystem) -> list[EigenPair]:
    """Full-spectrum oracle via dense reduction to ``A^{-1} B``.

    Same conventions as :func:`solve_pencil`; intended for verification
    at small sizes (dimension capped at 2000).
    """
    n = system.dim
    if n > 2000:
        raise ValueError(f"dense oracle capped at dimension 2000, got {n}")
    a = system.a_mat.toarray()
    b = system.b_mat.toarray()
    lu_piv = sla.lu_factor(a)
    right_vals, right_vecs = sla.eig(sla.lu_solve(lu_piv, b))
    left_vals, left_vecs = sla.eig(sla.lu_solve(lu_piv, b.T))
    _check_conjugate_closure(right_vals)
    return _build_pairs(system, right_vals, right_vecs, left_vals, left_vecs)
