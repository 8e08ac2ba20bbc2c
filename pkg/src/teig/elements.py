"""Reference-element shape functions and tensor Gauss quadrature.

Two elements on the reference square [-1, 1]^2:

* the Bogner-Fox-Schmit (BFS) bicubic Hermite rectangle, 16 basis
  functions, 4 per corner with the degrees of freedom
  ``{value, d/dx, d/dy, d2/dxdy}``; corners are ordered counterclockwise
  from (-1, -1);
* the biquadratic Lagrange (Q2) rectangle, 9 nodal basis functions at the
  4 corners, the 4 edge midpoints and the center, in that order.

Derivative degrees of freedom of the BFS element are kept in *physical*
units by the rest of the code: the basis tabulated here is purely in
reference coordinates, and ``bfs_dof_scale`` supplies the per-DOF factors
that convert a physical-derivative coefficient vector to reference-basis
coefficients on a square cell of given side.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

#: Reference corners, counterclockwise from (-1, -1).
BFS_CORNERS: tuple[tuple[int, int], ...] = ((-1, -1), (1, -1), (1, 1), (-1, 1))

#: Q2 nodes as 1D lattice index pairs (0 -> -1, 1 -> 0, 2 -> +1):
#: corners, then edge midpoints (bottom, right, top, left), then center.
Q2_NODES: tuple[tuple[int, int], ...] = (
    (0, 0), (2, 0), (2, 2), (0, 2),
    (1, 0), (2, 1), (1, 2), (0, 1),
    (1, 1),
)


@dataclass(frozen=True)
class BfsBasisEval:
    """All 16 BFS basis functions and their derivatives at one point."""

    point: tuple[float, float]
    values: NDArray[np.float64]
    grad_x: NDArray[np.float64]
    grad_y: NDArray[np.float64]
    dxx: NDArray[np.float64]
    dyy: NDArray[np.float64]
    dxy: NDArray[np.float64]


@dataclass(frozen=True)
class Q2BasisEval:
    """All 9 Q2 basis functions and their gradients at one point."""

    point: tuple[float, float]
    values: NDArray[np.float64]
    grad_x: NDArray[np.float64]
    grad_y: NDArray[np.float64]


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor quadrature rule on the reference square."""

    points: NDArray[np.float64]  # (n, 2)
    weights: NDArray[np.float64]  # (n,)


def _hermite_1d(t: NDArray[np.float64]) -> NDArray[np.float64]:
    """Cubic Hermite basis on [-1, 1]: (..., 4) = [n-, m-, n+, m+].

    ``n`` functions interpolate the value, ``m`` functions the first
    derivative, at the endpoint indicated by the sign.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (4,), dtype=np.float64)
    t2 = t * t
    t3 = t2 * t
    out[..., 0] = (2.0 - 3.0 * t + t3) / 4.0
    out[..., 1] = (1.0 - t - t2 + t3) / 4.0
    out[..., 2] = (2.0 + 3.0 * t - t3) / 4.0
    out[..., 3] = (-1.0 - t + t2 + t3) / 4.0
    return out


def _hermite_1d_d(t: NDArray[np.float64]) -> NDArray[np.float64]:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (4,), dtype=np.float64)
    t2 = t * t
    out[..., 0] = (-3.0 + 3.0 * t2) / 4.0
    out[..., 1] = (-1.0 - 2.0 * t + 3.0 * t2) / 4.0
    out[..., 2] = (3.0 - 3.0 * t2) / 4.0
    out[..., 3] = (-1.0 + 2.0 * t + 3.0 * t2) / 4.0
    return out


def _hermite_1d_dd(t: NDArray[np.float64]) -> NDArray[np.float64]:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (4,), dtype=np.float64)
    out[..., 0] = 1.5 * t
    out[..., 1] = (-2.0 + 6.0 * t) / 4.0
    out[..., 2] = -1.5 * t
    out[..., 3] = (2.0 + 6.0 * t) / 4.0
    return out


def _lagrange_1d(t: NDArray[np.float64]) -> NDArray[np.float64]:
    """Quadratic Lagrange basis on nodes {-1, 0, 1}: (..., 3)."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (3,), dtype=np.float64)
    out[..., 0] = 0.5 * t * (t - 1.0)
    out[..., 1] = 1.0 - t * t
    out[..., 2] = 0.5 * t * (t + 1.0)
    return out


def _lagrange_1d_d(t: NDArray[np.float64]) -> NDArray[np.float64]:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (3,), dtype=np.float64)
    out[..., 0] = t - 0.5
    out[..., 1] = -2.0 * t
    out[..., 2] = t + 0.5
    return out


def bfs_tabulate(points: NDArray[np.float64]) -> dict[str, NDArray[np.float64]]:
    """Tabulate the BFS basis at many reference points.

    Returns arrays of shape (n_points, 16) keyed by
    ``values, grad_x, grad_y, dxx, dyy, dxy``.  Basis index ``4*c + k``
    refers to corner ``c`` (counterclockwise from (-1, -1)) and DOF kind
    ``k`` in {value, d/dx, d/dy, d2/dxdy}.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = pts[:, 0], pts[:, 1]
    hx, hxd, hxdd = _hermite_1d(x), _hermite_1d_d(x), _hermite_1d_dd(x)
    hy, hyd, hydd = _hermite_1d(y), _hermite_1d_d(y), _hermite_1d_dd(y)

    n = len(pts)
    out = {name: np.empty((n, 16)) for name in
           ("values", "grad_x", "grad_y", "dxx", "dyy", "dxy")}
    for c, (cx, cy) in enumerate(BFS_CORNERS):
        ix = 0 if cx < 0 else 2  # column of the value function in hx
        iy = 0 if cy < 0 else 2
        # kind -> (x-factor column, y-factor column)
        kinds = ((ix, iy), (ix + 1, iy), (ix, iy + 1), (ix + 1, iy + 1))
        for k, (jx, jy) in enumerate(kinds):
            i = 4 * c + k
            out["values"][:, i] = hx[:, jx] * hy[:, jy]
            out["grad_x"][:, i] = hxd[:, jx] * hy[:, jy]
            out["grad_y"][:, i] = hx[:, jx] * hyd[:, jy]
            out["dxx"][:, i] = hxdd[:, jx] * hy[:, jy]
            out["dyy"][:, i] = hx[:, jx] * hydd[:, jy]
            out["dxy"][:, i] = hxd[:, jx] * hyd[:, jy]
    return out


def q2_tabulate(points: NDArray[np.float64]) -> dict[str, NDArray[np.float64]]:
    """Tabulate the Q2 basis at many reference points; arrays (n_points, 9)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = pts[:, 0], pts[:, 1]
    lx, lxd = _lagrange_1d(x), _lagrange_1d_d(x)
    ly, lyd = _lagrange_1d(y), _lagrange_1d_d(y)

    n = len(pts)
    out = {name: np.empty((n, 9)) for name in ("values", "grad_x", "grad_y")}
    for i, (a, b) in enumerate(Q2_NODES):
        out["values"][:, i] = lx[:, a] * ly[:, b]
        out["grad_x"][:, i] = lxd[:, a] * ly[:, b]
        out["grad_y"][:, i] = lx[:, a] * lyd[:, b]
    return out


def bfs_eval(point) -> BfsBasisEval:
    """Evaluate the 16 BFS basis functions at one reference point."""
    tab = bfs_tabulate(np.asarray(point, dtype=np.float64).reshape(1, 2))
    x, y = float(point[0]), float(point[1])
    return BfsBasisEval(
        point=(x, y),
        values=tab["values"][0],
        grad_x=tab["grad_x"][0],
        grad_y=tab["grad_y"][0],
        dxx=tab["dxx"][0],
        dyy=tab["dyy"][0],
        dxy=tab["dxy"][0],
    )


def q2_eval(point) -> Q2BasisEval:
    """Evaluate the 9 Q2 basis functions at one reference point."""
    tab = q2_tabulate(np.asarray(point, dtype=np.float64).reshape(1, 2))
    x, y = float(point[0]), float(point[1])
    return Q2BasisEval(
        point=(x, y),
        values=tab["values"][0],
        grad_x=tab["grad_x"][0],
        grad_y=tab["grad_y"][0],
    )


@lru_cache(maxsize=None)
def _gauss_arrays(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    gp, gw = np.polynomial.legendre.leggauss(order)
    pts = np.empty((order * order, 2))
    wts = np.empty(order * order)
    i = 0
    for wy, py in zip(gw, gp):
        for wx, px in zip(gw, gp):
            pts[i] = (px, py)
            wts[i] = wx * wy
            i += 1
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def gauss_rule(order: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule with ``order**2`` points.

    Exact for tensor polynomials of degree <= 2*order - 1 per direction.
    """
    if not 1 <= order <= 10:
        raise ValueError(f"quadrature order must be in [1, 10], got {order}")
    pts, wts = _gauss_arrays(order)
    return QuadratureRule(points=pts, weights=wts)


def bfs_dof_scale(side: float) -> NDArray[np.float64]:
    """Per-DOF factors mapping physical-derivative BFS coefficients.

    On a physical square cell of given side, a coefficient vector holding
    (value, du/dx, du/dy, d2u/dxdy) at the corners represents the same
    function as the reference basis with each coefficient multiplied by
    these factors (first derivatives scale by side/2, the mixed second
    derivative by (side/2)**2).
    """
    half = side / 2.0
    return np.tile(np.array([1.0, half, half, half * half]), 4)
