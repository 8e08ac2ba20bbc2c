"""Structured quadrilateral meshes of the unit square and the L-shaped domain.

All meshes are uniform grids of axis-aligned squares.  Nodes, cells and
edges carry integer lattice coordinates so that nested refinement and
point location are exact; physical coordinates are derived from them.
Entities are ordered lexicographically (y-major, then x) so that two
builds with the same arguments are bit-identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

_SQRT2 = float(np.sqrt(2.0))


class DomainKind(enum.Enum):
    """Computational domains supported by the solver.

    UNIT_SQUARE covers (-1/2, 1/2) x (-1/2, 1/2).
    L_SHAPED covers (-1, 1) x (-1, 1) minus the quadrant [0, 1] x [-1, 0].
    """

    UNIT_SQUARE = "square"
    L_SHAPED = "lshape"

    @property
    def origin(self) -> tuple[float, float]:
        if self is DomainKind.UNIT_SQUARE:
            return (-0.5, -0.5)
        return (-1.0, -1.0)

    @property
    def extent_units(self) -> int:
        """Side length of the bounding box in unit lengths."""
        return 1 if self is DomainKind.UNIT_SQUARE else 2

    @property
    def area(self) -> float:
        return 1.0 if self is DomainKind.UNIT_SQUARE else 3.0

    @classmethod
    def from_name(cls, name: str) -> DomainKind:
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown domain {name!r}; expected 'square' or 'lshape'")


@dataclass
class StructuredMesh:
    """Uniform grid of axis-aligned square cells over one of the two domains.

    Attributes
    ----------
    domain : DomainKind
    cells_per_unit : int
        Number of cells along a segment of length one.  The cell side is
        ``s = 1 / cells_per_unit`` and the mesh size (cell diagonal) is
        ``s * sqrt(2)``.
    node_ij : (n_nodes, 2) int array
        Lattice coordinates of each node, in units of ``s`` from the
        lower-left corner of the bounding box.
    nodes : (n_nodes, 2) float array
        Physical node coordinates, lexicographic order (y-major, then x).
    cells : (n_cells, 4) int array
        Node indices per cell, counterclockwise from the lower-left corner.
    cell_ij : (n_cells, 2) int array
        Lattice coordinates (cx, cy) of each cell's lower-left corner.
    edges : (n_edges, 2) int array
        Node index pairs (lo, hi), sorted lexicographically.
    node_is_boundary, edge_is_boundary : bool arrays
        Flags for entities on the geometric boundary.  An edge is a
        boundary edge iff it belongs to exactly one cell; a node is a
        boundary node iff it lies on a boundary edge.
    """

    domain: DomainKind
    cells_per_unit: int
    node_ij: NDArray[np.int64]
    nodes: NDArray[np.float64]
    cells: NDArray[np.int64]
    cell_ij: NDArray[np.int64]
    edges: NDArray[np.int64]
    node_is_boundary: NDArray[np.bool_]
    edge_is_boundary: NDArray[np.bool_]
    node_lookup: dict[tuple[int, int], int] = field(repr=False)
    cell_lookup: dict[tuple[int, int], int] = field(repr=False)

    @property
    def side(self) -> float:
        """Physical side length of every cell."""
        return 1.0 / self.cells_per_unit

    @property
    def mesh_size_h(self) -> float:
        """Cell diagonal, the conventional mesh-size label sqrt(2)/n."""
        return self.side * _SQRT2

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _cell_included(domain: DomainKind, cpu: int, cx: int, cy: int) -> bool:
    if domain is DomainKind.UNIT_SQUARE:
        return True
    # L-shape: drop cells inside the removed quadrant x >= 0, y <= 0.
    return not (cx >= cpu and cy < cpu)


def build_mesh(domain: DomainKind, cells_per_unit: int) -> StructuredMesh:
    """Build the uniform square-cell mesh of ``domain``.

    Parameters
    ----------
    domain : DomainKind
    cells_per_unit : int
        Cells along a unit length; must be >= 1.  Grid lines automatically
        pass through the reentrant corner of the L-shape for any integer
        value.
    """
    if cells_per_unit < 1:
        raise ValueError(f"cells_per_unit must be >= 1, got {cells_per_unit}")
    cpu = cells_per_unit
    n_side = domain.extent_units * cpu
    s = 1.0 / cpu
    ox, oy = domain.origin

    included = np.zeros((n_side, n_side), dtype=bool)  # indexed [cy, cx]
    for cy in range(n_side):
        for cx in range(n_side):
            included[cy, cx] = _cell_included(domain, cpu, cx, cy)

    # A lattice point belongs to the mesh iff it touches an included cell.
    node_lookup: dict[tuple[int, int], int] = {}
    node_ij_list: list[tuple[int, int]] = []
    for iy in range(n_side + 1):
        for ix in range(n_side + 1):
            touches = False
            for cy in (iy - 1, iy):
                for cx in (ix - 1, ix):
                    if 0 <= cx < n_side and 0 <= cy < n_side and included[cy, cx]:
                        touches = True
            if touches:
                node_lookup[(ix, iy)] = len(node_ij_list)
                node_ij_list.append((ix, iy))

    node_ij = np.array(node_ij_list, dtype=np.int64)
    nodes = np.empty((len(node_ij), 2), dtype=np.float64)
    nodes[:, 0] = ox + node_ij[:, 0] * s
    nodes[:, 1] = oy + node_ij[:, 1] * s

    cell_lookup: dict[tuple[int, int], int] = {}
    cell_list: list[tuple[int, int, int, int]] = []
    cell_ij_list: list[tuple[int, int]] = []
    edge_count: dict[tuple[int, int], int] = {}
    for cy in range(n_side):
        for cx in range(n_side):
            if not included[cy, cx]:
                continue
            n00 = node_lookup[(cx, cy)]
            n10 = node_lookup[(cx + 1, cy)]
            n11 = node_lookup[(cx + 1, cy + 1)]
            n01 = node_lookup[(cx, cy + 1)]
            cell_lookup[(cx, cy)] = len(cell_list)
            cell_list.append((n00, n10, n11, n01))
            cell_ij_list.append((cx, cy))
            for a, b in ((n00, n10), (n10, n11), (n01, n11), (n00, n01)):
                key = (a, b) if a < b else (b, a)
                edge_count[key] = edge_count.get(key, 0) + 1

    cells = np.array(cell_list, dtype=np.int64)
    cell_ij = np.array(cell_ij_list, dtype=np.int64)
    edge_keys = sorted(edge_count)
    edges = np.array(edge_keys, dtype=np.int64)
    edge_is_boundary = np.array([edge_count[k] == 1 for k in edge_keys], dtype=bool)

    node_is_boundary = np.zeros(len(node_ij), dtype=bool)
    for (a, b), bnd in zip(edge_keys, edge_is_boundary):
        if bnd:
            node_is_boundary[a] = True
            node_is_boundary[b] = True

    return StructuredMesh(
        domain=domain,
        cells_per_unit=cpu,
        node_ij=node_ij,
        nodes=nodes,
        cells=cells,
        cell_ij=cell_ij,
        edges=edges,
        node_is_boundary=node_is_boundary,
        edge_is_boundary=edge_is_boundary,
        node_lookup=node_lookup,
        cell_lookup=cell_lookup,
    )


def refine(mesh: StructuredMesh, factor: int) -> StructuredMesh:
    """Uniformly refine ``mesh`` by an integer factor.

    Every coarse cell becomes ``factor**2`` fine cells and every coarse
    node is a fine node, so the coarse finite element spaces are nested
    in the fine ones.
    """
    if factor < 1:
        raise ValueError(f"refinement factor must be >= 1, got {factor}")
    return build_mesh(mesh.domain, mesh.cells_per_unit * factor)


def is_nested(coarse: StructuredMesh, fine: StructuredMesh) -> bool:
    """True iff ``fine`` is an integer refinement of ``coarse``."""
    return (
        coarse.domain is fine.domain
        and fine.cells_per_unit % coarse.cells_per_unit == 0
    )


def dump_mesh(mesh: StructuredMesh) -> str:
    """Serialize a mesh to the line-oriented debug format.

    One ``NODE i x y`` line per node, one ``CELL i n0 n1 n2 n3`` line per
    cell and one ``BND i`` line per boundary node.
    """
    lines: list[str] = []
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"NODE {i} {float(x)!r} {float(y)!r}")
    for i, cell in enumerate(mesh.cells):
        lines.append(f"CELL {i} {cell[0]} {cell[1]} {cell[2]} {cell[3]}")
    for i in np.flatnonzero(mesh.node_is_boundary):
        lines.append(f"BND {i}")
    return "\n".join(lines) + "\n"
