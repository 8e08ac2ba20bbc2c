"""Study driver: eigenvalue tables, convergence orders, persisted results.

A study sweeps a ladder of nested (coarse, fine) mesh pairs for a list
of eigenvalue indices and records, per row, the coarse direct value
``k_H``, the fine direct value ``k_h`` (optional at large meshes) and
the two-grid value ``k_tg``.  Relative-error curves against a reference
value and their fitted slopes are derived afterwards.

Row results are deterministic for a given configuration; wall times are
recorded alongside but are of course machine-dependent.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import BlockSystem, assemble_block_system
from .coefficients import index_from_name
from .eigensolver import EigenPair, SpectrumRequest, solve_pencil
from .elements import gauss_rule
from .mesh import DomainKind, build_mesh
from .twogrid import (
    Prolongation,
    TwoGridControls,
    build_prolongation,
    refine_eigenpair,
    select_eigenpair,
)

MODES = ("direct", "twogrid", "both")
INDEX_NAMES = ("const16", "tilt", "radial")

#: Direct fine solves above this cell count are skipped by default; the
#: two-grid value is still produced there.
DEFAULT_MAX_DIRECT_CELLS = 128

#: Extra eigenvalues computed beyond the largest requested index, so the
#: requested ones are safely inside the converged dominant set.
EXTRA_EIGS = 4


@dataclass
class StudyConfig:
    """Everything needed to reproduce a study run."""

    domain: str = "square"
    index: str = "const16"
    mode: str = "both"
    ladder: list[tuple[int, int]] = field(default_factory=lambda: [(4, 16), (8, 32), (16, 64)])
    eigs: list[int] = field(default_factory=lambda: [1])
    quad_order: int = 6
    tol: float = 1e-10
    arnoldi_dim: int | None = None
    max_restarts: int = 50
    threads: int = 1
    out_dir: str | None = None
    max_direct_cells: int = DEFAULT_MAX_DIRECT_CELLS

    def validate(self) -> None:
        DomainKind.from_name(self.domain)
        if self.index not in INDEX_NAMES:
            raise ValueError(f"unknown index {self.index!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.ladder:
            raise ValueError("mesh ladder must not be empty")
        for coarse, fine in self.ladder:
            if coarse < 1 or fine < coarse or fine % coarse != 0:
                raise ValueError(
                    f"ladder pair ({coarse}, {fine}) is not nested: the fine "
                    "cell count must be an integer multiple of the coarse one"
                )
        if not self.eigs or any(j < 1 for j in self.eigs):
            raise ValueError("eigenvalue indices must be positive")
        if self.quad_order < 1 or self.quad_order > 10:
            raise ValueError("quad_order must be in [1, 10]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ladder"] = [list(p) for p in self.ladder]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        d = dict(d)
        d["ladder"] = [tuple(p) for p in d["ladder"]]
        d["eigs"] = list(d["eigs"])
        return cls(**d)


def _c2list(z: complex | None):
    return None if z is None else [float(z.real), float(z.imag)]


def _list2c(v) -> complex | None:
    return None if v is None else complex(v[0], v[1])


@dataclass
class StudyRow:
    """One (j, H, h) table row."""

    j: int
    H_cells: int
    h_cells: int
    k_H: complex | None = None
    k_h: complex | None = None
    k_tg: complex | None = None
    residual: float | None = None
    b_pairing: float | None = None
    seconds: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "H_cells": self.H_cells,
            "h_cells": self.h_cells,
            "k_H": _c2list(self.k_H),
            "k_h": _c2list(self.k_h),
            "k_tg": _c2list(self.k_tg),
            "residual": self.residual,
            "b_pairing": self.b_pairing,
            "seconds": self.seconds,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StudyRow:
        return cls(
            j=d["j"], H_cells=d["H_cells"], h_cells=d["h_cells"],
            k_H=_list2c(d["k_H"]), k_h=_list2c(d["k_h"]), k_tg=_list2c(d["k_tg"]),
            residual=d["residual"], b_pairing=d["b_pairing"],
            seconds=d["seconds"], error=d["error"],
        )


@dataclass
class Reference:
    """The value used as 'exact' for one eigenvalue index."""

    j: int
    series: str
    h_cells: int
    k_ref: complex

    def to_dict(self) -> dict:
        return {"j": self.j, "series": self.series, "h_cells": self.h_cells,
                "k_ref": _c2list(self.k_ref)}

    @classmethod
    def from_dict(cls, d: dict) -> Reference:
        return cls(j=d["j"], series=d["series"], h_cells=d["h_cells"],
                   k_ref=_list2c(d["k_ref"]))


@dataclass
class ErrorPoint:
    j: int
    series: str
    h_cells: int
    rel_error: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ErrorPoint:
        return cls(**d)


@dataclass
class SlopeFit:
    j: int
    series: str
    slope: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SlopeFit:
        return cls(**d)


@dataclass
class StudyRecord:
    """All results of one study run."""

    config: StudyConfig
    rows: list[StudyRow]
    references: list[Reference]
    error_points: list[ErrorPoint]
    slopes: list[SlopeFit]
    solve_seconds: dict[str, float] = field(default_factory=dict)

    @property
    def failed_rows(self) -> list[StudyRow]:
        return [r for r in self.rows if r.error is not None]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
            "references": [r.to_dict() for r in self.references],
            "error_points": [p.to_dict() for p in self.error_points],
            "slopes": [s.to_dict() for s in self.slopes],
            "solve_seconds": dict(self.solve_seconds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> StudyRecord:
        return cls(
            config=StudyConfig.from_dict(d["config"]),
            rows=[StudyRow.from_dict(r) for r in d["rows"]],
            references=[Reference.from_dict(r) for r in d["references"]],
            error_points=[ErrorPoint.from_dict(p) for p in d["error_points"]],
            slopes=[SlopeFit.from_dict(s) for s in d["slopes"]],
            solve_seconds=dict(d["solve_seconds"]),
        )


def estimate_order(errors: list[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(h).

    Each entry is ``(h, relative_error)``; at least two points with
    distinct positive ``h`` and strictly positive errors are required.
    """
    if len(errors) < 2:
        raise ValueError("need at least two (h, error) points")
    hs = np.array([h for h, _ in errors], dtype=float)
    es = np.array([e for _, e in errors], dtype=float)
    if np.any(hs <= 0) or np.any(es <= 0):
        raise ValueError("mesh sizes and errors must be positive")
    if len(np.unique(hs)) != len(hs):
        raise ValueError("mesh sizes must be distinct")
    slope, _ = np.polyfit(np.log(hs), np.log(es), 1)
    return float(slope)


def _spectrum(system: BlockSystem, config: StudyConfig, how_many: int) -> list[EigenPair]:
    req = SpectrumRequest(
        how_many=how_many,
        arnoldi_dim=config.arnoldi_dim,
        max_restarts=config.max_restarts,
        tol=config.tol,
    )
    return solve_pencil(system, req)


def run_study(config: StudyConfig) -> StudyRecord:
    """Execute every (j, H, h) row of the configured study.

    Individual row failures are recorded on the row and the study
    continues; shared mesh solves are computed once and reused across
    rows.  With ``threads > 1`` mesh solves and two-grid corrections run
    in a worker pool; results are collected in a deterministic order.
    """
    config.validate()
    domain = DomainKind.from_name(config.domain)
    index = index_from_name(config.index)
    rule = gauss_rule(config.quad_order)
    how_many = max(config.eigs) + EXTRA_EIGS
    controls = TwoGridControls(
        quad_order=config.quad_order,
        extra_eigs=EXTRA_EIGS,
        arnoldi_dim=config.arnoldi_dim,
        max_restarts=config.max_restarts,
        eig_tol=config.tol,
    )

    want_direct = config.mode in ("direct", "both")
    want_twogrid = config.mode in ("twogrid", "both")

    # Cell counts whose systems (and possibly spectra) are needed.
    system_cells: set[int] = set()
    spectrum_cells: set[int] = set()
    for coarse, fine in config.ladder:
        system_cells.add(coarse)
        spectrum_cells.add(coarse)  # k_H is reported in every mode
        if want_twogrid:
            system_cells.add(fine)
        if want_direct and fine <= config.max_direct_cells:
            system_cells.add(fine)
            spectrum_cells.add(fine)

    solve_seconds: dict[str, float] = {}
    systems: dict[int, BlockSystem | Exception] = {}
    spectra: dict[int, list[EigenPair] | Exception] = {}

    def prepare(cells: int):
        t0 = time.perf_counter()
        try:
            system: BlockSystem | Exception = assemble_block_system(
                build_mesh(domain, cells), index, rule
            )
        except Exception as exc:  # recorded per-row below
            return cells, exc, exc, time.perf_counter() - t0, 0.0
        t1 = time.perf_counter()
        pairs: list[EigenPair] | Exception | None = None
        if cells in spectrum_cells:
            try:
                pairs = _spectrum(system, config, how_many)
            except Exception as exc:
                pairs = exc
        return cells, system, pairs, t1 - t0, time.perf_counter() - t1

    order = sorted(system_cells, reverse=True)  # biggest solves first
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            prepared = list(pool.map(prepare, order))
    else:
        prepared = [prepare(c) for c in order]
    for cells, system, pairs, t_asm, t_solve in prepared:
        systems[cells] = system
        if pairs is not None:
            spectra[cells] = pairs
        solve_seconds[f"assemble_{cells}"] = t_asm
        if cells in spectrum_cells:
            solve_seconds[f"solve_{cells}"] = t_solve

    def get_system(cells: int) -> BlockSystem:
        system = systems[cells]
        if isinstance(system, Exception):
            raise system
        return system

    prolongations: dict[tuple[int, int], Prolongation | Exception] = {}
    if want_twogrid:
        for coarse, fine in sorted(set(config.ladder)):
            try:
                cs, fs = get_system(coarse), get_system(fine)
                prolongations[(coarse, fine)] = build_prolongation(
                    cs.mesh, fs.mesh, (cs.dof_bfs, cs.dof_q2), (fs.dof_bfs, fs.dof_q2)
                )
            except Exception as exc:
                prolongations[(coarse, fine)] = exc

    def lookup_k(cells: int, j: int) -> tuple[complex, float]:
        pairs = spectra[cells]
        if isinstance(pairs, Exception):
            raise pairs
        pair = select_eigenpair(pairs, j)
        return pair.k, pair.residual

    def run_row(task: tuple[int, int, int]) -> StudyRow:
        j, coarse, fine = task
        row = StudyRow(j=j, H_cells=coarse, h_cells=fine)
        t0 = time.perf_counter()
        try:
            row.k_H, res = lookup_k(coarse, j)
            residuals = [res]
            if fine == coarse:
                row.k_h = row.k_H
            elif want_direct and fine <= config.max_direct_cells:
                row.k_h, res_h = lookup_k(fine, j)
                residuals.append(res_h)
            if want_twogrid:
                pairs = spectra[coarse]
                assert not isinstance(pairs, Exception)
                pair = select_eigenpair(pairs, j)
                prol = prolongations[(coarse, fine)]
                if isinstance(prol, Exception):
                    raise prol
                result = refine_eigenpair(
                    get_system(coarse), pair, get_system(fine), prol, controls
                )
                row.k_tg = result.k_tg
                row.b_pairing = result.b_pairing
                residuals.extend(result.residuals.values())
            row.residual = max(residuals)
        except Exception as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        row.seconds = time.perf_counter() - t0
        return row

    tasks = sorted((j, coarse, fine) for j in config.eigs for coarse, fine in set(config.ladder))
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(run_row, tasks))
    else:
        rows = [run_row(t) for t in tasks]
    rows.sort(key=lambda r: (r.j, r.h_cells, r.H_cells))

    references, error_points, slopes = _derive_errors(domain, rows)
    return StudyRecord(
        config=config,
        rows=rows,
        references=references,
        error_points=error_points,
        slopes=slopes,
        solve_seconds=solve_seconds,
    )


def _series_value(row: StudyRow, series: str) -> complex | None:
    return row.k_h if series == "direct" else row.k_tg


def _derive_errors(domain: DomainKind, rows: list[StudyRow]):
    """Reference values, relative-error curves and fitted slopes per j.

    The reference is the value on the finest mesh of the preferred
    series: the direct solve on the square (where direct values reach
    the finest meshes) and the two-grid value on the L-shape (where the
    direct method is skipped at the largest meshes).
    """
    preferred = "direct" if domain is DomainKind.UNIT_SQUARE else "twogrid"
    references: list[Reference] = []
    error_points: list[ErrorPoint] = []
    slopes: list[SlopeFit] = []
    for j in sorted({r.j for r in rows}):
        ok_rows = [r for r in rows if r.j == j and r.error is None]
        ref = None
        for series in (preferred, "direct" if preferred == "twogrid" else "twogrid"):
            with_val = [r for r in ok_rows if _series_value(r, series) is not None]
            if with_val:
                finest = max(with_val, key=lambda r: r.h_cells)
                ref = Reference(j=j, series=series, h_cells=finest.h_cells,
                                k_ref=_series_value(finest, series))
                break
        if ref is None or ref.k_ref == 0:
            continue
        references.append(ref)
        for series in ("direct", "twogrid"):
            pts: dict[int, float] = {}
            for r in sorted(ok_rows, key=lambda r: (r.h_cells, r.H_cells)):
                val = _series_value(r, series)
                if val is None:
                    continue
                if series == ref.series and r.h_cells == ref.h_cells:
                    continue  # the reference datum itself
                rel = abs(val - ref.k_ref) / abs(ref.k_ref)
                if rel > 0:
                    pts[r.h_cells] = rel  # finest coarse mesh wins at equal h
            for h_cells, rel in sorted(pts.items()):
                error_points.append(ErrorPoint(j=j, series=series, h_cells=h_cells,
                                               rel_error=rel))
            if len(pts) >= 2:
                data = [(np.sqrt(2.0) / h, e) for h, e in sorted(pts.items())]
                slopes.append(SlopeFit(j=j, series=series, slope=estimate_order(data)))
    return references, error_points, slopes
