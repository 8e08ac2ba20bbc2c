"""Shared solver caches so expensive spectra are computed once per session."""

from __future__ import annotations

import numpy as np
import pytest

from teig import (
    BlockSystem,
    DomainKind,
    SpectrumRequest,
    assemble_block_system,
    build_mesh,
    index_from_name,
    solve_pencil,
)
from teig.twogrid import physical_pairs

_SYSTEMS: dict = {}
_SPECTRA: dict = {}


def get_system(domain: str, index: str, cells: int) -> BlockSystem:
    key = (domain, index, cells)
    if key not in _SYSTEMS:
        mesh = build_mesh(DomainKind.from_name(domain), cells)
        _SYSTEMS[key] = assemble_block_system(mesh, index_from_name(index))
    return _SYSTEMS[key]


def get_spectrum(domain: str, index: str, cells: int, how_many: int = 8):
    key = (domain, index, cells, how_many)
    if key not in _SPECTRA:
        system = get_system(domain, index, cells)
        _SPECTRA[key] = solve_pencil(system, SpectrumRequest(how_many=how_many))
    return _SPECTRA[key]


def get_physical_k(domain: str, index: str, cells: int, j: int, how_many: int = 8) -> complex:
    """j-th (1-based) physical eigenvalue k, sorted by ascending Re(k)."""
    pairs = physical_pairs(get_spectrum(domain, index, cells, how_many))
    return pairs[j - 1].k


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
