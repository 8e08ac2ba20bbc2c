"""Refractive-index coefficients n(x) and the derived weight 1/(n-1).

The weak forms integrate against the weight 1/(n(x)-1), which requires
n to stay strictly above one on the whole domain.  The three built-in
choices (constant 16, the linear tilt 8 + x1 - x2, and the radial profile
8 + 4*|x|) all satisfy inf n >= 6 on both domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

#: n(x) must exceed 1 by at least this margin for the weight to be usable.
MIN_CONTRAST = 1e-6


class RefractiveIndex:
    """Base class; subclasses implement ``n(points)`` vectorized."""

    name: str = "index"

    def n(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(RefractiveIndex):
    value: float
    name: str = "const"

    def n(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return np.full(pts.shape[:-1], self.value)


@dataclass(frozen=True)
class LinearTilt(RefractiveIndex):
    """n(x) = 8 + x1 - x2."""

    name: str = "tilt"

    def n(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return 8.0 + pts[..., 0] - pts[..., 1]


@dataclass(frozen=True)
class Radial(RefractiveIndex):
    """n(x) = 8 + 4*|x|."""

    name: str = "radial"

    def n(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return 8.0 + 4.0 * np.hypot(pts[..., 0], pts[..., 1])


def index_from_name(name: str) -> RefractiveIndex:
    """Resolve the configuration names used by the study harness."""
    if name == "const16":
        return Constant(16.0)
    if name == "tilt":
        return LinearTilt()
    if name == "radial":
        return Radial()
    raise ValueError(f"unknown index {name!r}; expected const16, tilt or radial")


def eval_n(index: RefractiveIndex, point) -> NDArray[np.float64]:
    """n at one physical point or an array of points."""
    return index.n(np.asarray(point, dtype=np.float64))


def eval_weight(index: RefractiveIndex, point) -> NDArray[np.float64]:
    """The weight 1/(n-1); raises if the contrast n-1 degenerates."""
    n = eval_n(index, point)
    if np.any(n <= 1.0 + MIN_CONTRAST):
        raise ValueError(
            f"refractive index reaches {np.min(n)}, too close to 1 for the "
            "weighted inner product"
        )
    return 1.0 / (n - 1.0)
