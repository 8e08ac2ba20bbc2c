"""Refractive-index coefficients and the 1/(n-1) weight."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from teig.coefficients import Constant, LinearTilt, Radial, eval_n, eval_weight, index_from_name
from teig.mesh import DomainKind


def test_constant_everywhere():
    idx = Constant(16.0)
    assert eval_n(idx, (0.3, -0.2)) == 16.0
    assert eval_weight(idx, (0.0, 0.0)) == pytest.approx(1.0 / 15.0, rel=1e-15)


def test_tilt_values():
    idx = LinearTilt()
    assert eval_n(idx, (0.25, -0.25)) == pytest.approx(8.5)
    # the corner where the tilt is smallest on the unit square
    assert eval_weight(idx, (-0.5, 0.5)) == pytest.approx(1.0 / 6.0, rel=1e-15)


def test_radial_values():
    idx = Radial()
    assert eval_n(idx, (0.0, 0.0)) == pytest.approx(8.0)
    assert eval_weight(idx, (1.0, 1.0)) == pytest.approx(1.0 / (7.0 + 4.0 * math.sqrt(2.0)), rel=1e-15)


def test_vectorized_eval():
    pts = np.array([[0.0, 0.0], [0.25, -0.25]])
    assert np.allclose(eval_n(LinearTilt(), pts), [8.0, 8.5])


def test_weight_breakdown_signals():
    with pytest.raises(ValueError):
        eval_weight(Constant(1.0000001), (0.0, 0.0))


def test_names():
    assert index_from_name("const16") == Constant(16.0)
    assert index_from_name("tilt") == LinearTilt()
    assert index_from_name("radial") == Radial()
    with pytest.raises(ValueError):
        index_from_name("nope")


@pytest.mark.parametrize("domain", [DomainKind.UNIT_SQUARE, DomainKind.L_SHAPED])
@pytest.mark.parametrize("name", ["const16", "tilt", "radial"])
def test_weight_positive_on_grid(domain, name):
    idx = index_from_name(name)
    if domain is DomainKind.UNIT_SQUARE:
        g = np.linspace(-0.5, 0.5, 101)
        pts = np.array([(x, y) for x in g for y in g])
    else:
        g = np.linspace(-1.0, 1.0, 101)
        pts = np.array([(x, y) for x in g for y in g if not (x > 0 and y < 0)])
    w = eval_weight(idx, pts)
    assert np.all(w > 0)
    assert np.all(eval_n(idx, pts) >= 1.5)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_radial_at_least_eight(x, y):
    assert eval_n(Radial(), (x, y)) >= 8.0
