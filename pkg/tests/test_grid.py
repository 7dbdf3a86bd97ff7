import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectlab.grid import Grid, apply_separable, interpolate, interpolation_matrix


def test_box_spacing_and_axes():
    g = Grid.box((0.0, -1.0), (1.0, 1.0), (10, 21), (True, False))
    assert g.spacing == pytest.approx((0.1, 0.1))
    assert g.axes()[0][-1] == pytest.approx(0.9)
    assert g.axes()[1][-1] == pytest.approx(1.0)


def test_quadrature_weights_integrate_constants():
    g = Grid.box((0.0, -1.0), (1.0, 1.0), (10, 21), (True, False))
    assert np.sum(g.quadrature_weights()) == pytest.approx(2.0)


def test_grid_round_trip():
    g = Grid.box((0.0, -1.0), (1.0, 1.0), (8, 9), (True, False))
    assert Grid.from_dict(g.to_dict()) == g


def test_interpolation_is_exact_for_cubics():
    g = Grid.box((-1.0, -1.0), (1.0, 1.0), (41, 41), (False, False))
    x, y = g.mesh()
    f = x ** 3 - 2 * x * y ** 2 + y
    pts = np.array([[0.123, -0.377], [0.5, 0.25], [-0.61, 0.07]])
    val = interpolate(g, f[None], pts)
    ex = pts[:, 0] ** 3 - 2 * pts[:, 0] * pts[:, 1] ** 2 + pts[:, 1]
    assert np.allclose(val[0], ex, atol=1e-12)


def test_periodic_interpolation_wraps():
    g = Grid.box((0.0,), (1.0,), (64,), (True,))
    f = np.sin(2 * np.pi * g.axes()[0])
    val = interpolate(g, f[None], np.array([[0.999], [1.3]]))
    assert np.allclose(val[0], np.sin(2 * np.pi * np.array([0.999, 1.3])), atol=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 40), st.integers(8, 40))
def test_separable_matches_pointwise(n1, n2):
    ax1 = np.linspace(-1, 1, n1)
    ax2 = np.linspace(0, 2, n2)
    vals = np.add.outer(ax1 ** 2, np.cos(ax2))
    t1 = np.linspace(-0.7, 0.7, 5)
    t2 = np.linspace(0.4, 1.6, 6)
    m1, ok1 = interpolation_matrix(ax1[0], ax1[1] - ax1[0], n1, t1)
    m2, ok2 = interpolation_matrix(ax2[0], ax2[1] - ax2[0], n2, t2)
    out = apply_separable([m1, m2], vals)
    assert ok1.all() and ok2.all()
    h = max(ax1[1] - ax1[0], ax2[1] - ax2[0])
    assert np.allclose(out, np.add.outer(t1 ** 2, np.cos(t2)), atol=h ** 4)
