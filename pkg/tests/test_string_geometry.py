import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectlab.string_geometry import (CircleGenerator, CircleSurface, CuspError, area_functional,
                                       build_generators, circle_string, evolve_string,
                                       first_cusp_time, mdot, minkowski, normal_frame,
                                       normal_velocity, orthogonalize_gauge, rigid_wiggle_string,
                                       static_line, surface_tensor, translating_graph)
from defectlab.scenarios import sine_graph


def test_minkowski_and_mdot():
    assert np.array_equal(minkowski(3), np.diag([-1.0, 1.0, 1.0]))
    assert mdot(np.array([2.0, 1.0, 1.0]), np.array([1.0, 3.0, 0.0])) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.5), st.floats(0.0, 1.0))
def test_dalembert_circle_matches_closed_form(t, y):
    R = 2.0
    a = circle_string(R).jet(t, y)
    b = CircleSurface(R).jet(t, y)
    for f in ("H", "Ht", "Hy", "Htt", "Hty", "Hyy"):
        assert np.allclose(getattr(a, f), getattr(b, f), atol=1e-12)


def test_circle_generator_unit_speed():
    assert CircleGenerator(1.7).unit_speed_residual() < 1e-14


def test_static_line_jet():
    j = static_line(2.0, 3).jet(0.3, 0.25)
    assert np.allclose(j.H, [0.3, 0.5, 0.0, 0.0])
    assert np.allclose(j.Ht, [1.0, 0.0, 0.0, 0.0])
    assert np.allclose(j.Hy, [0.0, 2.0, 0.0, 0.0])


def test_circle_slice_gauge_and_speed():
    sl = evolve_string(circle_string(2.0), 0.7)
    assert sl.gauge_residual < 1e-12
    assert np.allclose(sl.normal_speed, math.sin(0.7 / 2.0))
    assert np.allclose(np.linalg.norm(sl.points, axis=1), 2.0 * math.cos(0.35))


def test_circle_cusp_time():
    R = 1.5
    t = first_cusp_time(circle_string(R), 3.0)
    assert t == pytest.approx(R * math.acos(1e-3), abs=1e-5)
    with pytest.raises(CuspError):
        evolve_string(circle_string(R), R * math.pi / 2)


def test_normal_velocity_rejects_null_points():
    with pytest.raises(ValueError):
        normal_velocity(circle_string(1.0), math.pi / 2, np.array([0.0]))


def test_circle_area_closed_form():
    R = 2.0
    t = np.linspace(0, 1, 5)
    emt = surface_tensor(circle_string(R), t, ny=256)
    dens = np.sum(emt.area, axis=1) / 256
    assert np.allclose(dens, 2 * math.pi * R * np.cos(t / R) ** 2, rtol=1e-12)
    tf = np.linspace(0, 1, 81)
    fd = area_functional(lambda T, Y: circle_string(R).jet(T, Y).H, tf, ny=256)
    exact = 2 * math.pi * R * (tf[-1] / 2 + R * math.sin(2 * tf[-1] / R) / 4)
    assert fd == pytest.approx(exact, rel=1e-5)


def test_static_line_projection():
    emt = surface_tensor(static_line(1.0, 2), [0.0, 0.5], ny=16)
    assert np.allclose(emt.projection, np.diag([1.0, 1.0, 0.0]))
    assert np.allclose(emt.area, 1.0)


def test_surface_pairing_of_constant_test():
    emt = surface_tensor(static_line(1.0, 2), np.linspace(0, 1, 11), ny=32)
    mat = emt.pair_components(lambda p: np.ones(p.shape[:-1]))
    assert np.allclose(mat, np.diag([1.0, 1.0, 0.0]))
    test = lambda p: np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3))
    assert emt.pair(test) == pytest.approx(2.0)


def test_k1_frame_orthonormal():
    surf = circle_string(2.0)
    frame = normal_frame(surf, 1, orientation=-1.0)
    t, y = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(0, 1, 17), indexing="ij")
    ortho, tang = frame.residuals(t, y)
    assert ortho < 1e-12 and tang < 1e-12
    nu = frame.evaluate(np.array(0.0), np.array(0.0))[0][0]
    # orientation -1 points outward at t = 0
    assert np.allclose(nu, [0.0, 1.0, 0.0])


def test_k2_frame_on_static_line():
    surf = static_line(1.0, 3)
    frame = normal_frame(surf, 2, ny=64, t_grid=np.linspace(-1, 1, 9))
    t, y = np.meshgrid(np.linspace(-1, 1, 3), np.linspace(0, 1, 9), indexing="ij")
    ortho, tang = frame.residuals(t, y)
    assert ortho < 1e-10 and tang < 1e-10
    assert frame.holonomy < 1e-10


def test_frame_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        normal_frame(static_line(1.0, 3), 1)
    with pytest.raises(ValueError):
        normal_frame(static_line(1.0, 2), 3)


def test_build_generators_reproduce_circle():
    R = 1.3
    pos = lambda s: R * np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)])
    vel = lambda s: np.zeros((len(s), 2))
    a, b = build_generators(pos, vel, np.zeros(2), samples=2048)
    assert a.period == pytest.approx(2 * np.pi * R, rel=1e-8)
    assert a.unit_speed_residual() < 1e-6


def test_rigid_wiggle_slices_are_translated_graphs():
    g, dg = sine_graph(0.1, 1.0)
    surf = rigid_wiggle_string(g, dg)
    y = np.linspace(0, 1, 64, endpoint=False)
    for t in (0.0, 0.3):
        pts = surf.jet(np.full(y.size, t), y).H
        assert np.allclose(pts[:, 2], g(pts[:, 1] - t), atol=1e-6)


def test_orthogonalized_translating_graph():
    g, dg = sine_graph(0.1, 1.0)
    surf = orthogonalize_gauge(translating_graph(g, dg), t_range=(-0.25, 0.25), nt=33, ny=128)
    assert surf.gauge_residual < 1e-5
    # every slice still lies on the translated graph
    pts = surf.slice_points(len(surf.t) - 1)
    assert np.allclose(pts[:, 1], g(pts[:, 0] - surf.t[-1]), atol=1e-10)


def test_orthogonalize_needs_zero_in_range():
    g, dg = sine_graph(0.1, 1.0)
    with pytest.raises(ValueError):
        orthogonalize_gauge(translating_graph(g, dg), t_range=(0.1, 0.2))
