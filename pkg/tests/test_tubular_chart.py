import math

import numpy as np
import pytest

from defectlab.scenarios import circle_chart
from defectlab.string_geometry import CircleSurface, normal_frame, static_line
from defectlab.tubular_chart import (ChartError, block_inverse, build_chart, minimality_record,
                                     verify_metric_bounds)


@pytest.fixture(scope="module")
def chart():
    return circle_chart(2.0, 1.0, 1.2)


@pytest.fixture(scope="module")
def line_chart():
    surf = static_line(1.0, 2)
    return build_chart(surf, normal_frame(surf, 1), 0.4, 1.0, spatial_period=[1.0, 0.0])


def test_static_line_chart_is_identity(line_chart):
    y = np.array([[0.2, 0.3, 0.1], [-0.5, 0.9, -0.35]])
    assert np.allclose(line_chart.psi(y), y)
    m = line_chart.metric(y)
    assert np.allclose(m.G, np.diag([-1.0, 1.0, 1.0]))
    assert np.allclose(m.drift, 0.0)


def test_static_line_inversion_wraps(line_chart):
    pts = np.array([[0.1, 1.25, 0.2], [0.0, -0.1, -0.3]])
    y, inside = line_chart.invert(pts)
    assert inside.all()
    assert np.allclose(y, [[0.1, 0.25, 0.2], [0.0, 0.9, -0.3]])


def test_circle_distance_at_rest(chart):
    # the circle is momentarily at rest, so the normal offset at t = 0 is r - R
    r = np.array([1.3, 1.9, 2.0, 2.5, 2.95])
    th = np.array([0.1, 1.0, 2.0, 3.0, 4.0])
    pts = np.column_stack([np.zeros(5), r * np.cos(th), r * np.sin(th)])
    y, inside = chart.invert(pts)
    assert inside.all()
    assert np.allclose(y[:, 2], r - 2.0, atol=1e-10)
    assert np.allclose(y[:, 0], 0.0, atol=1e-10)
    assert np.allclose(y[:, 1], np.mod(th / (2 * math.pi), 1.0), atol=1e-10)


def test_inversion_round_trip(chart, rng):
    y = np.column_stack([rng.uniform(-1.1, 1.1, 200), rng.uniform(0, 1, 200),
                         rng.uniform(-0.95, 0.95, 200)])
    back, inside = chart.invert(chart.psi(y))
    assert inside.all()
    assert np.allclose(back, y, atol=1e-9)


def test_points_outside_chart(chart):
    pts = np.array([[0.0, 0.0, 0.0], [0.0, 3.5, 0.0]])
    _, inside = chart.invert(pts, strict=False)
    assert not inside.any()


def test_distance_on_grid_matches_inversion(chart):
    ax = np.linspace(-3.2, 3.2, 256, endpoint=False)
    d, rate = chart.distance_on_grid(0.4, [ax, ax], coarse=4, time_derivative=True)
    X, Y = np.meshgrid(ax[::7], ax[::9], indexing="ij")
    pts = np.stack([np.full(X.size, 0.4), X.ravel(), Y.ravel()], -1)
    y, ins = chart.invert(pts, strict=False)
    exact = np.where(ins, y[:, 2], np.nan).reshape(X.shape)
    sub = d[::7, ::9]
    assert np.array_equal(np.isnan(sub), np.isnan(exact))
    assert np.nanmax(np.abs(sub - exact)) < 1e-4
    assert np.all(rate[np.isnan(d)] == 0.0)


def test_distance_rate_matches_finite_difference(chart):
    ax = np.linspace(-3.2, 3.2, 128, endpoint=False)
    h = 1e-4
    _, rate = chart.distance_on_grid(0.3, [ax, ax], coarse=1, time_derivative=True)
    dp = chart.distance_on_grid(0.3 + h, [ax, ax], coarse=1)
    dm = chart.distance_on_grid(0.3 - h, [ax, ax], coarse=1)
    fd = (dp - dm) / (2 * h)
    ok = np.isfinite(fd)
    assert np.nanmax(np.abs(rate[ok] - fd[ok])) < 1e-6


def test_block_inverse(chart, rng):
    y = np.column_stack([rng.uniform(-1, 1, 20), rng.uniform(0, 1, 20), rng.uniform(-0.9, 0.9, 20)])
    G = chart.metric(y).G
    assert np.allclose(block_inverse(G, 2), np.linalg.inv(G), atol=1e-10)


def test_metric_is_lorentzian(chart, rng):
    y = np.column_stack([rng.uniform(-1.2, 1.2, 100), rng.uniform(0, 1, 100),
                         rng.uniform(-1, 1, 100)])
    m = chart.metric(y)
    ev = np.linalg.eigvalsh(m.G)
    assert np.all(ev[:, 0] < 0) and np.all(ev[:, 1:] > 0)
    assert np.all(np.linalg.eigvalsh(m.a) > 0)


def test_initial_graph_is_flat_for_resting_circle(chart):
    graph = chart.initial_graph(n1=32, nnu=9)
    assert graph.residual < 1e-12
    assert np.max(np.abs(graph.b)) < 1e-12


def test_metric_bounds_finite(chart):
    rep = verify_metric_bounds(chart, samples=1000, seed=3)
    assert rep.passed
    names = {r.name for r in rep.records}
    assert {"coeffs1", "coeffs2", "coeffs3", "pos1", "pos1a", "ps0lbd", "cstar"} <= names
    assert rep.get("ps0lbd").constant > 0
    again = verify_metric_bounds(chart, samples=1000, seed=3)
    assert again.to_json() == rep.to_json()


def test_minimality_residual_separates_control(chart):
    assert minimality_record(chart).constant <= 1e-6
    control = CircleSurface(2.0, speed=0.8)
    cchart = build_chart(control, normal_frame(control, 1, orientation=-1.0), 1.0, 1.2)
    assert minimality_record(cchart).constant >= 1e-2


def test_build_chart_shrinks_radius():
    surf = CircleSurface(1.0)
    chart = build_chart(surf, normal_frame(surf, 1, orientation=-1.0), 1.5, 0.3)
    assert chart.rho0 < 1.0
    assert chart.requested_rho0 == 1.5


def test_build_chart_gives_up():
    surf = CircleSurface(1.0)
    with pytest.raises(ChartError):
        build_chart(surf, normal_frame(surf, 1), 1.5, 0.3, min_radius=1.2)
