import dataclasses

import numpy as np
import pytest

from bmtails import contours, rates
from bmtails.kernels import _g_vals, _h_vals


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("t", [1, 4, 16])
def test_packed_contours_geometry(a, t):
    line, circle = contours.build_packed_contours(a, t)
    w_minus, w_plus = rates.saddle_points(a)
    assert np.allclose(line.nodes.real, w_minus)
    assert abs(line.nodes[len(line.nodes) // 2] - w_minus) < 1e-12
    assert not line.closed and circle.closed
    np.testing.assert_allclose(np.abs(circle.nodes), -w_plus, rtol=1e-12)
    # circle weights sum to zero for a closed loop, line weights to i*length
    assert abs(circle.weights.sum()) < 1e-10
    # trapezoid weights on the line integrate a constant to i * (2 y_max)
    total = line.weights.sum()
    assert abs(total.real) < 1e-12
    assert total.imag > 0


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
def test_steep_descent_certificates(a):
    t = 4
    line, circle = contours.build_packed_contours(a, t)
    rep_line = contours.steep_descent_report(
        line, lambda w: _h_vals(w, a).real, 0.1
    )
    rep_circ = contours.steep_descent_report(
        circle, lambda w: -_h_vals(w, a).real, 0.1
    )
    assert rep_line.ok and rep_line.epsilon > 0
    assert rep_circ.ok and rep_circ.epsilon > 0

    path = contours.build_flat_contour(a)
    g_real = _g_vals(path.nodes, path.phi_nodes, a).real
    rep_flat = contours.steep_descent_report(path, g_real, 0.1)
    assert rep_flat.ok and rep_flat.epsilon > 0


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
def test_flat_spiral_stays_on_level_set(a):
    f = rates.rate_flat(a)
    z_a = f.saddle_lo
    path = contours.build_flat_contour(a)
    mid = np.argmin(np.abs(path.params))
    assert abs(path.nodes[mid] - z_a) < 1e-10
    # gamma e^gamma runs along the circle through z_a e^{z_a}
    level = np.abs(z_a * np.exp(z_a))
    np.testing.assert_allclose(
        np.abs(path.nodes * np.exp(path.nodes)), level, rtol=1e-9
    )
    # mirror symmetry of the two half-turns
    np.testing.assert_allclose(
        path.nodes, np.conj(path.nodes[::-1]), atol=1e-12
    )
    # companion phi nodes solve the same pre-image equation on the sheet
    # through the unit disc (W0 is analytic on the whole pre-image circle)
    np.testing.assert_allclose(
        path.phi_nodes * np.exp(path.phi_nodes), path.pre_image, rtol=1e-9
    )
    assert np.abs(path.phi_nodes).max() < 1.0
    assert -1.0 < path.phi_nodes[mid].real < 0.0


def test_line_halfwidth_shrinks_with_t():
    a = 1.0
    n_prev = None
    for t in (1, 4, 16, 64):
        line, _ = contours.build_packed_contours(a, t)
        span = line.nodes.imag.max()
        if n_prev is not None:
            assert span < n_prev
        n_prev = span


def test_contour_config_validation():
    with pytest.raises(ValueError):
        contours.ContourConfig(points_per_unit=4)
    with pytest.raises(ValueError):
        contours.ContourConfig(truncation_tol=1e-6)


def test_steep_descent_report_array_and_callable_agree():
    line, _ = contours.build_packed_contours(1.0, 4)
    vals = _h_vals(line.nodes, 1.0).real
    r1 = contours.steep_descent_report(line, vals, 0.1)
    r2 = contours.steep_descent_report(line, lambda w: _h_vals(w, 1.0).real, 0.1)
    assert r1 == r2


def test_steep_descent_flags_bad_contour():
    line, _ = contours.build_packed_contours(1.0, 4)
    # a phase that rises away from the critical point on purpose
    rigged = -_h_vals(line.nodes, 1.0).real
    rep = contours.steep_descent_report(line, rigged, 0.1)
    assert not rep.ok
    assert rep.epsilon <= 0


def test_flat_march_accuracy_survives_coarse_stepping():
    # the minimum allowed resolution must still keep every node on the
    # level set, otherwise the continuity guard would have tripped
    cfg = contours.ContourConfig(points_per_unit=8, tau_max=4.0)
    path = contours.build_flat_contour(1.0, cfg=cfg)
    z_a = rates.solve_za(1.0)
    level = np.abs(z_a * np.exp(z_a))
    np.testing.assert_allclose(
        np.abs(path.nodes * np.exp(path.nodes)), level, rtol=1e-8
    )


def test_paths_are_frozen_and_finite():
    line, circle = contours.build_packed_contours(1.0, 4)
    with pytest.raises(dataclasses.FrozenInstanceError):
        line.role = "other"
    assert np.isfinite(line.nodes).all() and np.isfinite(circle.weights).all()
