import numpy as np
import pytest
import scipy.special

from bmtails.lambertw import lambert_w, phi, phi_prime, solve_wexpw


EM1 = np.exp(-1.0)


def sample_box(seed, count):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-2, 2, count) + 1j * rng.uniform(-2, 2, count)
    return z[np.abs(z) > 1e-3]


@pytest.mark.parametrize("branch", [-2, -1, 0, 1, 2])
def test_defining_identity_on_random_points(branch):
    z = sample_box(7, 10_000)
    w = lambert_w(branch, z)
    resid = np.abs(w * np.exp(w) - z)
    assert np.all(resid <= 1e-12 * (1.0 + np.abs(z)))


@pytest.mark.parametrize("branch", [-2, -1, 0, 1, 2])
def test_agrees_with_scipy(branch):
    z = sample_box(11, 4_000)
    w = lambert_w(branch, z)
    ref = scipy.special.lambertw(z, k=branch)
    np.testing.assert_allclose(w, ref, rtol=1e-10, atol=1e-10)


def test_known_values():
    # principal branch at -0.2, real
    np.testing.assert_allclose(
        lambert_w(0, -0.2), -0.2591711018190738, rtol=1e-14
    )
    # omega constant
    np.testing.assert_allclose(
        lambert_w(0, 1.0).real, 0.5671432904097838, rtol=1e-14
    )
    assert lambert_w(0, 1.0).imag == 0.0


def test_branch_point_snap():
    """Within 1e-12 of -1/e the branches 0 and -1 both return exactly -1."""
    for k in (0, -1):
        w = lambert_w(k, -EM1)
        assert w == -1.0
        w = lambert_w(k, -EM1 + 5e-13)
        assert w == -1.0


def test_real_line_branches_stay_real():
    x = np.linspace(-EM1 + 1e-8, 20.0, 500)
    w0 = lambert_w(0, x)
    assert np.abs(w0.imag).max() == 0.0
    assert np.all(np.diff(w0.real) > 0)

    xm = np.linspace(-EM1 + 1e-8, -1e-8, 500)
    wm = lambert_w(-1, xm)
    assert np.abs(wm.imag).max() == 0.0
    assert np.all(wm.real <= -1.0)


def test_phi_values_and_derivative():
    np.testing.assert_allclose(phi(-2.0), -0.40637573995996, rtol=1e-13)
    np.testing.assert_allclose(phi_prime(-2.0), -0.34228363572316767, rtol=1e-13)
    # phi solves phi e^phi = z e^z
    for z in (-1.5, -2.0, -5.0, -12.0):
        p = phi(z)
        assert -1.0 < p < 0.0
        np.testing.assert_allclose(p * np.exp(p), z * np.exp(z), rtol=1e-13)
    # derivative against central differences
    h = 1e-6
    fd = (phi(-2.0 + h) - phi(-2.0 - h)) / (2 * h)
    np.testing.assert_allclose(phi_prime(-2.0), fd, rtol=1e-8)


def test_phi_vectorized_matches_scalar():
    z = np.linspace(-8.0, -1.1, 40)
    vec = phi(z)
    scl = np.array([phi(float(v)) for v in z])
    np.testing.assert_allclose(vec, scl, rtol=1e-13)
    # the identity part passes through untouched
    mixed = np.array([-3.0, -0.5, 0.7])
    np.testing.assert_array_equal(phi(mixed)[1:], mixed[1:])


def test_solve_wexpw_tracks_seed_branch():
    # continuation solve used by the flat contour: target just off the real
    # locus, seeded with the real solution, must stay on the same sheet
    z0 = -2.4
    target = z0 * np.exp(z0) * np.exp(0.05j)
    g = solve_wexpw(target, z0)
    np.testing.assert_allclose(g * np.exp(g), target, rtol=1e-12)
    assert abs(g - z0) < 0.2
