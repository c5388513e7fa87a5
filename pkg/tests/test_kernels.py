import dataclasses

import numpy as np
import pytest

from bmtails import contours, kernels, rates


def test_khat_packed_reference_value():
    res = kernels.khat_packed(1.0, 4, 0.3, 0.7)
    np.testing.assert_allclose(res.value, 7.550797077606376e-06, rtol=1e-10)
    assert res.im_residue <= 1e-10
    assert res.refinement_delta <= 1e-12


def test_khat_packed_deformation_invariance():
    a, t = 1.0, 4
    base = kernels.khat_packed(a, t, 0.3, 0.7).value
    line, circle = contours.build_packed_contours(a, t)
    for fac in (0.9, 1.1):
        moved = dataclasses.replace(
            circle, nodes=circle.nodes * fac, weights=circle.weights * fac
        )
        val = kernels.khat_packed_grid(
            a, t, np.array([0.3]), np.array([0.7]), (line, moved)
        )[0, 0]
        assert abs(val.real - base) <= 1e-8
        assert abs(val.imag) <= 1e-10


def test_khat_matches_raw_kernel_at_shifted_level():
    """Same object through two unrelated discretizations.

    The conjugated saddle-frame kernel at offset (xi1, xi2) must equal the
    raw integer-index kernel evaluated at level (2+a)t + xi on a generic
    line/circle pair; all constant factors cancel in the shift.
    """
    a, t = 1.0, 4
    shift = (2.0 + a) * t
    for x1, x2 in ((0.0, 0.0), (0.3, 0.7), (1.5, 0.2)):
        hat = kernels.khat_packed(a, t, x1, x2).value
        raw = kernels.raw_kernel_grid(
            t, t, np.array([shift + x1]), np.array([shift + x2]),
            line_re=-1.0, circle_rad=0.5, sigma=1.0,
        )[0, 0]
        np.testing.assert_allclose(raw.real, hat, rtol=1e-10)
        assert abs(raw.imag) <= 1e-12


def test_raw_kernel_deformation_invariance():
    # sigma pinned: the default conjugation tracks the line and would change
    # the represented (equivalent) kernel
    val = None
    for c, r in ((-1.0, 0.5), (-1.3, 0.4), (-0.8, 0.6)):
        cur = kernels.raw_kernel_grid(
            3, 2.0, np.array([5.0]), np.array([5.5]),
            line_re=c, circle_rad=r, sigma=1.0,
        )[0, 0]
        if val is not None:
            np.testing.assert_allclose(cur.real, val, rtol=1e-9)
        val = cur.real


def test_raw_kernel_validates_nesting():
    with pytest.raises(ValueError):
        kernels.raw_kernel_grid(2, 1.0, np.zeros(1), np.zeros(1),
                                line_re=-1.0, circle_rad=1.5)
    with pytest.raises(ValueError):
        kernels.raw_kernel_grid(0, 1.0, np.zeros(1), np.zeros(1),
                                line_re=-1.0, circle_rad=0.5)


@pytest.mark.parametrize("ic,power", [("packed", 1.0), ("flat", 0.5)])
def test_rescaled_kernel_approaches_limit(ic, power):
    a = 1.0
    if ic == "packed":
        rate = rates.rate_packed(a)
        evaluate = lambda t, x1, x2: kernels.khat_packed(a, t, x1, x2).value
    else:
        rate = rates.rate_flat(a).rate
        evaluate = lambda t, x1, x2: kernels.khat_flat(a, t, x1, x2).value
    lim = kernels.klimit(ic, a)
    x1, x2 = 0.5, 0.25
    errs = []
    for t in (4, 8, 16):
        scaled = t ** power * np.exp(t * rate) * evaluate(t, x1, x2)
        errs.append(abs(scaled / lim(x1, x2) - 1.0))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.15


def test_klimit_normalization_switch():
    lim = kernels.klimit("packed", 1.0)
    raw = kernels.klimit("packed", 1.0, normalized=False)
    np.testing.assert_allclose(
        raw(0.3, 0.8) / lim(0.3, 0.8), 4.0 * np.pi ** 2, rtol=1e-13
    )


def test_klimit_exponential_profile():
    a = 1.0
    w_minus, w_plus = rates.saddle_points(a)
    lim = kernels.klimit("packed", a)
    # log-linear in each argument with slopes w-+1 and -(w+ + 1)
    d1 = np.log(lim(1.0, 0.0)) - np.log(lim(0.0, 0.0))
    d2 = np.log(lim(0.0, 1.0)) - np.log(lim(0.0, 0.0))
    np.testing.assert_allclose(d1, w_minus + 1.0, rtol=1e-12)
    np.testing.assert_allclose(d2, -(w_plus + 1.0), rtol=1e-12)


def test_khat_flat_reference_and_invariance():
    a, t = 1.0, 4
    res = kernels.khat_flat(a, t, 0.0, 0.0)
    assert res.im_residue <= 1e-10
    # doubling the nominal tau window must not move the value (the tail is
    # already below the truncation tolerance)
    cfg6 = contours.ContourConfig(tau_max=6.0)
    res6 = kernels.khat_flat(a, t, 0.0, 0.0, cfg=cfg6)
    assert abs(res.value - res6.value) <= 1e-8


def test_stat_components_identities():
    a, t = 1.0, 4
    for s in (0.0, 0.5, 2.0):
        comp = kernels.stat_components(a, t, s)
        # derivative identity: d/ds r_hat = g_one(s) - 1
        np.testing.assert_allclose(
            comp.r_hat_prime, comp.g_one(s) - 1.0, atol=1e-12
        )
        assert comp.f_hat_t == pytest.approx(s + a * t + comp.r_hat - 1.0)
        xs = s + np.array([0.0, 5.0, 15.0])
        fs = comp.f_star(xs)
        assert abs(fs[2]) < 1e-12 and abs(fs[0]) < 1.0
        gs = comp.g_one(xs)
        assert np.all(np.abs(gs - 1.0) < 0.1)
    # finite differences corroborate the analytic s-derivative
    h = 1e-5
    up = kernels.stat_components(a, t, 0.5 + h).r_hat
    dn = kernels.stat_components(a, t, 0.5 - h).r_hat
    mid = kernels.stat_components(a, t, 0.5)
    np.testing.assert_allclose((up - dn) / (2 * h), mid.r_hat_prime, atol=1e-9)


def test_stat_rho_pieces_consistency():
    a, t, s, rho = 1.0, 4, 0.5, 0.9
    cts = contours.build_packed_contours(a, t)
    line, circle = cts
    radius = np.abs(circle.nodes).max()
    if radius >= rho:
        scale = 0.9 * rho / radius
        circle = dataclasses.replace(
            circle, nodes=circle.nodes * scale, weights=circle.weights * scale
        )
    g_rho, pair_res, pair_circ = kernels.stat_rho_pieces(a, t, s, rho, (line, circle))
    # residue part dominates the tail of g_rho with decay rate 1 - rho
    big = 60.0
    expected = np.exp(-t * rates.phase_packed(-rho, a)) * np.exp(-(1 - rho) * big)
    np.testing.assert_allclose(g_rho(big), expected, rtol=1e-6)
    # the two pairing scalars are finite and real
    assert np.isfinite(pair_res) and np.isfinite(pair_circ)
    # contour-first tail integral of the residue part matches pair_res
    np.testing.assert_allclose(
        pair_res,
        np.exp(-t * rates.phase_packed(-rho, a)) * np.exp(-(1 - rho) * s) / (1 - rho),
        rtol=1e-12,
    )


def test_stat_rho_pieces_rejects_wide_circle():
    a, t = 1.0, 4
    cts = contours.build_packed_contours(a, t)
    from bmtails.errors import NumericFailure
    with pytest.raises(NumericFailure):
        kernels.stat_rho_pieces(a, t, 0.0, 0.05, cts)
