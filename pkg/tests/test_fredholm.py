import logging

import numpy as np
import pytest
from scipy.stats import norm

from bmtails import fredholm
from bmtails.errors import NumericFailure


# frozen oracle values: largest-eigenvalue distribution of the n x n
# Gaussian Hermitian ensemble with entry variance t, computed from the
# incomplete-moment Hankel determinant at 30 significant digits
GUE_CDF = {
    (2, 1.0, 0.0): 0.090845056908104664,
    (2, 1.0, 2.5): 0.94376334893927844,
    (3, 1.0, 1.0): 0.12275669329426087,
    (3, 1.0, 4.0): 0.99481944940165223,
    (5, 1.0, 2.5): 0.21626343233881375,
    (5, 5.0, 10.0): 0.97239131094844966,
    (4, 4.0, 12.0): 0.99999159310767407,
    (4, 4.0, 10.0): 0.99914398987347632,
}


def test_build_grid_shape_and_rule():
    g = fredholm.build_grid(1.5, 2.0, 32)
    assert g.size == 32 and g.nodes.shape == (32,) and g.weights.shape == (32,)
    assert g.nodes[0] > 1.5
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)
    # integrates e^{-d(x-s)} to 1/d at spectral accuracy
    val = np.sum(g.weights * np.exp(-2.0 * (g.nodes - 1.5)))
    np.testing.assert_allclose(val, 0.5, rtol=1e-12)


def test_build_grid_rejects_tiny_sizes():
    with pytest.raises(ValueError):
        fredholm.build_grid(0.0, 1.0, 4)


def test_nystrom_det_rank_one_exact():
    # kernel u(x)v(y) has det(1 - K) = 1 - <u, v>
    s, d = 0.0, 1.0
    grid = fredholm.build_grid(s, d, 48)
    kernel = lambda x, y: 0.3 * np.exp(-x) * np.exp(-2.0 * y)
    det = fredholm.nystrom_det(kernel, s, grid)
    np.testing.assert_allclose(det, 1.0 - 0.3 * (1.0 / 3.0), rtol=1e-10)


def test_nystrom_det_identity_kernel_is_one():
    grid = fredholm.build_grid(0.0, 1.0, 16)
    det = fredholm.nystrom_det(lambda x, y: np.zeros_like(x * y), 0.0, grid)
    assert det == 1.0


@pytest.mark.parametrize("s", [-1.0, 0.0, 1.0, 2.5])
def test_free_particle_is_gaussian(s):
    res = fredholm.prob_finite_n(1, 1, s)
    np.testing.assert_allclose(res.p, norm.cdf(s), atol=1e-9)
    assert res.refinement_delta <= 1e-9


def test_packed_t1_is_gaussian():
    for a in (0.5, 1.0, 2.0):
        res = fredholm.prob_packed(1, a)
        np.testing.assert_allclose(res.p, norm.cdf(2.0 + a), atol=1e-9)


@pytest.mark.parametrize("key", sorted(GUE_CDF))
def test_finite_n_matches_gue_oracle(key):
    n, t, s = key
    res = fredholm.prob_finite_n(n, int(t) if float(t).is_integer() else t, s)
    np.testing.assert_allclose(res.p, GUE_CDF[key], atol=5e-11)


def test_prob_packed_matches_gue_oracle_through_saddle_route():
    """Saddle-frame contours against the raw-level oracle, independent paths."""
    res = fredholm.prob_packed(4, 1.0)
    np.testing.assert_allclose(res.p, GUE_CDF[(4, 4.0, 12.0)], atol=1e-11)
    res = fredholm.prob_packed(4, 0.5)
    np.testing.assert_allclose(res.p, GUE_CDF[(4, 4.0, 10.0)], atol=1e-11)


def test_prob_monotone_in_level():
    for fn in (fredholm.prob_packed, fredholm.prob_flat):
        ps = [fn(4, 1.0, s_offset=s).p for s in (-1.0, 0.0, 1.0, 2.0)]
        assert all(np.diff(ps) > 0)


def test_survival_log_consistency():
    res = fredholm.prob_packed(8, 1.0)
    # log_survival carries full relative precision even when p rounds to 1
    assert res.p > 1.0 - 1e-7
    assert -30.0 < res.log_survival < -10.0
    np.testing.assert_allclose(np.exp(res.log_survival), 1.0 - res.p, rtol=1e-4)


def test_refinement_delta_below_target():
    for fn in (fredholm.prob_packed, fredholm.prob_flat):
        res = fn(4, 1.0)
        assert res.refinement_delta <= 1e-9
        assert res.im_residue <= 1e-8


def test_prob_stat_value_and_stability():
    base = fredholm.prob_stat(4, 1.0)
    again = fredholm.prob_stat(4, 1.0, grid_size=64)
    assert abs(base.p - again.p) < 1e-8
    assert 0.9 < base.p < 1.0


def test_prob_stat_rho_approaches_rho_one():
    base = fredholm.prob_stat(4, 1.0).p
    gaps = []
    for rho in (0.9, 0.95, 0.99):
        gaps.append(abs(fredholm.prob_stat_rho(4, 1.0, rho).p - base))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 5e-3


def test_prob_stat_rho_validates_rho():
    for bad in (0.0, 1.0, 1.3, -0.2):
        with pytest.raises(ValueError):
            fredholm.prob_stat_rho(4, 1.0, bad)


def test_stat_second_summand_derivative_is_smaller():
    first, second = fredholm.stat_summand_derivatives(8, 1.0)
    assert abs(second) < abs(first)


def test_tail_rate_table_columns_and_trend():
    rows = fredholm.tail_rate_table("packed", 1.0, (4, 8, 16))
    assert [row["t"] for row in rows] == [4, 8, 16]
    errs = [abs(row["r_hat"] - row["r_exact"]) for row in rows]
    assert errs[0] > errs[1] > errs[2]
    scaled = [row["scaled_survival"] for row in rows]
    assert all(v > 0 for v in scaled)
    with pytest.raises(ValueError):
        fredholm.tail_rate_table("stationary", 1.0, (4, 8))
    with pytest.raises(ValueError):
        fredholm.tail_rate_table("packed", 1.0, (8, 4))


def test_clamp_negative_roundoff(caplog):
    # a kernel engineered to give det = 1 - 1 = 0 up to roundoff: the
    # projection onto one decaying mode with unit pairing
    grid = fredholm.build_grid(0.0, 1.0, 48)

    def kernel(x, y):
        return np.exp(-y) * np.ones_like(x)

    with caplog.at_level(logging.WARNING, logger="bmtails.fredholm"):
        det = fredholm.nystrom_det(kernel, 0.0, grid)
    assert abs(det) < 1e-9


def test_prob_finite_n_validates_index():
    with pytest.raises(ValueError):
        fredholm.prob_finite_n(0, 1, 0.0)


def test_prob_finite_n_overflow_guard():
    with pytest.raises(NumericFailure):
        fredholm.prob_finite_n(3, 1, 1e4)
