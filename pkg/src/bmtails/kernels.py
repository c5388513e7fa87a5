"""Contour-integral kernels entering the Fredholm determinants.

The conjugated packed kernel is a double contour integral over the saddle
contours,

    Khat(x1, x2) = (2 pi i)^-2 int dw oint dz
                   e^{t(H(w) - H(z))} e^{x1(w+1) - x2(z+1)} / (w - z),

with w on the vertical line through the left saddle and z on the circle
through the right saddle.  The flat kernel is a single integral along the
Lambert spiral with the image branch phi carried along,

    Khat(x1, x2) = int dtau e^{t G(gamma)} (gamma / (1 + gamma))
                   e^{x1(gamma+1) - x2(phi(gamma)+1)}.

Both are evaluated on whole quadrature grids at once by splitting the
integrand into per-contour-node factors; the double integral couples the
two contours only through the Cauchy factor 1/(w - z), which becomes a
fixed matrix.  All exponents are assembled before exponentiation, and on
the saddle contours every exponential factor has modulus at most one, so
the evaluation never overflows regardless of t.

The stationary one-point formula needs three further contour objects
(a boundary-value remainder, a rank-one pair) which share the packed
contours; they are collected by :func:`stat_components`.  A raw kernel for
finite particle index n on generic contours (vertical line, small circle
around the pole of order n) supports cross-checks against exact Gaussian
and matrix-diagonalization laws at small n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contours import ContourConfig, build_flat_contour, build_packed_contours
from .errors import NumericFailure
from .lambertw import phi
from .rates import (
    check_a,
    flat_curvature,
    phase_packed,
    phase_packed_d2,
    saddle_points,
    solve_za,
)

_IM_TOL = 1e-8
_TWO_PI_I = 2j * np.pi
_DOUBLE_PREF = -1.0 / (4.0 * np.pi ** 2)  # 1 / (2 pi i)^2


@dataclass(frozen=True)
class KernelEval:
    value: float
    im_residue: float
    refinement_delta: float


@dataclass(frozen=True)
class StatComponents:
    r_hat: float
    r_hat_prime: float
    f_star: Callable
    g_one: Callable
    f_hat_t: float


def _check_time(t):
    t = float(t)
    if not np.isfinite(t) or t <= 0:
        raise ValueError(f"time parameter must be finite and > 0, got {t}")
    return t


def _h_vals(w, a):
    """Packed phase on a complex array (principal log branch)."""
    w = np.asarray(w, dtype=complex)
    return (w * w - 1.0) / 2.0 + (2.0 + a) * (w + 1.0) + np.log(-w)


def _g_vals(z, phi, a):
    return (z * z - phi * phi) / 2.0 + (1.0 + a) * (z - phi)


def _doubled(cfg):
    return ContourConfig(
        points_per_unit=2 * cfg.points_per_unit,
        truncation_tol=cfg.truncation_tol,
        tau_max=cfg.tau_max,
    )


def _demand_real(value, what):
    im = abs(value.imag)
    if im > _IM_TOL * (1.0 + abs(value)):
        raise NumericFailure(
            f"{what} has imaginary residue {im:.3e}",
            last=value,
            residual=im,
            hint="double the contour node density",
        )
    return im


# ---------------------------------------------------------------------------
# packed kernel


def khat_packed_grid(a, t, xi1, xi2, contours):
    """Conjugated packed kernel on the product grid xi1 x xi2 (complex)."""
    line, circle = contours
    w = line.nodes
    z = circle.nodes
    aw = line.weights * np.exp(t * _h_vals(w, a))
    bz = circle.weights * np.exp(-t * _h_vals(z, a))
    e1 = np.exp(np.multiply.outer(np.asarray(xi1, dtype=float), w + 1.0))
    e2 = np.exp(-np.multiply.outer(np.asarray(xi2, dtype=float), z + 1.0))
    cauchy = 1.0 / np.subtract.outer(w, z)
    return _DOUBLE_PREF * ((e1 * aw) @ cauchy @ (e2 * bz).T)


def khat_packed(a, t, xi1, xi2, contours=None, cfg=None):
    """Pointwise conjugated packed kernel with a refinement certificate."""
    a = check_a(a)
    t = _check_time(t)
    cfg = cfg or ContourConfig()
    if contours is None:
        contours = build_packed_contours(a, t, cfg)
    coarse = khat_packed_grid(a, t, [xi1], [xi2], contours)[0, 0]
    fine = khat_packed_grid(a, t, [xi1], [xi2], build_packed_contours(a, t, _doubled(cfg)))[0, 0]
    im = _demand_real(fine, "packed kernel value")
    return KernelEval(value=float(fine.real), im_residue=im, refinement_delta=abs(fine - coarse))


# ---------------------------------------------------------------------------
# flat kernel


def flat_contour_for(a, t, cfg=None, z_a=None):
    """Lambert spiral dense enough for the time-t phase e^{tG}.

    The parameter-space Gaussian width at the saddle is 1/sqrt(t |eta|), so
    the configured density is raised accordingly, and the spiral is trimmed
    where e^{tG} is far below the truncation tolerance.
    """
    a = check_a(a)
    t = _check_time(t)
    cfg = cfg or ContourConfig()
    if z_a is None:
        z_a = solve_za(a)
    eta = flat_curvature(z_a, a)
    ppu = max(cfg.points_per_unit, int(np.ceil(16.0 * np.sqrt(t * abs(eta)))))
    span = 2.0 * np.sqrt(2.0 * np.log(1.0 / cfg.truncation_tol) / (t * abs(eta)))
    tau_max = min(cfg.tau_max, max(0.5, span))
    dense = ContourConfig(points_per_unit=ppu, truncation_tol=cfg.truncation_tol, tau_max=tau_max)
    return build_flat_contour(a, dense, z_a=z_a)


def khat_flat_grid(a, t, xi1, xi2, path):
    """Conjugated flat kernel on the product grid xi1 x xi2 (complex)."""
    gam = path.nodes
    phi = path.phi_nodes
    # weights already carry dtau * gamma' = dtau * 2 pi i gamma/(1+gamma)
    core = path.weights * np.exp(t * _g_vals(gam, phi, a)) / _TWO_PI_I
    e1 = np.exp(np.multiply.outer(np.asarray(xi1, dtype=float), gam + 1.0))
    e2 = np.exp(-np.multiply.outer(np.asarray(xi2, dtype=float), phi + 1.0))
    return (e1 * core) @ e2.T


def khat_flat(a, t, xi1, xi2, path=None, cfg=None):
    """Pointwise conjugated flat kernel with a refinement certificate."""
    a = check_a(a)
    t = _check_time(t)
    cfg = cfg or ContourConfig()
    z_a = solve_za(a)
    if path is None:
        path = flat_contour_for(a, t, cfg, z_a=z_a)
    coarse = khat_flat_grid(a, t, [xi1], [xi2], path)[0, 0]
    fine_path = flat_contour_for(a, t, _doubled(cfg), z_a=z_a)
    fine = khat_flat_grid(a, t, [xi1], [xi2], fine_path)[0, 0]
    im = _demand_real(fine, "flat kernel value")
    return KernelEval(value=float(fine.real), im_residue=im, refinement_delta=abs(fine - coarse))


# ---------------------------------------------------------------------------
# stationary pieces (shared packed contours)


def stat_components(a, t, s_offset, cfg=None, contours=None):
    """Contour data for the stationary one-point formula at offset s.

    Returns the boundary remainder r_hat = Rhat_t(s), its s-derivative,
    the rank-one pair (f_star decaying, g_one bounded) and the scalar
    prefactor f_hat_t = s + a t + Rhat_t(s) - 1.  The callables accept
    scalar or array offsets >= s and return real values.
    """
    a = check_a(a)
    t = _check_time(t)
    s = float(s_offset)
    cfg = cfg or ContourConfig()
    if contours is None:
        contours = build_packed_contours(a, t, cfg)
    line, circle = contours
    w = line.nodes
    z = circle.nodes
    zp1 = z + 1.0
    wp1 = w + 1.0
    aw = line.weights * np.exp(t * _h_vals(w, a))
    bz = circle.weights * np.exp(-t * _h_vals(z, a))

    r_hat_c = -np.sum(bz * np.exp(-s * zp1) / zp1 ** 2) / _TWO_PI_I
    r_hat_prime_c = np.sum(bz * np.exp(-s * zp1) / zp1) / _TWO_PI_I
    _demand_real(r_hat_c, "stationary boundary remainder")
    _demand_real(r_hat_prime_c, "stationary boundary remainder derivative")

    # the Cauchy-coupled part of f_star reuses a fixed z-side vector
    cauchy_vec = (1.0 / np.subtract.outer(w, z)) @ (bz * np.exp(-s * zp1) / zp1)

    def f_star(xi):
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        e1 = np.exp(np.multiply.outer(xi_arr, wp1))
        vals = (e1 @ (aw / wp1)) / _TWO_PI_I + _DOUBLE_PREF * (e1 @ (aw * cauchy_vec))
        out = vals.real
        return float(out[0]) if np.isscalar(xi) else out

    def g_one(xi):
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        e2 = np.exp(-np.multiply.outer(xi_arr, zp1))
        vals = 1.0 + (e2 @ (bz / zp1)) / _TWO_PI_I
        out = vals.real
        return float(out[0]) if np.isscalar(xi) else out

    r_hat = float(r_hat_c.real)
    return StatComponents(
        r_hat=r_hat,
        r_hat_prime=float(r_hat_prime_c.real),
        f_star=f_star,
        g_one=g_one,
        f_hat_t=s + a * t + r_hat - 1.0,
    )


def stat_rho_pieces(a, t, s_offset, rho, contours):
    """Density-rho ingredients: the function g_rho and its exact tail pairing.

    g_rho splits into a residue term decaying at rate 1 - rho and a contour
    term on the z-circle (the circle radius stays below rho, so the pole at
    -rho is picked up explicitly).  The pairing scalars integrate the
    constant part of the rank-one row over (s, infinity) contour-first,
    which converges because Re(z + 1) > 0 along the whole circle.
    """
    a = check_a(a)
    t = _check_time(t)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"density rho must lie in (0, 1), got {rho}")
    s = float(s_offset)
    line, circle = contours
    if np.abs(circle.nodes).max() >= rho:
        raise NumericFailure(
            "z-circle radius must stay below rho",
            residual=float(np.abs(circle.nodes).max()),
            hint="rebuild gamma_plus with a smaller radius",
        )
    z = circle.nodes
    zp1 = z + 1.0
    bz = circle.weights * np.exp(-t * _h_vals(z, a))
    h_rho = phase_packed(-rho, a)
    res_amp = np.exp(-t * h_rho)

    def g_rho(xi):
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        e2 = np.exp(-np.multiply.outer(xi_arr, zp1))
        vals = res_amp * np.exp(-(1.0 - rho) * xi_arr) + (e2 @ (bz / (z + rho))) / _TWO_PI_I
        out = vals.real
        return float(out[0]) if np.isscalar(xi) else out

    pair_res = res_amp * np.exp(-(1.0 - rho) * s) / (1.0 - rho)
    pair_circ_c = np.sum(bz * np.exp(-s * zp1) / (zp1 * (z + rho))) / _TWO_PI_I
    _demand_real(pair_circ_c, "rho pairing contour term")
    return g_rho, float(pair_res), float(pair_circ_c.real)


# ---------------------------------------------------------------------------
# saddle-point limit kernels


def klimit(ic, a, normalized=True):
    """Pointwise t -> infinity limit of the rescaled kernels.

    For the packed case the saddle-point limit of t e^{t r} Khat_t is

        e^{x1(w- + 1) - x2(w+ + 1)} / (2 pi sqrt(H''(w-) |H''(w+)|) (w+ - w-));

    ``normalized=False`` multiplies by (2 pi)^2, the convention in which
    the integrated diagonal matches the classical constant
    2 pi w- w+ ((w- - w+)^2 sqrt((w-^2 - 1)(1 - w+^2)))^{-1}.  The flat
    limit of sqrt(t) e^{t r} Khat_t is single-saddle and has no such
    convention split.  Returns a broadcasting callable of (x1, x2).
    """
    a = check_a(a)
    if ic == "packed":
        w_minus, w_plus = saddle_points(a)
        curv = np.sqrt(phase_packed_d2(w_minus, a) * -phase_packed_d2(w_plus, a))
        pref = 1.0 / (2.0 * np.pi * curv * (w_plus - w_minus))
        if not normalized:
            pref *= 4.0 * np.pi ** 2
        c1, c2 = w_minus + 1.0, w_plus + 1.0
    elif ic == "flat":
        z_a = solve_za(a)
        eta = flat_curvature(z_a, a)
        phi_a = phi(z_a)
        pref = np.sqrt(2.0 * np.pi / abs(eta)) * (z_a / (1.0 + z_a))
        c1, c2 = z_a + 1.0, phi_a + 1.0
    else:
        raise ValueError(f"unknown initial condition {ic!r}, expected 'packed' or 'flat'")

    def kernel(x1, x2):
        return pref * np.exp(np.asarray(x1, dtype=float) * c1 - np.asarray(x2, dtype=float) * c2)

    return kernel


# ---------------------------------------------------------------------------
# raw kernel at finite particle index


def _raw_line_halfwidth(c, n, t, tol):
    target = np.log(tol) / t
    drop = lambda y: -y * y / 2.0 + (n / t) * 0.5 * np.log1p(y * y / (c * c))
    y = np.sqrt(-2.0 * target)
    while drop(y) > target:
        y *= 1.25
    return y


def raw_kernel_grid(n, t, xi1, xi2, line_re, circle_rad, sigma=None, tol=1e-13,
                    oversample=1):
    """Particle-n kernel on generic contours, conjugated by e^{sigma xi}.

    The w-contour is the vertical line Re w = line_re < 0 and the
    z-contour the circle |z| = circle_rad around the pole of order n at
    the origin; the circle must stay strictly inside the line's modulus
    so the Cauchy coupling keeps its nesting.  xi are absolute positions
    (no macroscopic recentring).
    """
    if n < 1 or n != int(n):
        raise ValueError(f"particle index must be a positive integer, got {n}")
    t = _check_time(t)
    c = float(line_re)
    r = float(circle_rad)
    if c >= 0:
        raise ValueError("line_re must be negative")
    if not 0 < r < -c:
        raise ValueError("need 0 < circle_rad < |line_re| for contour nesting")
    if sigma is None:
        sigma = -c
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)

    half = _raw_line_halfwidth(c, n, t, tol)
    freq = float(np.max(np.abs(xi1 + t * c))) + 1.0
    n_line = 2 * int(np.ceil(oversample * half * max(12.0 * np.sqrt(t), 2.0 * freq))) + 1
    y = np.linspace(-half, half, n_line)
    w = c + 1j * y
    lw = np.full(n_line, 1j * (y[1] - y[0]), dtype=complex)
    lw[0] *= 0.5
    lw[-1] *= 0.5

    m = oversample * max(
        256, 8 * int(n), int(np.ceil(8.0 * r * (float(np.max(np.abs(xi2))) + t * r + 1.0)))
    )
    theta = -np.pi + 2.0 * np.pi * np.arange(m) / m
    z = r * np.exp(1j * theta)
    cw = 1j * z * (2.0 * np.pi / m)

    aw = lw * np.exp(t * w * w / 2.0 + n * np.log(-w))
    bz = cw * np.exp(-t * z * z / 2.0 - n * np.log(-z))
    e1 = np.exp(np.multiply.outer(xi1, w + sigma))
    e2 = np.exp(-np.multiply.outer(xi2, z + sigma))
    cauchy = 1.0 / np.subtract.outer(w, z)
    return _DOUBLE_PREF * ((e1 * aw) @ cauchy @ (e2 * bz).T)
