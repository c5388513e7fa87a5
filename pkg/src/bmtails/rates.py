"""Rate functions for the upper tail of the top colliding Brownian particle.

For each initial condition (packed: all particles at the origin; flat:
particles at the integers; stationary: i.i.d. Exp(1) gaps) the probability
that the tagged particle exceeds 2t + at decays exponentially with a rate
r(a) per unit time.  The three rates come from saddle-point analysis of two
phase functions:

    H(w) = (w^2 - 1)/2 + (2 + a)(w + 1) + log(-w)
    G(z) = (z^2 - phi(z)^2)/2 + (1 + a)(z - phi(z))

H has two real saddles w- < -1 - a and w+ in (-1, 0), the roots of
w^2 + (2+a)w + 1 = 0.  G has a single relevant saddle z_a < -1 determined
by (z_a + 1)(phi(z_a) + 1) + a = 0.  The closed forms implemented here are

    packed:     (2+a) sqrt(a + a^2/4) + 2 log(1 + a/2 - sqrt(a + a^2/4))
    flat:       -G(z_a)
    stationary: -a^2/4 + (1 + a/2) sqrt(a + a^2/4) + log(1 + a/2 - sqrt(..))

and the identities rate_packed = H(w+) - H(w-), rate_stat = H(w+) hold to
rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericFailure
from .lambertw import phi, phi_prime

_ZA_RIGHT_MARGIN = 1e-9


def check_a(a):
    """Validate a deviation parameter (finite real, strictly positive)."""
    a = float(a)
    if not np.isfinite(a) or a <= 0.0:
        raise ValueError(f"deviation parameter must be finite and > 0, got {a}")
    return a


@dataclass(frozen=True)
class SaddleDiagnostics:
    """Saddle data backing a rate value.

    For packed/stationary, (saddle_lo, saddle_hi) = (w-, w+), the phases are
    H(w-), H(w+) and second_deriv holds the pair (H''(w-), H''(w+)).  For
    flat, (saddle_lo, saddle_hi) = (z_a, phi(z_a)), phase_lo = G(z_a),
    phase_hi = 0 and second_deriv is the curvature eta of G along the
    steep-descent contour (strictly negative).
    """

    ic: str
    a: float
    saddle_lo: float
    saddle_hi: float
    phase_lo: float
    phase_hi: float
    second_deriv: tuple
    rate: float


def phase_packed(w, a):
    """H(w) = (w^2-1)/2 + (2+a)(w+1) + log(-w), principal branch.

    Rejects points on the branch cut [0, inf).
    """
    a = check_a(a)
    w = complex(w)
    if w.imag == 0.0 and w.real >= 0.0:
        raise ValueError(f"phase_packed is undefined on the cut [0, inf): w={w}")
    val = (w * w - 1.0) / 2.0 + (2.0 + a) * (w + 1.0) + np.log(-w)
    return val.real if abs(val.imag) == 0.0 else val


def phase_packed_d1(w, a):
    """H'(w) = w + 2 + a + 1/w."""
    a = check_a(a)
    w = complex(w)
    if w == 0.0:
        raise ValueError("H' has a pole at w = 0")
    val = w + 2.0 + a + 1.0 / w
    return val.real if val.imag == 0.0 else val


def phase_packed_d2(w, a):
    """H''(w) = 1 - 1/w^2."""
    check_a(a)
    w = complex(w)
    if w == 0.0:
        raise ValueError("H'' has a pole at w = 0")
    val = 1.0 - 1.0 / (w * w)
    return val.real if val.imag == 0.0 else val


def saddle_points(a):
    """The two real zeros (w-, w+) of H', computed cancellation-free.

    w- = -1 - a/2 - sqrt(a + a^2/4) sums negative terms directly; w+ comes
    from the exact product w+ w- = 1, which avoids the subtractive loss in
    -1 - a/2 + sqrt(...) for large a.
    """
    a = check_a(a)
    disc = np.sqrt(a + a * a / 4.0)
    w_minus = -1.0 - a / 2.0 - disc
    w_plus = 1.0 / w_minus
    return w_minus, w_plus


def saddle_packed(a):
    """SaddleDiagnostics for the packed (and stationary) phase H."""
    a = check_a(a)
    w_minus, w_plus = saddle_points(a)
    h_lo = phase_packed(w_minus, a)
    h_hi = phase_packed(w_plus, a)
    return SaddleDiagnostics(
        ic="packed",
        a=a,
        saddle_lo=w_minus,
        saddle_hi=w_plus,
        phase_lo=h_lo,
        phase_hi=h_hi,
        second_deriv=(phase_packed_d2(w_minus, a), phase_packed_d2(w_plus, a)),
        rate=h_hi - h_lo,
    )


def rate_packed(a):
    """Upper-tail rate for the packed start (closed form)."""
    a = check_a(a)
    disc = np.sqrt(a + a * a / 4.0)
    return (2.0 + a) * disc + 2.0 * np.log1p(a / 2.0 - disc)


def rate_stat(a):
    """Upper-tail rate for the stationary start (closed form, = H(w+))."""
    a = check_a(a)
    disc = np.sqrt(a + a * a / 4.0)
    return -a * a / 4.0 + (1.0 + a / 2.0) * disc + np.log1p(a / 2.0 - disc)


def phase_flat(z, a):
    """G(z) = (z^2 - phi(z)^2)/2 + (1+a)(z - phi(z)) for real z < -1."""
    a = check_a(a)
    z = float(z)
    if z >= -1.0:
        raise ValueError(f"phase_flat requires z < -1, got {z}")
    p = phi(z)
    return (z * z - p * p) / 2.0 + (1.0 + a) * (z - p)


def phase_flat_d1(z, a):
    """G'(z) in the factored form (z-phi)/(z(phi+1)) * ((z+1)(phi+1)+a)."""
    a = check_a(a)
    z = float(z)
    if z >= -1.0:
        raise ValueError(f"phase_flat_d1 requires z < -1, got {z}")
    p = phi(z)
    return (z - p) / (z * (p + 1.0)) * ((z + 1.0) * (p + 1.0) + a)


def solve_za(a):
    """The flat saddle z_a < -1 solving (z+1)(phi(z)+1) + a = 0.

    (z+1)(phi(z)+1) is a monotone bijection of (-inf,-1) onto (-inf,0), so
    the root is bracketed in (-3-a, -1); bisection-style solve then one
    Newton polish using the phi' identity.
    """
    a = check_a(a)

    def res(z):
        return (z + 1.0) * (phi(z) + 1.0) + a

    lo, hi = -3.0 - a, -1.0 - _ZA_RIGHT_MARGIN
    if res(lo) >= 0.0 or res(hi) <= 0.0:
        raise NumericFailure(
            "flat saddle bracket failed", last=(lo, hi),
            residual=min(abs(res(lo)), abs(res(hi))),
            hint="unexpected: the bracket (-3-a, -1) should always contain z_a",
        )
    z = brentq(res, lo, hi, xtol=1e-14, rtol=8.9e-16)
    p = phi(z)
    slope = (p + 1.0) + (z + 1.0) * phi_prime(z)
    z -= ((z + 1.0) * (p + 1.0) + a) / slope
    return float(z)


def flat_curvature(z_a, a):
    """eta = 4 pi^2 (phi - z)(phi/(phi+1)^2 + z/(z+1)^2) at z = z_a (< 0)."""
    a = check_a(a)
    p = phi(z_a)
    return (4.0 * np.pi ** 2 * (p - z_a)
            * (p / (p + 1.0) ** 2 + z_a / (z_a + 1.0) ** 2))


def rate_flat(a):
    """Upper-tail rate for the flat start, with saddle diagnostics.

    rate = (phi(z_a) - z_a) * ((z_a + phi(z_a))/2 + 1 + a) = -G(z_a).
    """
    a = check_a(a)
    z_a = solve_za(a)
    p = phi(z_a)
    rate = (p - z_a) * ((z_a + p) / 2.0 + 1.0 + a)
    return SaddleDiagnostics(
        ic="flat",
        a=a,
        saddle_lo=z_a,
        saddle_hi=p,
        phase_lo=phase_flat(z_a, a),
        phase_hi=0.0,
        second_deriv=(flat_curvature(z_a, a),),
        rate=rate,
    )


def rate_asymptote(ic, a, regime):
    """Small-a / large-a closed asymptotes of the flat and stationary rates."""
    a = check_a(a)
    key = (str(ic), str(regime))
    if key == ("flat", "small"):
        return 4.0 / 3.0 * a ** 1.5
    if key == ("flat", "large"):
        return (a + 1.0) ** 2 / 2.0
    if key == ("stationary", "small"):
        return 2.0 / 3.0 * a ** 1.5
    if key == ("stationary", "large"):
        return a + 0.5 - np.log(a)
    raise ValueError(f"no asymptote for ic={ic!r}, regime={regime!r}")
