"""Radial and spherical quadrature helpers.

All volume integrals of functions of the form f(rho), rho = anisotropic
radius, reduce to one-dimensional integrals weighted by omega * rho^(n-1).
The heavy lifting is delegated to adaptive Gauss-Kronrod quadrature
(scipy.integrate.quad); improper tails beyond RHO_TAIL are replaced by the
analytic power-law decay of the integrand.
"""

import numpy as np
from scipy import integrate

from .errors import AccuracyError

__all__ = [
    "radial_integral",
    "radial_integral_improper",
    "sphere_quadrature",
    "unit_sphere_area",
]

#: switch-over radius between adaptive quadrature and the analytic tail
RHO_TAIL = 1.0e6

#: default absolute / relative targets for adaptive refinement
ABS_TOL = 1.0e-10
REL_TOL = 1.0e-8


def radial_integral(f, a, b, points=None, abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """Adaptive quadrature of f over the finite interval [a, b].

    points, when given, lists interior breakpoints the integrand varies
    rapidly around (e.g. the concentration scale of a bubble kernel).
    Long intervals are split into decade segments first; otherwise the
    initial Gauss-Kronrod samples can step clean over a localized bump.
    Returns (value, error_estimate).
    """
    pts = sorted(x for x in (points or []) if a < x < b)
    feature = max([1.0] + pts)
    cuts = [a]
    edge = 10.0 * max(feature, a if a > 0 else feature)
    while edge < b:
        cuts.append(edge)
        edge *= 10.0
    cuts.append(b)
    value, err = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        seg_pts = [x for x in pts if lo < x < hi] or None
        v, e = integrate.quad(
            f, lo, hi, points=seg_pts, epsabs=abs_tol, epsrel=rel_tol, limit=400
        )
        value += v
        err += e
    return value, err


def radial_integral_improper(f, decay_exponent, a=0.0, points=None,
                             abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """Integrate f over [a, infinity) when f(rho) ~ K * rho^decay_exponent
    for large rho, with decay_exponent < -1.

    The interval [a, RHO_TAIL] is done adaptively; the remainder is the
    analytic tail of the power law, with K read off from f at RHO_TAIL.
    """
    if decay_exponent >= -1.0:
        raise ValueError("tail does not converge: decay exponent %g" % decay_exponent)
    value, err = radial_integral(f, a, RHO_TAIL, points=points,
                                 abs_tol=abs_tol, rel_tol=rel_tol)
    # integral of K rho^s over [T, inf) = -f(T) * T / (s + 1)
    tail = -f(RHO_TAIL) * RHO_TAIL / (decay_exponent + 1.0)
    return value + tail, err + abs(tail) * 1.0e-6


def unit_sphere_area(n):
    """Surface measure of the Euclidean unit sphere in R^n."""
    from scipy.special import gamma
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def _gauss_angle(m):
    """Gauss-Legendre nodes/weights on [0, pi]."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w


def sphere_quadrature(n, order=48, rule="gauss"):
    """Product quadrature rule on the Euclidean unit sphere S^{n-1}.

    Returns (points, weights) with points of shape (N, n) and weights
    summing to the sphere area.  The azimuth uses a trapezoid rule (it is
    periodic, so the trapezoid rule converges spectrally), polar angles use
    either Gauss-Legendre ("gauss") or midpoint ("midpoint") rules; the two
    rule families give independent discretizations for accuracy checks.
    """
    if n < 2:
        raise ValueError("sphere quadrature needs n >= 2")
    m_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(m_phi) / m_phi
    w_phi = np.full(m_phi, 2.0 * np.pi / m_phi)
    if n == 2:
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return pts, w_phi

    if rule == "gauss":
        theta, w_theta = _gauss_angle(order)
    elif rule == "midpoint":
        theta = np.pi * (np.arange(order) + 0.5) / order
        w_theta = np.full(order, np.pi / order)
    else:
        raise ValueError("unknown rule %r" % rule)

    # spherical coordinates: x1 = cos t1, x2 = sin t1 cos t2, ...
    # weight factor sin^{n-1-j}(t_j) for the j-th polar angle
    grids = [theta] * (n - 2) + [phi]
    wgrids = [w_theta] * (n - 2) + [w_phi]
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.meshgrid(*wgrids, indexing="ij")
    weights = np.ones_like(mesh[0])
    for j in range(n - 2):
        weights = weights * wmesh[j] * np.sin(mesh[j]) ** (n - 2 - j)
    weights = weights * wmesh[-1]

    coords = []
    sin_prod = np.ones_like(mesh[0])
    for j in range(n - 2):
        coords.append(sin_prod * np.cos(mesh[j]))
        sin_prod = sin_prod * np.sin(mesh[j])
    coords.append(sin_prod * np.cos(mesh[-1]))
    coords.append(sin_prod * np.sin(mesh[-1]))
    pts = np.stack([c.ravel() for c in coords], axis=1)
    return pts, weights.ravel()


def cross_checked_sphere_integral(func, n, order=48, rel_tol=1.0e-6, label=""):
    """Integrate func (vectorized over an (N, n) array of unit vectors)
    over S^{n-1} with two independent rules and verify agreement.

    Raises AccuracyError when the two values differ by more than rel_tol
    relatively.  Returns the finer value.
    """
    pts1, w1 = sphere_quadrature(n, order=order, rule="gauss")
    val1 = float(np.dot(w1, func(pts1)))
    pts2, w2 = sphere_quadrature(n, order=int(1.5 * order) + 1, rule="gauss")
    val2 = float(np.dot(w2, func(pts2)))
    denom = max(abs(val1), abs(val2), 1.0e-300)
    if abs(val1 - val2) / denom > rel_tol:
        raise AccuracyError(
            "sphere quadratures disagree%s: %.12g vs %.12g"
            % (" (%s)" % label if label else "", val1, val2)
        )
    return val2
