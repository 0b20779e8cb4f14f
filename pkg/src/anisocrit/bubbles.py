"""Extremal profiles of the anisotropic Sobolev inequality and their
truncations.

The extremal ("bubble") with scale mu and center x0 is

    U(x) = ( mu^(1/(p-1)) * c / (mu^(p/(p-1)) + R(x)^(p/(p-1))) )^((n-p)/p)

where R(x) is the reversed dual norm of x - x0 and c = c(n, p) is the
normalizing constant n^(1/p) ((n-p)/(p-1))^((p-1)/p).  Every integral of a
function of R reduces, through the coarea formula, to a one-dimensional
integral weighted by omega * rho^(n-1), where omega is the weighted
perimeter of the level set {R = 1}.  That reduction powers everything in
this module: whole-space norms of the bubble, the Sobolev constant, and
the small-epsilon behaviour of truncated profiles

    eta_eps(rho) = phi(rho) / (eps + rho^(p/(p-1)))^((n-p)/p)

with a smooth cutoff phi.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, FitError
from .norms import AnisotropicNorm, EllipsoidNorm, EuclideanNorm
from .quadrature import (
    cross_checked_sphere_integral,
    radial_integral,
    radial_integral_improper,
    unit_sphere_area,
)

__all__ = [
    "critical_exponent",
    "bubble_constant",
    "Bubble",
    "CutoffSpec",
    "TruncatedBubble",
    "WulffGeometry",
    "wulff_omega",
    "whole_space_bubble_norms",
    "sobolev_constant",
    "SobolevReport",
    "truncation_integrals",
    "truncation_integrals_grid",
    "truncation_sweep",
    "QuadReport",
    "fit_asymptotic",
    "FitReport",
]


def critical_exponent(n, p):
    """np/(n-p), the exponent at which the Sobolev embedding loses
    compactness."""
    _check_np(n, p)
    return n * p / (n - p)


def _check_np(n, p):
    if not 1.0 < p < n:
        raise DomainError("need 1 < p < n, got p=%g, n=%g" % (p, n))


def bubble_constant(n, p):
    """n^(1/p) * ((n-p)/(p-1))^((p-1)/p), the peak normalization of the
    extremal profile."""
    _check_np(n, p)
    return n ** (1.0 / p) * ((n - p) / (p - 1.0)) ** ((p - 1.0) / p)


class Bubble:
    """Closed-form Sobolev extremal, radial in the reversed dual norm.

    norm supplies the anisotropy; evaluation at points x uses the
    reversed dual norm of x - center.  All profile methods take the
    anisotropic radius rho directly and vectorize over it.
    """

    def __init__(self, n, p, mu=1.0, center=None, norm=None):
        _check_np(n, p)
        if mu <= 0.0:
            raise DomainError("scale mu must be positive")
        self.n = n
        self.p = float(p)
        self.mu = float(mu)
        self.norm = norm
        if norm is not None and norm.dim != n:
            raise DomainError("norm dimension %d != n=%d" % (norm.dim, n))
        self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        self._dual_hat = norm.dual(reversed_argument=True) if norm is not None else None
        self.c = bubble_constant(n, p)

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    def anisotropic_radius(self, x):
        if self._dual_hat is None:
            raise DomainError("point evaluation needs a norm")
        x = np.asarray(x, dtype=float)
        return self._dual_hat.value(x - self.center)

    def profile(self, rho):
        rho = np.asarray(rho, dtype=float)
        pc = self.p_conj
        num = self.mu ** (1.0 / (self.p - 1.0)) * self.c
        den = self.mu**pc + rho**pc
        return (num / den) ** ((self.n - self.p) / self.p)

    def profile_derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        pc = self.p_conj
        k = (self.n - self.p) / self.p
        num = (self.mu ** (1.0 / (self.p - 1.0)) * self.c) ** k
        den = self.mu**pc + rho**pc
        return num * (-k) * den ** (-k - 1.0) * pc * rho ** (pc - 1.0)

    def value(self, x):
        return self.profile(self.anisotropic_radius(x))

    def peak_value(self):
        """Value at the center, where the anisotropic radius vanishes."""
        return float(self.profile(0.0))

    def grad_energy_density_profile(self, rho):
        """H(grad U)^p as a function of the anisotropic radius, for the
        reference bubble mu = 1, center = 0:

            c^(n-p) ((n-p)/(p-1))^p rho^(p/(p-1)) / (1 + rho^(p/(p-1)))^n

        Vanishes at the peak rho = 0."""
        if self.mu != 1.0:
            raise DomainError("closed-form energy density is for mu = 1")
        rho = np.asarray(rho, dtype=float)
        pc = self.p_conj
        k = self.c ** (self.n - self.p) * ((self.n - self.p) / (self.p - 1.0)) ** self.p
        return k * rho**pc / (1.0 + rho**pc) ** self.n

    def grad_energy_density(self, x):
        """H(grad U)^p at a point (mu = 1, center = 0)."""
        if np.any(self.center != 0.0):
            raise DomainError("closed-form energy density is for center = 0")
        return self.grad_energy_density_profile(self.anisotropic_radius(x))


@dataclass
class WulffGeometry:
    """The weighted perimeter omega of the unit level set of the reversed
    dual norm; by homogeneity it also equals n times the enclosed volume."""

    omega: float
    n: int

    def ball_volume(self, radius):
        return self.omega * radius**self.n / self.n

    def __post_init__(self):
        if self.omega <= 0.0:
            raise DomainError("omega must be positive")


def wulff_omega(norm, order=48, rel_tol=1.0e-6, method="auto"):
    """Weighted perimeter of {R = 1}, R the reversed dual norm of ``norm``.

    Parametrizing the level set radially over the Euclidean sphere turns
    the surface integral into the spherical integral of R(u)^(-n); the
    same integral divided by n is the enclosed volume, so the surface and
    n*volume computations coincide analytically and the residual between
    the two quadrature rules is a pure resolution check (AccuracyError on
    disagreement).  Families with product structure use exact values
    unless method="quadrature".
    """
    n = norm.dim
    if method not in ("auto", "quadrature"):
        raise DomainError("unknown method %r" % method)
    if method == "auto":
        if isinstance(norm, EuclideanNorm):
            return unit_sphere_area(n)
        if isinstance(norm, EllipsoidNorm):
            return unit_sphere_area(n) * np.sqrt(np.linalg.det(norm.matrix))
    dual_hat = norm.dual(reversed_argument=True)

    def integrand(u):
        return dual_hat.value(u) ** (-float(n))

    return cross_checked_sphere_integral(integrand, n, order=order,
                                         rel_tol=rel_tol, label="wulff omega")


def whole_space_bubble_norms(n, p, omega, mu=1.0):
    """Radial quadrature of the three whole-space integrals of the bubble:
    the p-energy of the gradient, the critical-power mass, and (when
    n > p^2) the p-th power mass.  Independent of center; independence of
    mu is an identity the tests exercise."""
    _check_np(n, p)
    bub = Bubble(n, p, mu=mu)
    pc = p / (p - 1.0)
    scale = mu ** ((p - 1.0) / p)
    pstar = critical_exponent(n, p)

    def grad_integrand(rho):
        return np.abs(bub.profile_derivative(rho)) ** p * rho ** (n - 1.0)

    # |f'|^p ~ rho^{-(n-1)p'/...}: combined decay exponent
    grad_decay = (n - 1.0) - pc * (n - 1.0)
    grad_val, grad_err = radial_integral_improper(grad_integrand, grad_decay,
                                                  points=[scale])

    def pstar_integrand(rho):
        return bub.profile(rho) ** pstar * rho ** (n - 1.0)

    pstar_decay = (n - 1.0) - n * pc
    pstar_val, pstar_err = radial_integral_improper(pstar_integrand, pstar_decay,
                                                    points=[scale])

    out = {
        "grad_hp": omega * grad_val,
        "lpstar": omega * pstar_val,
        "quad_err": max(grad_err, pstar_err) * omega,
    }
    if n > p * p:
        def p_integrand(rho):
            return bub.profile(rho) ** p * rho ** (n - 1.0)

        p_decay = (n - 1.0) - (n - p) * pc / p * p
        # profile^p ~ rho^{-(n-p) p'} => exponent (n-1) - (n-p) p'
        p_decay = (n - 1.0) - (n - p) * pc
        p_val, p_err = radial_integral_improper(p_integrand, p_decay, points=[scale])
        out["lp"] = omega * p_val
        out["quad_err"] = max(out["quad_err"], p_err * omega)
    return out


@dataclass
class SobolevReport:
    s_h: float
    grad_hp: float
    lpstar: float
    rel_gap: float

    def to_dict(self):
        return {"s_h": self.s_h, "grad_hp": self.grad_hp,
                "lpstar": self.lpstar, "rel_gap": self.rel_gap}


def sobolev_constant(norm, p, rel_tol=1.0e-6, omega=None):
    """Best constant of the anisotropic Sobolev inequality, from the two
    whole-space integrals of the reference bubble.

    Both integrals equal S^(n/p); their agreement is the whole-space
    balance identity and doubles as the accuracy check (AccuracyError
    beyond rel_tol)."""
    n = norm.dim
    _check_np(n, p)
    if omega is None:
        omega = wulff_omega(norm)
    vals = whole_space_bubble_norms(n, p, omega)
    a, b = vals["grad_hp"], vals["lpstar"]
    gap = abs(a - b) / max(abs(b), 1e-300)
    if gap > rel_tol:
        raise AccuracyError(
            "whole-space bubble integrals disagree: %.12g vs %.12g" % (a, b)
        )
    s_h = (0.5 * (a + b)) ** (p / n)
    return SobolevReport(s_h=float(s_h), grad_hp=a, lpstar=b, rel_gap=float(gap))


class CutoffSpec:
    """Quintic smoothstep cutoff: identically 1 up to r_inner, identically
    0 from r_outer on, C^2 across the joints."""

    def __init__(self, r_inner, r_outer):
        if not 0.0 < r_inner < r_outer:
            raise DomainError("need 0 < r_inner < r_outer")
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)

    def value(self, rho):
        rho = np.asarray(rho, dtype=float)
        t = np.clip((rho - self.r_inner) / (self.r_outer - self.r_inner), 0.0, 1.0)
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        t = (rho - self.r_inner) / (self.r_outer - self.r_inner)
        inside = (t > 0.0) & (t < 1.0)
        t = np.clip(t, 0.0, 1.0)
        d = -30.0 * t**2 * (1.0 - t) ** 2 / (self.r_outer - self.r_inner)
        return np.where(inside, d, 0.0)


class TruncatedBubble:
    """eta_eps = cutoff * (eps + rho^(p/(p-1)))^(-(n-p)/p) on a Wulff ball
    of the given radius, plus its bubble-normalized rescaling v_eps."""

    def __init__(self, n, p, eps, domain_radius, cutoff=None, norm=None):
        _check_np(n, p)
        if eps <= 0.0:
            raise DomainError("eps must be positive")
        if domain_radius <= 0.0:
            raise DomainError("domain radius must be positive")
        self.n = n
        self.p = float(p)
        self.eps = float(eps)
        self.domain_radius = float(domain_radius)
        # default: flat core out to a quarter of the inradius, gone by half
        self.cutoff = cutoff or CutoffSpec(0.25 * domain_radius, 0.5 * domain_radius)
        if self.cutoff.r_outer > domain_radius + 1e-12:
            raise DomainError("cutoff support exceeds the domain")
        self.norm = norm

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    def kernel(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (self.eps + rho**self.p_conj) ** (-(self.n - self.p) / self.p)

    def kernel_derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        pc = self.p_conj
        return (
            -((self.n - self.p) / (self.p - 1.0))
            * rho ** (1.0 / (self.p - 1.0))
            * (self.eps + rho**pc) ** (-self.n / self.p)
        )

    def eta(self, rho):
        return self.cutoff.value(rho) * self.kernel(rho)

    def eta_derivative(self, rho):
        return (self.cutoff.derivative(rho) * self.kernel(rho)
                + self.cutoff.value(rho) * self.kernel_derivative(rho))

    def bubble_scale(self):
        """Factor turning eta_eps into the cutoff bubble v_eps."""
        c = bubble_constant(self.n, self.p)
        return (self.eps ** (1.0 / self.p) * c) ** ((self.n - self.p) / self.p)

    def v(self, rho):
        return self.bubble_scale() * self.eta(rho)

    def v_derivative(self, rho):
        return self.bubble_scale() * self.eta_derivative(rho)

    def value_at_points(self, x):
        """eta_eps at ambient points (needs the norm for the radius)."""
        if self.norm is None:
            raise DomainError("point evaluation needs a norm")
        dual_hat = self.norm.dual(reversed_argument=True)
        rho = dual_hat.value(np.asarray(x, dtype=float))
        return self.eta(rho)


@dataclass
class QuadReport:
    eps: float
    grad_hp: float
    lpstar: float
    lp: float
    lq: float
    quad_err: float
    q: float = field(default=float("nan"))

    def to_dict(self):
        return {"eps": self.eps, "grad_hp": self.grad_hp, "lpstar": self.lpstar,
                "lp": self.lp, "lq": self.lq, "quad_err": self.quad_err, "q": self.q}


def truncation_integrals(trunc, q, omega, err_tol=1.0e-7):
    """The four domain integrals of the truncated profile by adaptive
    coarea quadrature: p-energy of the gradient, critical power, p-th
    power, q-th power.  AccuracyError when the estimated relative
    quadrature error exceeds err_tol."""
    n, p = trunc.n, trunc.p
    if not p < q < critical_exponent(n, p):
        raise DomainError("q must lie in (p, p*) for the q-th power integral")
    pstar = critical_exponent(n, p)
    scale = trunc.eps ** ((p - 1.0) / p)
    pts = [scale, trunc.cutoff.r_inner, trunc.cutoff.r_outer]
    upper = trunc.cutoff.r_outer  # eta vanishes beyond the cutoff

    def run(f):
        val, err = radial_integral(
            lambda rho: f(rho) * rho ** (n - 1.0), 0.0, upper, points=pts
        )
        return omega * val, omega * err

    grad_v, grad_e = run(lambda rho: np.abs(trunc.eta_derivative(rho)) ** p)
    lpstar_v, lpstar_e = run(lambda rho: trunc.eta(rho) ** pstar)
    lp_v, lp_e = run(lambda rho: trunc.eta(rho) ** p)
    lq_v, lq_e = run(lambda rho: trunc.eta(rho) ** q)
    rel = max(
        grad_e / max(grad_v, 1e-300),
        lpstar_e / max(lpstar_v, 1e-300),
        lp_e / max(lp_v, 1e-300),
        lq_e / max(lq_v, 1e-300),
    )
    if rel > err_tol:
        raise AccuracyError("adaptive quadrature error %.3g above %.3g" % (rel, err_tol))
    return QuadReport(eps=trunc.eps, grad_hp=grad_v, lpstar=lpstar_v,
                      lp=lp_v, lq=lq_v, quad_err=float(rel), q=q)


def truncation_integrals_grid(trunc, q, bounds, shape):
    """Two-dimensional tensor-grid (midpoint) version of the four
    integrals, for cross-checking the coarea reduction when n = 2.

    bounds = ((x0, x1), (y0, y1)) must contain the cutoff support.
    """
    if trunc.n != 2:
        raise DomainError("grid quadrature is two-dimensional only")
    if trunc.norm is None:
        raise DomainError("grid quadrature needs the norm")
    (x0, x1), (y0, y1) = bounds
    m1, m2 = shape
    xs = np.linspace(x0, x1, m1 + 1)
    ys = np.linspace(y0, y1, m2 + 1)
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    area = (xs[1] - xs[0]) * (ys[1] - ys[0])
    pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
    dual_hat = trunc.norm.dual(reversed_argument=True)
    rho = dual_hat.value(pts)
    eta = trunc.eta(rho)
    deta = np.abs(trunc.eta_derivative(rho))
    pstar = critical_exponent(trunc.n, trunc.p)
    return QuadReport(
        eps=trunc.eps,
        grad_hp=float(np.sum(deta ** trunc.p) * area),
        lpstar=float(np.sum(eta**pstar) * area),
        lp=float(np.sum(eta ** trunc.p) * area),
        lq=float(np.sum(eta**q) * area),
        quad_err=float("nan"),
        q=q,
    )


def truncation_sweep(n, p, q, omega, domain_radius, k_min=4, k_max=16, cutoff=None):
    """QuadReports over the dyadic grid eps = 2^-k, k = k_min..k_max."""
    if k_max <= k_min:
        raise DomainError("need k_max > k_min")
    reports = []
    for k in range(k_min, k_max + 1):
        trunc = TruncatedBubble(n, p, 2.0**-k, domain_radius, cutoff=cutoff)
        reports.append(truncation_integrals(trunc, q, omega))
    return reports


@dataclass
class FitReport:
    law: str
    exponent: float  # power exponent, or the |log eps| coefficient
    coefficient: float  # leading constant
    offset: float
    residual: float

    def to_dict(self):
        return {"law": self.law, "exponent": self.exponent,
                "coefficient": self.coefficient, "offset": self.offset,
                "residual": self.residual}


def fit_asymptotic(pairs, law, fit_points=8):
    """Fit value(eps) over a decreasing dyadic sweep to one of the laws

    * "power":          value = C eps^s          (log-log least squares)
    * "power_plus_o1":  value = C eps^s + D      (successive dyadic
      differences cancel the bounded term, then log-log least squares)
    * "log":            value = C |log eps| + D  (linear least squares)

    Uses the fit_points smallest epsilons.  Returns a FitReport whose
    residual is the max relative deviation of the model over the fitted
    points."""
    pairs = sorted(((float(e), float(v)) for e, v in pairs), reverse=True)
    if len(pairs) < 6:
        raise FitError("need at least 6 sweep points")
    pairs = pairs[-(fit_points + 1):]
    eps = np.array([e for e, _ in pairs])
    val = np.array([v for _, v in pairs])

    if law == "power":
        if np.any(val <= 0.0):
            raise FitError("power law needs positive values")
        A = np.stack([np.log(eps), np.ones_like(eps)], axis=1)
        (slope, inter), res, rank, _ = np.linalg.lstsq(A, np.log(val), rcond=None)
        if rank < 2:
            raise FitError("ill-conditioned power fit")
        model = np.exp(inter) * eps**slope
        return FitReport("power", float(slope), float(np.exp(inter)), 0.0,
                         float(np.max(np.abs(model - val) / np.abs(val))))

    if law == "power_plus_o1":
        d = val[1:] - val[:-1]  # eps halves between consecutive entries
        if np.all(d > 0):
            sgn = 1.0
        elif np.all(d < 0):
            sgn = -1.0
        else:
            raise FitError("differences change sign; no clean power trend")
        e2 = eps[1:]
        A = np.stack([np.log(e2), np.ones_like(e2)], axis=1)
        (slope, inter), res, rank, _ = np.linalg.lstsq(A, np.log(sgn * d), rcond=None)
        if rank < 2:
            raise FitError("ill-conditioned difference fit")
        s = float(slope)
        denom = 1.0 - 2.0**s
        if abs(denom) < 1e-12:
            raise FitError("exponent too close to zero for the dyadic trick")
        coef = sgn * np.exp(inter) / denom
        offset = float(np.mean(val - coef * eps**s))
        model = coef * eps**s + offset
        return FitReport("power_plus_o1", s, float(coef), offset,
                         float(np.max(np.abs(model - val) / np.maximum(np.abs(val), 1e-300))))

    if law == "log":
        x = np.abs(np.log(eps))
        A = np.stack([x, np.ones_like(x)], axis=1)
        (slope, inter), res, rank, _ = np.linalg.lstsq(A, val, rcond=None)
        if rank < 2:
            raise FitError("ill-conditioned log fit")
        model = slope * x + inter
        return FitReport("log", float(slope), float(slope), float(inter),
                         float(np.max(np.abs(model - val) / np.maximum(np.abs(val), 1e-300))))

    raise DomainError("unknown law %r" % law)
