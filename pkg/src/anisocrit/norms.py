"""Anisotropic norms, their gradients, and dual norms.

A norm here is a convex, positively 1-homogeneous H > 0 on R^n \\ {0},
C^2 away from the origin, whose unit ball is uniformly convex.  Symmetry
H(-x) = H(x) is *not* assumed; the dual machinery keeps track of both
orientations.

Shipped families:

* ``euclidean``            -- |x|; the isotropic reference case.
* ``ellipsoid``            -- sqrt(x' A x) for SPD A; closed-form dual
                              sqrt(z' A^-1 z).
* ``shifted_ellipsoid``    -- sqrt(x' A x) + <b, x>; a genuinely
                              non-symmetric norm (requires |A^-1/2 b| < 1),
                              numeric dual only.
* ``lr_regularized``       -- the l^r norm blended toward Euclidean,
                              H = ((1-w) H_r^2 + w |x|^2)^(1/2) with
                              w = delta/(1+delta).  Raw l^r balls (delta=0)
                              lose uniform convexity at the axes when
                              r != 2; the blend restores a positive lower
                              ellipticity bound w.

Equivalence constant nu, gradient-modulus bound theta and the ellipticity
pair (ell_lo, ell_hi) bracketing the eigenvalues of (1/2) Hess(H^2) are
estimated by quasi-uniform sphere sampling at construction and cached;
families with exact values overwrite the estimates.
"""

import numpy as np
from scipy.stats import qmc

from .errors import ConvergenceError, DomainError, SingularityError

__all__ = [
    "AnisotropicNorm",
    "EuclideanNorm",
    "EllipsoidNorm",
    "ShiftedEllipsoidNorm",
    "LrRegularizedNorm",
    "DualNorm",
    "make_norm",
    "AxiomReport",
    "verify_norm_axioms",
    "estimate_ellipticity",
]

_SAMPLE_DIRECTIONS = 4096


def _as_point(xi, dim):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != dim:
        raise DomainError("expected vectors of length %d, got shape %s" % (dim, xi.shape))
    if not np.all(np.isfinite(xi)):
        raise DomainError("non-finite input vector")
    return xi


def _quasi_uniform_directions(dim, count, seed=0):
    """Low-discrepancy directions on the unit sphere (Sobol points pushed
    through the inverse Gaussian CDF and normalized)."""
    if dim == 2:
        ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = eng.random(count)
    from scipy.special import ndtri
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


class AnisotropicNorm:
    """Base class; subclasses implement _value/_grad/_hess_quadform on
    batches of row vectors."""

    family = "abstract"
    symmetric = True

    def __init__(self, dim, dual_mode="auto"):
        if dim < 2:
            raise DomainError("dimension must be >= 2")
        self.dim = int(dim)
        if dual_mode not in ("auto", "closed_form", "numeric"):
            raise DomainError("unknown dual_mode %r" % dual_mode)
        self.dual_mode = dual_mode
        # filled by _init_constants
        self.nu = None
        self.theta = None
        self.ell_lo = None
        self.ell_hi = None

    # -- family hooks -----------------------------------------------------
    def _value(self, xi):
        raise NotImplementedError

    def _grad(self, xi):
        raise NotImplementedError

    def _hess_quadform(self, xi, eta):
        raise NotImplementedError

    def _closed_form_dual(self):
        """Return the dual as an AnisotropicNorm, or None."""
        return None

    # -- public surface ----------------------------------------------------
    def value(self, xi):
        """H(xi).  Accepts a vector or a batch of row vectors."""
        xi = _as_point(xi, self.dim)
        single = xi.ndim == 1
        v = self._value(np.atleast_2d(xi))
        return float(v[0]) if single else v

    def grad(self, xi):
        """grad H(xi); errors at xi = 0 where H is not differentiable."""
        xi = _as_point(xi, self.dim)
        single = xi.ndim == 1
        xib = np.atleast_2d(xi)
        if np.any(np.linalg.norm(xib, axis=1) == 0.0):
            raise SingularityError("gradient of the norm at the origin")
        g = self._grad(xib)
        return g[0] if single else g

    def hess_quadform(self, xi, eta):
        """<(1/2) Hess(H^2)(xi) eta, eta>; errors at xi = 0."""
        xi = _as_point(xi, self.dim)
        eta = _as_point(eta, self.dim)
        single = xi.ndim == 1
        xib, etab = np.atleast_2d(xi), np.atleast_2d(eta)
        if np.any(np.linalg.norm(xib, axis=1) == 0.0):
            raise SingularityError("Hessian of the norm at the origin")
        q = self._hess_quadform(xib, etab)
        return float(q[0]) if single else q

    def dual(self, reversed_argument=False):
        """The dual norm sup{<z, xi> : H(xi) = 1}; with
        reversed_argument=True the argument is negated first, which is the
        variant entering the bubble profiles for non-symmetric H."""
        return DualNorm(self, reversed_argument=reversed_argument)

    @property
    def uses_closed_form_dual(self):
        if self.dual_mode == "closed_form":
            if self._closed_form_dual() is None:
                raise DomainError("family %r has no closed-form dual" % self.family)
            return True
        if self.dual_mode == "numeric":
            return False
        return self._closed_form_dual() is not None

    # -- cached constants ----------------------------------------------------
    def _init_constants(self, seed=0):
        dirs = _quasi_uniform_directions(self.dim, _SAMPLE_DIRECTIONS, seed=seed)
        vals = self._value(dirs)
        self.nu = float(max(vals.max(), 1.0 / vals.min()))
        gn = np.linalg.norm(self._grad(dirs), axis=1)
        self.theta = float(max(gn.max(), 1.0 / gn.min()))
        lo, hi = estimate_ellipticity(self, samples=_SAMPLE_DIRECTIONS // 4, seed=seed)
        self.ell_lo, self.ell_hi = lo, hi

    def __repr__(self):
        return "%s(dim=%d)" % (type(self).__name__, self.dim)


class EuclideanNorm(AnisotropicNorm):
    family = "euclidean"

    def __init__(self, dim, dual_mode="auto"):
        super().__init__(dim, dual_mode)
        self.nu = 1.0
        self.theta = 1.0
        self.ell_lo = 1.0
        self.ell_hi = 1.0

    def _value(self, xi):
        return np.linalg.norm(xi, axis=1)

    def _grad(self, xi):
        return xi / np.linalg.norm(xi, axis=1, keepdims=True)

    def _hess_quadform(self, xi, eta):
        # H^2 = |xi|^2, so (1/2) Hess(H^2) is the identity
        return np.sum(eta * eta, axis=1)

    def _closed_form_dual(self):
        return EuclideanNorm(self.dim)


class EllipsoidNorm(AnisotropicNorm):
    family = "ellipsoid"

    def __init__(self, matrix, dual_mode="auto"):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError("ellipsoid matrix must be square")
        if not np.allclose(matrix, matrix.T, atol=1e-12):
            raise DomainError("ellipsoid matrix must be symmetric")
        eigvals = np.linalg.eigvalsh(matrix)
        if eigvals.min() <= 0.0:
            raise DomainError("ellipsoid matrix must be positive definite")
        super().__init__(matrix.shape[0], dual_mode)
        self.matrix = matrix
        lam_min, lam_max = float(eigvals.min()), float(eigvals.max())
        self.nu = max(np.sqrt(lam_max), 1.0 / np.sqrt(lam_min))
        self.theta = self.nu
        self.ell_lo = lam_min
        self.ell_hi = lam_max

    def _value(self, xi):
        return np.sqrt(np.einsum("bi,ij,bj->b", xi, self.matrix, xi))

    def _grad(self, xi):
        return (xi @ self.matrix) / self._value(xi)[:, None]

    def _hess_quadform(self, xi, eta):
        # H^2 = xi' A xi, so (1/2) Hess(H^2) = A
        return np.einsum("bi,ij,bj->b", eta, self.matrix, eta)

    def _closed_form_dual(self):
        return EllipsoidNorm(np.linalg.inv(self.matrix))


class ShiftedEllipsoidNorm(AnisotropicNorm):
    """sqrt(x' A x) + <b, x>.  Non-symmetric whenever b != 0."""

    family = "shifted_ellipsoid"
    symmetric = False

    def __init__(self, matrix, shift, dual_mode="auto"):
        matrix = np.asarray(matrix, dtype=float)
        shift = np.asarray(shift, dtype=float)
        base = EllipsoidNorm(matrix)  # validates SPD
        if shift.shape != (matrix.shape[0],):
            raise DomainError("shift vector has wrong length")
        if shift @ np.linalg.solve(matrix, shift) >= 1.0:
            raise DomainError("shift too large: norm would lose positivity")
        super().__init__(matrix.shape[0], dual_mode)
        self.matrix = matrix
        self.shift = shift
        self._base = base
        self._init_constants()

    def _value(self, xi):
        return self._base._value(xi) + xi @ self.shift

    def _grad(self, xi):
        return self._base._grad(xi) + self.shift

    def _hess_quadform(self, xi, eta):
        # (1/2) Hess(H^2) = grad H x grad H + H Hess H for 1-homogeneous H
        s = self._base._value(xi)
        g = self._grad(xi)
        first = np.sum(g * eta, axis=1) ** 2
        a_eta = np.einsum("bi,ij,bj->b", eta, self.matrix, eta)
        a_xi_eta = np.sum((xi @ self.matrix) * eta, axis=1)
        hess_h = a_eta / s - a_xi_eta**2 / s**3
        return first + self._value(xi) * hess_h


class LrRegularizedNorm(AnisotropicNorm):
    """l^r norm blended toward Euclidean by weight w = delta/(1+delta)."""

    family = "lr_regularized"

    def __init__(self, dim, r, delta=0.0, dual_mode="auto"):
        if r <= 1.0:
            raise DomainError("exponent r must exceed 1")
        if delta < 0.0:
            raise DomainError("blend parameter delta must be >= 0")
        super().__init__(dim, dual_mode)
        self.r = float(r)
        self.delta = float(delta)
        self.weight = delta / (1.0 + delta)
        self._init_constants()

    def _lr(self, xi):
        return np.sum(np.abs(xi) ** self.r, axis=1) ** (1.0 / self.r)

    def _value(self, xi):
        w = self.weight
        hr2 = self._lr(xi) ** 2
        eu2 = np.sum(xi * xi, axis=1)
        return np.sqrt((1.0 - w) * hr2 + w * eu2)

    def _grad_lr(self, xi):
        hr = self._lr(xi)
        return (np.abs(xi) ** (self.r - 1.0)) * np.sign(xi) / hr[:, None] ** (self.r - 1.0)

    def _grad(self, xi):
        w = self.weight
        hr = self._lr(xi)
        num = (1.0 - w) * hr[:, None] * self._grad_lr(xi) + w * xi
        return num / self._value(xi)[:, None]

    def _hess_quadform(self, xi, eta):
        # (1/2) Hess(H^2) = (1-w) [grad Hr x grad Hr + Hr Hess Hr] + w I
        w = self.weight
        r = self.r
        hr = self._lr(xi)
        g = self._grad_lr(xi)
        first = np.sum(g * eta, axis=1) ** 2
        m = np.sum(np.abs(xi) ** r, axis=1)
        dot = np.sum(np.abs(xi) ** (r - 1.0) * np.sign(xi) * eta, axis=1)
        with np.errstate(divide="ignore"):
            diag = np.sum(np.abs(xi) ** (r - 2.0) * eta**2, axis=1)
        quad_hr = (1.0 - r) * m ** (1.0 / r - 2.0) * dot**2 + (r - 1.0) * m ** (1.0 / r - 1.0) * diag
        lr_part = first + hr * quad_hr
        return (1.0 - w) * lr_part + w * np.sum(eta * eta, axis=1)


class DualNorm:
    """H0(z) = sup{<z, xi> : H(xi) = 1}, or its reversed-argument variant
    z |-> H0(-z).

    Closed-form parents expose the dual as another norm object; otherwise
    the sup is found by projected gradient ascent on the unit sphere of H
    from deterministic +-axis starts plus seeded random restarts.  The
    ascent maximizer doubles as grad H0 (envelope theorem), so the duality
    identity H(grad H0) = 1 holds by construction up to solver tolerance.
    """

    def __init__(self, parent, reversed_argument=False, restarts=8, seed=0,
                 step_tol=1.0e-12, max_iter=500):
        self.parent = parent
        self.reversed_argument = bool(reversed_argument)
        self.restarts = restarts
        self.seed = seed
        self.step_tol = step_tol
        self.max_iter = max_iter
        self.closed_form = parent._closed_form_dual() if parent.uses_closed_form_dual else None

    @property
    def dim(self):
        return self.parent.dim

    def _orient(self, z):
        return -z if self.reversed_argument else z

    def value(self, z):
        z = _as_point(z, self.dim)
        single = z.ndim == 1
        zb = np.atleast_2d(self._orient(z))
        if self.closed_form is not None:
            v = self.closed_form._value(zb)
        else:
            v, _ = self._sup(zb)
        return float(v[0]) if single else v

    def grad(self, z):
        z = _as_point(z, self.dim)
        single = z.ndim == 1
        zb = np.atleast_2d(self._orient(z))
        if np.any(np.linalg.norm(zb, axis=1) == 0.0):
            raise SingularityError("gradient of the dual norm at the origin")
        if self.closed_form is not None:
            g = self.closed_form._grad(zb)
        else:
            _, g = self._sup(zb)
        if self.reversed_argument:
            g = -g
        return g[0] if single else g

    def _starts(self, zz):
        n = self.dim
        batch = zz.shape[0]
        axes = np.concatenate([np.eye(n), -np.eye(n)], axis=0)
        rng = np.random.default_rng(self.seed)
        rand = rng.standard_normal((self.restarts, n))
        pts = np.concatenate([axes, rand], axis=0)
        pts = pts / self.parent._value(pts)[:, None]
        shared = np.broadcast_to(pts[:, None, :], (pts.shape[0], batch, n))
        aligned = (zz / self.parent._value(zz)[:, None])[None, :, :]
        return np.concatenate([shared, aligned], axis=0)

    def _project(self, x):
        shape = x.shape
        v = self.parent._value(x.reshape(-1, self.dim)).reshape(shape[:-1])
        return x / np.maximum(v, 1.0e-300)[..., None]

    def _sup(self, z):
        """Batched ascent of <z, xi> on {H = 1}.

        Steps follow the tangential component of z (the Riemannian gradient
        of the linear objective on the level set), retracting radially; the
        stopping criterion is the tangential residual itself, so it vanishes
        exactly at the maximizer.  Returns (values, maximizers) per row of
        z; zero rows give 0.
        """
        nz = np.linalg.norm(z, axis=1)
        nonzero = nz > 0.0
        vals = np.zeros(z.shape[0])
        args = np.zeros_like(z)
        if not np.any(nonzero):
            return vals, args
        zz = z[nonzero] / nz[nonzero, None]  # homogeneity: work at |z| = 1
        b = zz.shape[0]
        x = self._project(self._starts(zz))  # (S, b, n)
        s = x.shape[0]
        obj = np.einsum("sbn,bn->sb", x, zz)
        alpha = np.full((s, b), 1.0)
        # value error scales like the squared tangential residual, so 1e-8
        # here means ~1e-16 in the sup itself
        opt_tol = 1.0e-8
        done = np.zeros((s, b), dtype=bool)
        it = 0
        while it < self.max_iter:
            it += 1
            normal = self.parent._grad(x.reshape(-1, self.dim)).reshape(s, b, self.dim)
            normal = normal / np.linalg.norm(normal, axis=2, keepdims=True)
            tang = zz[None, :, :] - np.einsum("sbn,bn->sb", normal, zz)[:, :, None] * normal
            resid = np.linalg.norm(tang, axis=2)
            done = (resid <= opt_tol) | (alpha < 1.0e-14)
            if done.all():
                break
            cand = self._project(x + alpha[:, :, None] * tang)
            cand_obj = np.einsum("sbn,bn->sb", cand, zz)
            # Armijo-type sufficient increase keeps alpha at the curvature scale
            accept = (cand_obj > obj + 0.3 * alpha * resid**2) & ~done
            x = np.where(accept[:, :, None], cand, x)
            obj = np.where(accept, cand_obj, obj)
            alpha = np.where(accept, np.minimum(alpha * 1.5, 4.0), alpha * 0.5)
        if not done.all():
            best = float((obj.max(axis=0) * nz[nonzero]).max())
            raise ConvergenceError(
                "dual-norm ascent did not converge after %d iterations" % self.max_iter,
                best=best,
            )
        pick = obj.argmax(axis=0)
        vals[nonzero] = obj[pick, np.arange(b)] * nz[nonzero]
        args[nonzero] = x[pick, np.arange(b), :]
        return vals, args


def make_norm(family, dim=None, matrix=None, shift=None, r=None, delta=0.0,
              dual_mode="auto"):
    """Factory used by the config layer."""
    family = family.lower()
    if family == "euclidean":
        if dim is None:
            raise DomainError("euclidean norm needs dim")
        return EuclideanNorm(dim, dual_mode)
    if family == "ellipsoid":
        if matrix is None:
            raise DomainError("ellipsoid norm needs a matrix")
        return EllipsoidNorm(matrix, dual_mode)
    if family == "shifted_ellipsoid":
        if matrix is None or shift is None:
            raise DomainError("shifted_ellipsoid norm needs matrix and shift")
        return ShiftedEllipsoidNorm(matrix, shift, dual_mode)
    if family == "lr_regularized":
        if dim is None or r is None:
            raise DomainError("lr_regularized norm needs dim and r")
        return LrRegularizedNorm(dim, r, delta, dual_mode)
    raise DomainError("unknown norm family %r" % family)


def estimate_ellipticity(norm, samples=1024, seed=0):
    """Min/max over sampled (xi, eta) of the Hessian quadratic form per
    unit |eta|^2.  A lower estimate near zero flags loss of uniform
    convexity (expected e.g. for the raw l^r ball with r > 2).

    Random draws alone almost never land close to the axes, where l^r-type
    degeneracy lives, so near-axis base points with transverse directions
    are always included.
    """
    if samples < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    n = norm.dim
    lo, hi = np.inf, -np.inf
    for _ in range(4):
        xi = rng.standard_normal((samples, n))
        xi = xi[np.linalg.norm(xi, axis=1) > 1e-8]
        eta = rng.standard_normal(xi.shape)
        q = norm._hess_quadform(xi, eta) / np.sum(eta * eta, axis=1)
        lo = min(lo, float(q.min()))
        hi = max(hi, float(q.max()))
    eye = np.eye(n)
    for j in range(n):
        for k in range(n):
            if k == j:
                continue
            for sgn in (1.0, -1.0):
                xi = (sgn * eye[j] + 1.0e-6 * eye[k])[None, :]
                eta = eye[k][None, :]
                q = float(norm._hess_quadform(xi, eta)[0])
                if np.isfinite(q):
                    lo = min(lo, q)
                    hi = max(hi, q)
    return lo, hi


class AxiomReport:
    """Max sampled violations of the norm axioms plus duality identities.

    residuals maps check name -> worst violation; tolerances maps check
    name -> the bound it is held against.  ok is the conjunction.
    """

    def __init__(self, residuals, tolerances, ellipticity, uniformly_convex):
        self.residuals = residuals
        self.tolerances = tolerances
        self.ellipticity = ellipticity
        self.uniformly_convex = uniformly_convex
        self.failures = sorted(
            name for name, v in residuals.items() if v > tolerances[name]
        )
        self.ok = not self.failures and uniformly_convex

    def to_dict(self):
        return {
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "ellipticity": list(self.ellipticity),
            "uniformly_convex": self.uniformly_convex,
            "failures": self.failures,
            "ok": self.ok,
        }


def verify_norm_axioms(norm, samples=1000, seed=0, tol=None):
    """Sample-check homogeneity, the triangle inequality, the Lipschitz
    bound |H(x)-H(y)| <= nu |x-y|, the Euler identity <x, grad H> = H,
    gradient-modulus bounds, finite-difference consistency of grad H, and
    the duality identities H(grad H0) = 1, H0(grad H) = 1."""
    if samples < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    n = norm.dim

    def draw(k):
        v = rng.standard_normal((k, n))
        bad = np.linalg.norm(v, axis=1) < 1e-8
        v[bad] = 1.0
        return v

    x = draw(samples)
    y = draw(samples)
    t = np.exp(rng.uniform(-3.0, 3.0, size=samples))
    hx = norm._value(x)
    hy = norm._value(y)

    res = {}
    res["homogeneity"] = float(
        np.max(np.abs(norm._value(t[:, None] * x) - t * hx) / (1.0 + hx))
    )
    res["triangle"] = float(np.max(norm._value(x + y) - hx - hy))
    res["lipschitz"] = float(
        np.max(np.abs(hx - hy) - norm.nu * np.linalg.norm(x - y, axis=1))
    )
    g = norm._grad(x)
    res["euler"] = float(np.max(np.abs(np.sum(x * g, axis=1) - hx) / hx))
    gn = np.linalg.norm(g, axis=1)
    res["grad_modulus"] = float(
        max(np.max(gn - norm.theta), np.max(1.0 / norm.theta - gn), 0.0)
    )

    # central finite differences of H against grad H
    h = 1e-5 * np.linalg.norm(x, axis=1)
    fd = np.empty_like(g)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        fd[:, j] = (norm._value(x + h[:, None] * e) - norm._value(x - h[:, None] * e)) / (2.0 * h)
    res["grad_fd"] = float(np.max(np.linalg.norm(fd - g, axis=1) / gn))

    dual = norm.dual()
    closed = dual.closed_form is not None
    gd = dual.grad(x)
    res["dual_identity_primal_of_dual_grad"] = float(np.max(np.abs(norm._value(gd) - 1.0)))
    res["dual_identity_dual_of_primal_grad"] = float(np.max(np.abs(dual.value(g) - 1.0)))

    if tol is None:
        tol = 1e-8 if closed else 1e-5
    tolerances = {
        "homogeneity": 1e-10,
        "triangle": 1e-10,
        "lipschitz": 1e-10,
        "euler": 1e-10,
        "grad_modulus": 1e-8,
        "grad_fd": 1e-6,
        "dual_identity_primal_of_dual_grad": tol,
        "dual_identity_dual_of_primal_grad": tol,
    }
    lo, hi = estimate_ellipticity(norm, samples=max(samples // 2, 64), seed=seed)
    return AxiomReport(res, tolerances, (lo, hi), uniformly_convex=lo > 1e-10)
