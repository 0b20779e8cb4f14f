"""Discrete function spaces, energies, and weak-form residuals.

Two grid types are provided.

RadialGrid discretizes profiles f(rho) on a Wulff ball {R(x) < radius},
R the reversed dual norm.  For such profiles grad u = f'(rho) grad R(x),
and since the primal norm of grad R is exactly 1 on the decreasing branch
(the duality identity), the energy density reduces to |f'(rho)|^p; the
anisotropy enters only through the level-set weight omega.  For
non-symmetric anisotropies the increasing branch carries a sampled
orientation constant instead of 1 -- a modeling choice, recorded as such,
that never triggers for the decreasing profiles the solvers work with.

TensorGrid2D is a plain rectangle with a Dirichlet ring, first-order cell
gradients (exact on affine functions) and midpoint quadrature, matching
the first-order gradient so neither side over-claims accuracy.

All energies use the same recipe: gradient terms per cell, zero-order
terms at cell midpoints, weight = cell measure.  The flux in the weak
form is regularized as (H^2 + delta^2)^((p-2)/2) H grad H(grad u), which
removes the degeneracy/singularity at grad u = 0 for p != 2.
"""

import numpy as np

from .errors import DomainError
from .bubbles import critical_exponent
from .quadrature import sphere_quadrature

__all__ = [
    "RadialGrid",
    "TensorGrid2D",
    "DiscreteFunction",
    "ProblemParams",
    "discrete_gradient",
    "energy",
    "weak_residual",
    "residual_vector",
    "residual_norm",
    "hp_norm",
    "lp_norm",
    "residual_jacobian_radial",
]


def graded_nodes(count, radius, gamma_inner=6.0, gamma_outer=3.0):
    """Strictly increasing nodes on [0, radius] clustered at both ends by
    exponential stretching (stronger near 0, where bubble profiles
    concentrate)."""
    s = np.linspace(0.0, 1.0, count)
    inner = (np.exp(gamma_inner * s) - 1.0) / (np.exp(gamma_inner) - 1.0)
    outer = 1.0 - (np.exp(gamma_outer * (1.0 - s)) - 1.0) / (np.exp(gamma_outer) - 1.0)
    nodes = radius * 0.5 * (inner + outer)
    nodes[0], nodes[-1] = 0.0, radius
    return nodes


class RadialGrid:
    """1-D grid in the anisotropic radius rho on [0, radius].

    The only Dirichlet node is the last one (the Wulff-ball boundary); the
    center carries no constraint.  omega is the weighted perimeter of the
    unit level set (from the bubbles module); cell weights are
    omega * mid^(n-1) * h.
    """

    kind = "radial"

    def __init__(self, n, radius, nodes, omega, grading=(6.0, 3.0)):
        if n < 2:
            raise DomainError("ambient dimension must be >= 2")
        if radius <= 0.0:
            raise DomainError("radius must be positive")
        self.n = int(n)
        self.radius = float(radius)
        self.omega = float(omega)
        self.grading = tuple(grading)
        if np.isscalar(nodes):
            if int(nodes) < 8:
                raise DomainError("need at least 8 nodes")
            self.rho = graded_nodes(int(nodes), radius, *self.grading)
        else:
            self.rho = np.asarray(nodes, dtype=float)
            if self.rho[0] != 0.0 or abs(self.rho[-1] - radius) > 1e-14:
                raise DomainError("nodes must run from 0 to radius")
            if np.any(np.diff(self.rho) <= 0.0):
                raise DomainError("nodes must be strictly increasing")
        self.h = np.diff(self.rho)
        self.mid = 0.5 * (self.rho[:-1] + self.rho[1:])
        self.cell_weight = self.omega * self.mid ** (self.n - 1) * self.h

    @property
    def size(self):
        return self.rho.size

    @property
    def volume(self):
        return self.omega * self.radius**self.n / self.n

    def zeros(self):
        return DiscreteFunction(self, np.zeros(self.size))

    def from_profile(self, f):
        """Sample a radial profile at the nodes (boundary forced to 0)."""
        return DiscreteFunction(self, np.asarray(f(self.rho), dtype=float))

    def refined(self, factor=2):
        return RadialGrid(self.n, self.radius, factor * (self.size - 1) + 1,
                          self.omega, self.grading)


class TensorGrid2D:
    """Rectangle grid with (m1, m2) nodes per side and a Dirichlet ring."""

    kind = "grid2d"
    n = 2

    def __init__(self, bounds, shape, norm=None):
        (x0, x1), (y0, y1) = bounds
        m1, m2 = int(shape[0]), int(shape[1])
        if x1 <= x0 or y1 <= y0:
            raise DomainError("degenerate rectangle")
        if m1 < 3 or m2 < 3:
            raise DomainError("need at least one interior node per side")
        self.bounds = ((float(x0), float(x1)), (float(y0), float(y1)))
        self.shape = (m1, m2)
        self.x = np.linspace(x0, x1, m1)
        self.y = np.linspace(y0, y1, m2)
        self.hx = self.x[1] - self.x[0]
        self.hy = self.y[1] - self.y[0]
        self.norm = norm
        self.boundary = np.zeros((m1, m2), dtype=bool)
        self.boundary[0, :] = self.boundary[-1, :] = True
        self.boundary[:, 0] = self.boundary[:, -1] = True

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def volume(self):
        (x0, x1), (y0, y1) = self.bounds
        return (x1 - x0) * (y1 - y0)

    def zeros(self):
        return DiscreteFunction(self, np.zeros(self.shape))

    def from_callable(self, f):
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return DiscreteFunction(self, np.asarray(f(xx, yy), dtype=float))

    def refined(self, factor=2):
        return TensorGrid2D(self.bounds,
                            (factor * (self.shape[0] - 1) + 1,
                             factor * (self.shape[1] - 1) + 1),
                            self.norm)


class DiscreteFunction:
    """Nodal values on a grid, boundary trace pinned to zero."""

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if grid.kind == "radial":
            if values.shape != (grid.size,):
                raise DomainError("values shape mismatch")
            values[-1] = 0.0
        else:
            if values.shape != grid.shape:
                raise DomainError("values shape mismatch")
            values[grid.boundary] = 0.0
        self.grid = grid
        self.values = values

    def copy(self):
        return DiscreteFunction(self.grid, self.values.copy())

    def __add__(self, other):
        return DiscreteFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return DiscreteFunction(self.grid, self.values - other.values)

    def __mul__(self, t):
        return DiscreteFunction(self.grid, self.values * float(t))

    __rmul__ = __mul__

    def interpolate_to(self, grid):
        if self.grid.kind == "radial":
            return DiscreteFunction(grid, np.interp(grid.rho, self.grid.rho, self.values))
        from scipy.interpolate import RegularGridInterpolator
        it = RegularGridInterpolator((self.grid.x, self.grid.y), self.values)
        xx, yy = np.meshgrid(grid.x, grid.y, indexing="ij")
        return DiscreteFunction(grid, it(np.stack([xx, yy], axis=-1)))


class ProblemParams:
    """Data of the perturbed critical problem: exponents (p, q), the
    perturbation strength lam, the anisotropy, and the discrete domain.

    include_critical switches the critical term off (used by eigenvalue
    residual checks).  flux_delta regularizes the weak-form flux.
    """

    def __init__(self, p, q, lam, norm, grid, flux_delta=1.0e-8,
                 include_critical=True):
        n = grid.n
        if not 1.0 < p < n:
            raise DomainError("need 1 < p < n")
        pstar = critical_exponent(n, p)
        if not p <= q < pstar:
            raise DomainError("need p <= q < p* = %g" % pstar)
        if norm is not None and norm.dim != n:
            raise DomainError("norm dimension mismatch")
        if flux_delta < 0.0:
            raise DomainError("flux_delta must be >= 0")
        self.n = n
        self.p = float(p)
        self.q = float(q)
        self.lam = float(lam)
        self.norm = norm
        self.grid = grid
        self.flux_delta = float(flux_delta)
        self.include_critical = bool(include_critical)
        self.pstar = pstar
        # orientation constants of the radial reduction: the decreasing
        # branch is exactly 1 by the duality identity; the increasing
        # branch is 1 for symmetric norms and a sampled representative
        # otherwise
        self.orient_dec = 1.0
        self.orient_inc = 1.0
        if norm is not None and not norm.symmetric and grid.kind == "radial":
            dual_hat = norm.dual(reversed_argument=True)
            pts, w = sphere_quadrature(n, order=16)
            g = dual_hat.grad(pts)
            self.orient_inc = float(np.dot(w, norm._value(g)) / w.sum())

    def with_updates(self, **kw):
        cfg = dict(p=self.p, q=self.q, lam=self.lam, norm=self.norm,
                   grid=self.grid, flux_delta=self.flux_delta,
                   include_critical=self.include_critical)
        cfg.update(kw)
        return ProblemParams(**cfg)


# ---------------------------------------------------------------------------
# discrete calculus
# ---------------------------------------------------------------------------

def discrete_gradient(u):
    """Cellwise first-order gradient.

    Radial grids return the scalar f' per cell; 2-D grids return an array
    of shape (m1-1, m2-1, 2) of cell-centered gradients (exact on affine
    functions)."""
    g = u.grid
    if g.kind == "radial":
        return np.diff(u.values) / g.h
    v = u.values
    dx = (v[1:, :-1] - v[:-1, :-1] + v[1:, 1:] - v[:-1, 1:]) / (2.0 * g.hx)
    dy = (v[:-1, 1:] - v[:-1, :-1] + v[1:, 1:] - v[1:, :-1]) / (2.0 * g.hy)
    return np.stack([dx, dy], axis=-1)


def _orientation_pow(params, fp):
    if params.orient_inc == 1.0:
        return 1.0
    return np.where(fp > 0.0, params.orient_inc, 1.0) ** params.p


def _grad_energy_density(params, u):
    """H(grad u)^p per cell."""
    g = u.grid
    if g.kind == "radial":
        fp = discrete_gradient(u)
        return _orientation_pow(params, fp) * np.abs(fp) ** params.p
    gr = discrete_gradient(u).reshape(-1, 2)
    nz = np.linalg.norm(gr, axis=1) > 0.0
    h = np.zeros(gr.shape[0])
    h[nz] = params.norm._value(gr[nz])
    return (h ** params.p).reshape(g.shape[0] - 1, g.shape[1] - 1)


def _reg_grad_energy_density(params, u):
    """(H(grad u)^2 + delta^2)^(p/2) per cell: the potential whose exact
    derivative is the regularized weak-form flux."""
    g = u.grid
    d2 = params.flux_delta**2
    if g.kind == "radial":
        fp = discrete_gradient(u)
        return _orientation_pow(params, fp) * (fp**2 + d2) ** (params.p / 2.0)
    gr = discrete_gradient(u).reshape(-1, 2)
    nz = np.linalg.norm(gr, axis=1) > 0.0
    h = np.zeros(gr.shape[0])
    h[nz] = params.norm._value(gr[nz])
    return ((h**2 + d2) ** (params.p / 2.0)).reshape(g.shape[0] - 1, g.shape[1] - 1)


def _cell_midvals(u):
    g = u.grid
    if g.kind == "radial":
        return 0.5 * (u.values[:-1] + u.values[1:])
    v = u.values
    return 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])


def _cell_weights(grid):
    if grid.kind == "radial":
        return grid.cell_weight
    return grid.cell_area


def energy(params, u):
    """The free energy driving the problem:

        (1/p) int H(grad u)^p - (lam/q) int (u+)^q - (1/p*) int (u+)^p*

    computed by grid quadrature.  Vanishes at u = 0."""
    w = _cell_weights(u.grid)
    um = np.maximum(_cell_midvals(u), 0.0)
    val = np.sum(w * _grad_energy_density(params, u)) / params.p
    val -= params.lam / params.q * np.sum(w * um**params.q)
    if params.include_critical:
        val -= np.sum(w * um**params.pstar) / params.pstar
    return float(val)


def _flux_coefficient(params, fp):
    """Regularized scalar flux (f'^2 + delta^2)^((p-2)/2) f' of the radial
    reduction, including the orientation factor."""
    d2 = params.flux_delta**2
    return _orientation_pow(params, fp) * (fp**2 + d2) ** ((params.p - 2.0) / 2.0) * fp


def _zero_order_density(params, um):
    dens = params.lam * um ** (params.q - 1.0)
    if params.include_critical:
        dens = dens + um ** (params.pstar - 1.0)
    return dens


def weak_residual(params, u, v):
    """Directional derivative of the energy at u in direction v:

        int Flux(grad u) . grad v - lam int (u+)^(q-1) v - int (u+)^(p*-1) v

    with the regularized flux.  Linear in v."""
    g = u.grid
    w = _cell_weights(g)
    um = np.maximum(_cell_midvals(u), 0.0)
    vm = _cell_midvals(v)
    if g.kind == "radial":
        fp = discrete_gradient(u)
        vp = discrete_gradient(v)
        flux_term = np.sum(w * _flux_coefficient(params, fp) * vp)
    else:
        gu = discrete_gradient(u).reshape(-1, 2)
        gv = discrete_gradient(v).reshape(-1, 2)
        flux = _flux_vector_2d(params, gu)
        flux_term = np.sum(w * np.sum(flux * gv, axis=1))
    zero_term = np.sum(w * _zero_order_density(params, um) * vm)
    return float(flux_term - zero_term)


def _flux_vector_2d(params, gu):
    nz = np.linalg.norm(gu, axis=1) > 0.0
    flux = np.zeros_like(gu)
    if np.any(nz):
        h = params.norm._value(gu[nz])
        gh = params.norm._grad(gu[nz])
        coef = (h**2 + params.flux_delta**2) ** ((params.p - 2.0) / 2.0) * h
        flux[nz] = coef[:, None] * gh
    return flux


def residual_vector(params, u):
    """Nodal assembly of the weak residual against every nodal hat
    function; the entry at a Dirichlet node is forced to zero."""
    g = u.grid
    w = _cell_weights(g)
    um = np.maximum(_cell_midvals(u), 0.0)
    dens = _zero_order_density(params, um)
    if g.kind == "radial":
        fp = discrete_gradient(u)
        flux = w * _flux_coefficient(params, fp) / g.h
        r = np.zeros(g.size)
        # hat at node i rises on cell i-1 (slope 1/h) and falls on cell i
        r[1:] += flux
        r[:-1] -= flux
        half = 0.5 * w * dens
        r[1:] -= half
        r[:-1] -= half
        r[-1] = 0.0
        return r
    gu = discrete_gradient(u).reshape(-1, 2)
    flux = (_flux_vector_2d(params, gu) * w).reshape(g.shape[0] - 1, g.shape[1] - 1, 2)
    r = np.zeros(g.shape)
    fx = flux[:, :, 0] / (2.0 * g.hx)
    fy = flux[:, :, 1] / (2.0 * g.hy)
    # corner coefficients of the cell-centered gradient of the hat
    r[1:, :-1] += fx
    r[1:, 1:] += fx
    r[:-1, :-1] -= fx
    r[:-1, 1:] -= fx
    r[:-1, 1:] += fy
    r[1:, 1:] += fy
    r[:-1, :-1] -= fy
    r[1:, :-1] -= fy
    quarter = 0.25 * w * dens
    r[:-1, :-1] -= quarter
    r[1:, :-1] -= quarter
    r[:-1, 1:] -= quarter
    r[1:, 1:] -= quarter
    r[g.boundary] = 0.0
    return r


def _hat_hp_norms(params):
    """H-energy norms of the nodal hat functions (for residual scaling)."""
    g = params.grid
    p = params.p
    cinc = params.orient_inc
    if g.kind == "radial":
        w = g.cell_weight
        rise = cinc**p * w / g.h**p  # hat rises on its left cell
        fall = w / g.h**p           # and falls on its right cell
        e = np.zeros(g.size)
        e[1:] += rise
        e[:-1] += fall
        return e ** (1.0 / p)
    # uniform estimate via one interior hat (translation invariant grid)
    hat = g.zeros()
    i, j = g.shape[0] // 2, g.shape[1] // 2
    hat.values[i, j] = 1.0
    val = hp_norm(params, hat)
    e = np.full(g.shape, val)
    return e


def residual_norm(params, u):
    """Max over H-energy-normalized nodal directions of the weak residual;
    zero exactly at discrete critical points."""
    r = residual_vector(params, u)
    e = _hat_hp_norms(params)
    if params.grid.kind == "radial":
        return float(np.max(np.abs(r[:-1]) / e[:-1]))
    mask = ~params.grid.boundary
    return float(np.max(np.abs(r[mask]) / e[mask]))


def hp_norm(params, u):
    """(int H(grad u)^p)^(1/p), the anisotropic Dirichlet norm."""
    w = _cell_weights(u.grid)
    return float(np.sum(w * _grad_energy_density(params, u)) ** (1.0 / params.p))


def lp_norm(u, p, grid=None):
    """(int |u|^p)^(1/p) by midpoint quadrature."""
    g = grid or u.grid
    w = _cell_weights(g)
    return float(np.sum(w * np.abs(_cell_midvals(u)) ** p) ** (1.0 / p))


def residual_jacobian_radial(params, u, jac_floor=1.0e-12):
    """Tridiagonal Jacobian of residual_vector for radial grids, in
    scipy.linalg.solve_banded layout (3, N).

    Near-boundary powers (u+)^(q-2) with q < 2 blow up as u -> 0; the
    floor clips only the Jacobian (the residual stays exact), trading
    quadratic for damped-Newton convergence there."""
    g = params.grid
    if g.kind != "radial":
        raise DomainError("banded Jacobian is for radial grids")
    w = g.cell_weight
    fp = discrete_gradient(u)
    d2 = params.flux_delta**2
    dflux = (
        _orientation_pow(params, fp)
        * (fp**2 + d2) ** ((params.p - 4.0) / 2.0)
        * ((params.p - 1.0) * fp**2 + d2)
    )
    kcell = w * dflux / g.h**2  # coupling of the two nodes of each cell
    um = np.maximum(_cell_midvals(u), 0.0)
    umf = np.maximum(um, jac_floor)
    ddens = params.lam * (params.q - 1.0) * np.where(um > 0, umf ** (params.q - 2.0), 0.0)
    if params.include_critical:
        ddens = ddens + (params.pstar - 1.0) * np.where(um > 0, umf ** (params.pstar - 2.0), 0.0)
    mcell = 0.25 * w * ddens  # d(half * dens)/d(corner value), per corner

    nn = g.size
    diag = np.zeros(nn)
    lower = np.zeros(nn)
    upper = np.zeros(nn)
    diag[1:] += kcell - mcell
    diag[:-1] += kcell - mcell
    lower[:-1] = -kcell - mcell  # dr_i/du_{i-1} stored at i-1 (banded layout)
    upper[1:] = -kcell - mcell   # dr_i/du_{i+1} stored at i+1
    # Dirichlet row: identity
    diag[-1] = 1.0
    lower[-2] = 0.0
    upper[-1] = 0.0
    band = np.zeros((3, nn))
    band[0, :] = upper
    band[1, :] = diag
    band[2, :] = lower
    return band
