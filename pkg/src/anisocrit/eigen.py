"""First Dirichlet eigenvalue of the anisotropic p-Laplacian.

lambda1 is the infimum of the Rayleigh quotient

    R(u) = int H(grad u)^p / int |u|^p

over nonzero functions vanishing on the boundary.  The minimizer is the
unique positive principal eigenfunction (up to scale); we find it by
normalized gradient descent on R with Barzilai-Borwein steps and
backtracking, which is simpler and more robust across p than inverse
iteration.  The quotient is scale-invariant, so each step renormalizes
to unit L^p norm; descent is kept monotone by construction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError
from .mesh import (DiscreteFunction, _cell_midvals, _cell_weights, lp_norm,
                   residual_norm, residual_vector)

__all__ = ["EigenResult", "rayleigh", "solve_lambda1"]


@dataclass
class EigenResult:
    lambda1: float
    u1: DiscreteFunction
    iterations: int
    residual: float

    def to_dict(self):
        return {"lambda1": self.lambda1, "iterations": self.iterations,
                "residual": self.residual}


def _gradient_only(params):
    return params.with_updates(lam=0.0, include_critical=False, q=params.p)


def rayleigh(params, u):
    """int H(grad u)^p / int |u|^p; exactly invariant under u -> t u."""
    den = lp_norm(u, params.p) ** params.p
    if den == 0.0:
        raise DomainError("Rayleigh quotient of the zero function")
    w = _cell_weights(u.grid)
    from .mesh import _grad_energy_density
    num = float(np.sum(w * _grad_energy_density(params, u)))
    return num / den


def _regularized_rayleigh(params, u):
    """Internal descent objective: same quotient with the flux-regularized
    gradient density (H^2 + delta^2)^(p/2), so that its exact derivative is
    the assembled weak-form residual.  Differs from the plain quotient by
    O(delta^2)."""
    den = lp_norm(u, params.p) ** params.p
    if den == 0.0:
        raise DomainError("Rayleigh quotient of the zero function")
    w = _cell_weights(u.grid)
    from .mesh import _reg_grad_energy_density
    num = float(np.sum(w * _reg_grad_energy_density(params, u)))
    return num / den


def _quotient_gradient(params, grad_params, u, r_val):
    """Nodal gradient of the Rayleigh quotient (up to the positive factor
    p / int|u|^p, which only rescales the descent direction).  Both
    assembled pieces carry a 1/p, so the quotient value multiplies the
    mass part directly; at a positive critical point this vector is the
    weak eigen-equation residual."""
    g = u.grid
    w = _cell_weights(g)
    grad_num = residual_vector(grad_params, u)  # (1/p) d(int H(grad u)^p)
    um = _cell_midvals(u)
    dm = w * np.abs(um) ** (params.p - 2.0) * um  # (1/p) d(int |u|^p) pieces
    if g.kind == "radial":
        grad_den = np.zeros(g.size)
        grad_den[1:] += 0.5 * dm
        grad_den[:-1] += 0.5 * dm
        grad_den[-1] = 0.0
    else:
        grad_den = np.zeros(g.shape)
        quarter = 0.25 * dm
        grad_den[:-1, :-1] += quarter
        grad_den[1:, :-1] += quarter
        grad_den[:-1, 1:] += quarter
        grad_den[1:, 1:] += quarter
        grad_den[g.boundary] = 0.0
    return grad_num - r_val * grad_den


def _default_init(grid):
    if grid.kind == "radial":
        vals = 1.0 - (grid.rho / grid.radius) ** 2
        return DiscreteFunction(grid, vals)
    (x0, x1), (y0, y1) = grid.bounds
    xx, yy = np.meshgrid(grid.x, grid.y, indexing="ij")
    vals = (xx - x0) * (x1 - xx) * (yy - y0) * (y1 - yy)
    return DiscreteFunction(grid, vals)


def natural_preconditioner(params, u):
    """Solver for (K(u) + M) z = g with K(u) the linearized flux stiffness
    at the current iterate and lumped measure M.

    Descending in this metric absorbs both the mesh-grading scale spread
    and the p != 2 degeneracy of the flux (its linearization carries the
    same (|grad u|^2 + delta^2)^((p-2)/2)-type weights that make the plain
    gradient ill-conditioned)."""
    grid = params.grid
    d2 = params.flux_delta**2
    p = params.p
    from .mesh import _orientation_pow, discrete_gradient

    if grid.kind == "radial":
        from scipy.linalg import solve_banded
        w = grid.cell_weight
        fp = discrete_gradient(u)
        dflux = (_orientation_pow(params, fp)
                 * (fp**2 + d2) ** ((p - 4.0) / 2.0) * ((p - 1.0) * fp**2 + d2))
        k = w * dflux / grid.h**2
        nn = grid.size
        diag = np.zeros(nn)
        diag[1:] += k
        diag[:-1] += k
        lumped = np.zeros(nn)
        lumped[1:] += 0.5 * w
        lumped[:-1] += 0.5 * w
        band = np.zeros((3, nn))
        band[1] = diag + lumped
        band[0, 1:] = -k
        band[2, :-1] = -k
        band[1, -1] = 1.0
        band[0, -1] = 0.0
        band[2, -2] = 0.0

        def solve(g):
            rhs = g.copy()
            rhs[-1] = 0.0
            return solve_banded((1, 1), band, rhs)

        return solve

    from scipy import sparse
    from scipy.sparse.linalg import splu
    m1, m2 = grid.shape
    gr = discrete_gradient(u).reshape(-1, 2)
    nzm = np.linalg.norm(gr, axis=1) > 0.0
    hval = np.zeros(gr.shape[0])
    if params.norm is not None and np.any(nzm):
        hval[nzm] = params.norm._value(gr[nzm])
    acell = ((hval**2 + d2) ** ((p - 2.0) / 2.0)).reshape(m1 - 1, m2 - 1)
    acell = np.maximum(acell, 1e-12)
    idx = np.arange(m1 * m2).reshape(m1, m2)
    # edge coefficients: average the scalar cell weights of the cells
    # touching the edge (a 5-point weighted Laplacian preconditioner)
    ah = np.zeros((m1 - 1, m2))
    ah[:, :-1] += 0.5 * acell
    ah[:, 1:] += 0.5 * acell
    ah[:, 0] += 0.5 * acell[:, 0]
    ah[:, -1] += 0.5 * acell[:, -1]
    av = np.zeros((m1, m2 - 1))
    av[:-1, :] += 0.5 * acell
    av[1:, :] += 0.5 * acell
    av[0, :] += 0.5 * acell[0, :]
    av[-1, :] += 0.5 * acell[-1, :]
    rows, cols, vals = [], [], []

    def couple(a, b, cpl):
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([cpl, cpl, -cpl, -cpl])

    hx_f = grid.hy / grid.hx
    hy_f = grid.hx / grid.hy
    for (a, b), cpl in zip(
        zip(idx[:-1, :].ravel(), idx[1:, :].ravel()), (ah * hx_f).ravel()
    ):
        couple(a, b, cpl)
    for (a, b), cpl in zip(
        zip(idx[:, :-1].ravel(), idx[:, 1:].ravel()), (av * hy_f).ravel()
    ):
        couple(a, b, cpl)
    diag_idx = np.arange(m1 * m2)
    rows.extend(diag_idx)
    cols.extend(diag_idx)
    vals.extend(np.full(m1 * m2, grid.cell_area))
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(m1 * m2, m1 * m2)).tolil()
    bmask = grid.boundary.ravel()
    for i in np.flatnonzero(bmask):
        mat.rows[i] = [i]
        mat.data[i] = [1.0]
    lu = splu(mat.tocsc())

    def solve(g):
        rhs = g.ravel().copy()
        rhs[bmask] = 0.0
        return lu.solve(rhs).reshape(grid.shape)

    return solve


def solve_lambda1(params, init=None, tol=1.0e-8, max_iter=100000):
    """Minimize the Rayleigh quotient; returns an EigenResult whose
    eigenfunction has unit L^p norm and positive interior values.

    Converged when the relative Rayleigh decrease stays below tol and the
    weak eigen-equation residual is below 10*tol-scaled; ConvergenceError
    (carrying the best iterate) past max_iter.
    """
    grid = params.grid
    u = (init or _default_init(grid)).copy()
    if np.all(u.values <= 0.0):
        raise DomainError("initial guess must be positive somewhere")
    u = u * (1.0 / lp_norm(u, params.p))
    grad_params = _gradient_only(params)

    def direction(cand, r_cand):
        z = natural_preconditioner(params, cand)(
            _quotient_gradient(params, grad_params, cand, r_cand))
        # the quotient is scale-invariant: remove the component the L^p
        # renormalization would cancel anyway, so steps act in full
        uhat = cand.values / np.linalg.norm(cand.values)
        return z - float(np.sum(z * uhat)) * uhat

    r_val = _regularized_rayleigh(params, u)
    z_vec = direction(u, r_val)
    alpha = 1.0
    prev_vals = None
    prev_dir = None
    stall = 0
    it = 0
    while it < max_iter:
        it += 1
        step = alpha
        accepted = False
        for _ in range(50):
            cand = DiscreteFunction(grid, u.values - step * z_vec)
            nrm = lp_norm(cand, params.p)
            if nrm > 0.0:
                cand = cand * (1.0 / nrm)
                r_new = _regularized_rayleigh(params, cand)
                if r_new <= r_val:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            stall += 1
            if stall > 3:
                break  # descent exhausted at this resolution
            alpha = 1.0
            continue
        rel_drop = (r_val - r_new) / max(r_val, 1e-300)
        z_new = direction(cand, r_new)
        if prev_vals is not None:
            du = cand.values - prev_vals
            dz = z_new - prev_dir
            denom = float(np.sum(du * dz))
            alpha = float(np.sum(du * du)) / denom if denom > 0.0 else 1.0
        prev_vals, prev_dir = cand.values.copy(), z_new.copy()
        u, r_val, z_vec = cand, r_new, z_new
        if rel_drop <= tol:
            stall += 1
        else:
            stall = 0
        if stall >= 5:
            res = residual_norm(params.with_updates(lam=r_val, q=params.p,
                                                    include_critical=False), u)
            if res <= 10.0 * tol * max(1.0, r_val):
                if np.min(_interior(u)) < 0.0:
                    u = DiscreteFunction(grid, np.abs(u.values))
                return EigenResult(lambda1=float(rayleigh(params, u)), u1=u,
                                   iterations=it, residual=float(res))
            stall = 0  # decrease stalled but residual not yet small

    res = residual_norm(params.with_updates(lam=r_val, q=params.p,
                                            include_critical=False), u)
    if res <= 10.0 * tol * max(1.0, r_val):
        if np.min(_interior(u)) < 0.0:
            u = DiscreteFunction(grid, np.abs(u.values))
        return EigenResult(lambda1=float(rayleigh(params, u)), u1=u,
                           iterations=it, residual=float(res))
    raise ConvergenceError(
        "eigen descent did not reach the residual target",
        best=EigenResult(lambda1=float(rayleigh(params, u)), u1=u, iterations=it,
                         residual=float(res)),
    )


def _interior(u):
    if u.grid.kind == "radial":
        return u.values[:-1]
    return u.values[~u.grid.boundary]
