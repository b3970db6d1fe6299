"""Discrete action extremals between two surfaces and boundary variations.

The domain between the surfaces t0_j < t1_j is covered by a grid with a
shared row count R: site j steps uniformly from t0_j to t1_j, so row 0 is
the first surface and row R the second, and intermediate rows are slanted
surfaces whose link slopes feed the slope-corrected spatial derivative
zx = zs - zdot * v.  Time quadrature of the non-derivative terms uses the
trapezoid rule so the action value converges at second order in the row
step; the kinetic term uses forward differences, which keeps the stationary
equations of Verlet type.

Boundary momenta and the energy / flux densities come from one-sided
second-order differences at the boundary rows; with the sign conventions
used here the energy density of a static extremal sitting at a potential
minimum equals +V(const).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NewtonDivergence, NotSpacelike, SingularBVP
from .lagrangian import LagrangianSpec, legendre_transform

COND_LIMIT = 1e12
NEWTON_TOL = 1e-10
NEWTON_MAXITER = 60


@dataclass(frozen=True)
class BoundaryData:
    """Two non-intersecting spacelike surfaces with field values on them."""

    t0: tuple[float, ...]
    t1: tuple[float, ...]
    z0: tuple[float, ...]
    z1: tuple[float, ...]
    spacing: float = 1.0

    def __post_init__(self):
        for name in ("t0", "t1", "z0", "z1"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        n = len(self.t0)
        if not (len(self.t1) == len(self.z0) == len(self.z1) == n) or n < 1:
            raise ValueError("boundary arrays must share a common nonzero length")
        if any(b <= a for a, b in zip(self.t0, self.t1)):
            raise ValueError("surfaces must satisfy t0_j < t1_j at every site")
        for name in ("t0", "t1"):
            t = np.asarray(getattr(self, name))
            slopes = (np.roll(t, -1) - t) / self.spacing
            if np.any(np.abs(slopes) >= 1.0):
                raise NotSpacelike(f"{name} link slopes {slopes} violate |v| < 1")

    @property
    def n_sites(self) -> int:
        return len(self.t0)

    def replace_z1(self, j: int, value: float) -> "BoundaryData":
        z1 = list(self.z1)
        z1[j] = value
        return BoundaryData(self.t0, self.t1, self.z0, tuple(z1), self.spacing)

    def replace_z0(self, j: int, value: float) -> "BoundaryData":
        z0 = list(self.z0)
        z0[j] = value
        return BoundaryData(self.t0, tuple(self.t1), tuple(z0), self.z1, self.spacing)

    def replace_t1(self, j: int, value: float) -> "BoundaryData":
        t1 = list(self.t1)
        t1[j] = value
        return BoundaryData(self.t0, tuple(t1), self.z0, self.z1, self.spacing)

    def replace_t0(self, j: int, value: float) -> "BoundaryData":
        t0 = list(self.t0)
        t0[j] = value
        return BoundaryData(tuple(t0), self.t1, self.z0, self.z1, self.spacing)

    def relabeled(self, shift: int) -> "BoundaryData":
        roll = lambda arr: tuple(np.roll(np.asarray(arr), shift))
        return BoundaryData(roll(self.t0), roll(self.t1), roll(self.z0), roll(self.z1),
                            self.spacing)

    def reflected(self) -> "BoundaryData":
        rev = lambda arr: tuple(reversed(arr))
        return BoundaryData(rev(self.t0), rev(self.t1), rev(self.z0), rev(self.z1),
                            self.spacing)

    def shifted(self, dt: float) -> "BoundaryData":
        move = lambda arr: tuple(x + dt for x in arr)
        return BoundaryData(move(self.t0), move(self.t1), self.z0, self.z1, self.spacing)


class _ActionGrid:
    """Vectorized action, gradient, and sparse Hessian on the row grid.

    Site-local terms (kinetic, potential) carry the site measure a*delta_j;
    link terms carry the link-symmetric measure a*(delta_j + delta_{j+1})/2
    and couple the slope to the link-centered time derivative
    (q_j + q_{j+1})/2, which makes cyclic and reflected site relabelings
    exact symmetries of the discrete action even between curved surfaces.
    """

    def __init__(self, bd: BoundaryData, lagr: LagrangianSpec, n_rows: int):
        self.bd = bd
        self.lagr = lagr
        self.R = n_rows
        self.n = bd.n_sites
        self.a = bd.spacing
        t0 = np.asarray(bd.t0)
        t1 = np.asarray(bd.t1)
        self.delta = (t1 - t0) / n_rows                      # per-site row step
        rows = np.arange(n_rows + 1)[:, None]
        self.row_times = t0[None, :] + rows * self.delta[None, :]
        self.v_rows = (np.roll(self.row_times, -1, axis=1) - self.row_times) / self.a
        self.w = self.a * self.delta                         # site cell measure
        self.w_link = self.a * 0.5 * (self.delta + np.roll(self.delta, -1))
        weights = np.ones((n_rows + 1, self.n))
        weights[0] = weights[-1] = 0.5
        self.w_pot = weights * self.w[None, :]               # trapezoid potential weights
        self.n_points = (n_rows + 1) * self.n
        self._assemble_quadratic()

    def _slot_indices(self):
        r, j = np.meshgrid(np.arange(self.R), np.arange(self.n), indexing="ij")
        jp = (j + 1) % self.n
        a0 = r * self.n + j
        a1 = (r + 1) * self.n + j
        b0 = r * self.n + jp
        b1 = (r + 1) * self.n + jp
        return r, j, (a0, a1, b0, b1)

    def _functionals(self, r, j):
        """Coefficient stacks (4 slots, cells) of the linear maps q, X0, X1.

        X_rho = zs_rho - (q_j + q_{j+1})/2 * v_rho; the link-centered time
        derivative keeps X odd under site reflection.
        """
        inv_d = 1.0 / self.delta[j]
        inv_dn = 1.0 / self.delta[(j + 1) % self.n]
        v0 = self.v_rows[r, j]
        v1 = self.v_rows[r + 1, j]
        inv_a = np.full_like(inv_d, 1.0 / self.a)
        zero = np.zeros_like(inv_d)
        cq = np.stack([-inv_d, inv_d, zero, zero])
        cx0 = np.stack([-inv_a + 0.5 * v0 * inv_d, -0.5 * v0 * inv_d,
                        inv_a + 0.5 * v0 * inv_dn, -0.5 * v0 * inv_dn])
        cx1 = np.stack([0.5 * v1 * inv_d, -inv_a - 0.5 * v1 * inv_d,
                        0.5 * v1 * inv_dn, inv_a - 0.5 * v1 * inv_dn])
        return cq, cx0, cx1

    def _assemble_quadratic(self):
        lagr = self.lagr
        r, j, slots = self._slot_indices()
        r, j = r.ravel(), j.ravel()
        slots = [s.ravel() for s in slots]
        cq, cx0, cx1 = self._functionals(r, j)
        w = self.w[j]
        w_link = self.w_link[j]
        rows, cols, vals = [], [], []
        for coeffs, scale in ((cq, 2.0 * lagr.kinetic_coeff * w),
                              (cx0, lagr.gradient_coeff * w_link),
                              (cx1, lagr.gradient_coeff * w_link)):
            if not np.any(scale):
                continue
            for alpha in range(4):
                ca = coeffs[alpha]
                if not np.any(ca):
                    continue
                for beta in range(4):
                    cb = coeffs[beta]
                    if not np.any(cb):
                        continue
                    rows.append(slots[alpha])
                    cols.append(slots[beta])
                    vals.append(scale * ca * cb)
        if rows:
            self.h_quad = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n_points, self.n_points)).tocsr()
        else:
            self.h_quad = sp.csr_matrix((self.n_points, self.n_points))
        lin = np.zeros(self.n_points)
        c1w = lagr.kinetic_linear * w
        for alpha in range(4):
            np.add.at(lin, slots[alpha], c1w * cq[alpha])
        self.lin = lin

    # -- evaluation ---------------------------------------------------------

    def action(self, z: np.ndarray) -> float:
        lagr = self.lagr
        q = (z[1:] - z[:-1]) / self.delta[None, :]
        q_link = 0.5 * (q + np.roll(q, -1, axis=1))
        zs = (np.roll(z, -1, axis=1) - z) / self.a
        x0 = zs[:-1] - q_link * self.v_rows[:-1]
        x1 = zs[1:] - q_link * self.v_rows[1:]
        site_cells = lagr.kinetic_coeff * q ** 2 + lagr.kinetic_linear * q
        link_cells = 0.5 * lagr.gradient_coeff * (x0 ** 2 + x1 ** 2)
        return float((self.w[None, :] * site_cells).sum()
                     + (self.w_link[None, :] * link_cells).sum()
                     - (self.w_pot * lagr.potential_value(z)).sum())

    def gradient(self, z_flat: np.ndarray) -> np.ndarray:
        z = z_flat.reshape(self.R + 1, self.n)
        pot = self.w_pot * self.lagr.potential_derivative(z)
        return self.h_quad @ z_flat + self.lin - pot.ravel()

    def hessian(self, z_flat: np.ndarray):
        z = z_flat.reshape(self.R + 1, self.n)
        pot = self.w_pot * self.lagr.potential_second_derivative(z)
        return self.h_quad - sp.diags(pot.ravel())

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_points, dtype=bool)
        mask[self.n:-self.n] = True
        return mask

    def boundary_fill(self) -> np.ndarray:
        z = np.zeros((self.R + 1, self.n))
        z[0] = self.bd.z0
        z[-1] = self.bd.z1
        return z

    def interpolant(self) -> np.ndarray:
        frac = np.arange(self.R + 1)[:, None] / self.R
        z0 = np.asarray(self.bd.z0)[None, :]
        z1 = np.asarray(self.bd.z1)[None, :]
        return z0 + frac * (z1 - z0)


@dataclass
class ExtremalSolution:
    """Stationary field of the discrete action with its value and residual."""

    bd: BoundaryData
    z: np.ndarray               # (R+1, N) including boundary rows
    row_times: np.ndarray       # (R+1, N)
    deltas: np.ndarray          # per-site row step
    action: float
    residual: float

    @property
    def n_rows(self) -> int:
        return self.z.shape[0] - 1


def _condition_estimate(matrix):
    matrix = matrix.tocsc()
    try:
        lu = spla.splu(matrix)
    except RuntimeError as exc:
        raise SingularBVP(f"boundary problem factorization failed: {exc}") from exc
    inv_op = spla.LinearOperator(matrix.shape, matvec=lu.solve, rmatvec=lu.solve)
    try:
        est = spla.onenormest(matrix) * spla.onenormest(inv_op)
    except (RuntimeError, ValueError) as exc:
        raise SingularBVP(f"condition estimate failed: {exc}") from exc
    return float(est), lu


def _check_condition(matrix):
    est, lu = _condition_estimate(matrix)
    if est > COND_LIMIT:
        raise SingularBVP(f"condition estimate {est:.3e} exceeds {COND_LIMIT:.0e}")
    return lu


def solve_extremal(bd: BoundaryData, lagr: LagrangianSpec, dt_c: float) -> ExtremalSolution:
    """Stationary point of the discrete action between the two surfaces.

    Quadratic potentials reduce to one sparse solve with iterative
    refinement; higher-degree potentials run a damped Newton iteration from
    the straight-line interpolant.  Near-singular two-time problems (the
    resonances of the oscillator family) raise SingularBVP instead of
    returning garbage.
    """
    if dt_c <= 0:
        raise ValueError("dt_c must be positive")
    spans = np.asarray(bd.t1) - np.asarray(bd.t0)
    n_rows = int(round(float(spans.mean()) / dt_c))
    if n_rows < 3:
        raise ValueError("domain must contain at least two interior rows")
    grid = _ActionGrid(bd, lagr, n_rows)
    mask = grid.interior_mask()
    quadratic = len(lagr.potential) <= 3

    z = grid.boundary_fill() if quadratic else grid.interpolant()
    z_flat = z.ravel()
    if quadratic:
        h_full = grid.hessian(z_flat)
        a_ii = h_full[mask][:, mask]
        lu = _check_condition(a_ii)
        rhs = -grid.gradient(z_flat)[mask]
        sol = lu.solve(rhs)
        sol += lu.solve(rhs - a_ii @ sol)      # one refinement pass
        z_flat = z_flat.copy()
        z_flat[mask] += sol
    else:
        z_flat = z_flat.copy()
        grad = grid.gradient(z_flat)[mask]
        best = np.max(np.abs(grad))
        for _ in range(NEWTON_MAXITER):
            if best <= NEWTON_TOL:
                break
            h_full = grid.hessian(z_flat)
            a_ii = h_full[mask][:, mask]
            lu = _check_condition(a_ii)
            step = lu.solve(-grad)
            scale = 1.0
            for _ in range(12):
                trial = z_flat.copy()
                trial[mask] += scale * step
                trial_grad = grid.gradient(trial)[mask]
                trial_norm = np.max(np.abs(trial_grad))
                if trial_norm < best:
                    z_flat, grad, best = trial, trial_grad, trial_norm
                    break
                scale *= 0.5
            else:
                raise NewtonDivergence(f"line search stalled at residual {best:.3e}")
        else:
            raise NewtonDivergence(f"no convergence after {NEWTON_MAXITER} iterations "
                                   f"(residual {best:.3e})")
        _check_condition(grid.hessian(z_flat)[mask][:, mask])

    residual = float(np.max(np.abs(grid.gradient(z_flat)[mask])))
    z_final = z_flat.reshape(n_rows + 1, bd.n_sites)
    return ExtremalSolution(bd, z_final, grid.row_times, grid.delta,
                            grid.action(z_final), residual)


@dataclass
class BoundarySideMomenta:
    p: np.ndarray          # momentum density per site
    energy: np.ndarray     # time component of the boundary density (Hj0)
    flux: np.ndarray       # spatial flux component (Hj1)
    tangential: np.ndarray  # p*zs - energy*v - flux, an algebraic identity check


@dataclass
class BoundaryMomenta:
    initial: BoundarySideMomenta
    final: BoundarySideMomenta


def _link_momenta(lagr: LagrangianSpec, zb, zdot, zs, v):
    """Momentum, energy and flux densities from one link's (zs, v) pair."""
    zx = zs - zdot * v
    f_val = lagr.evaluate(zb, zdot, zx)
    f_zdot = 2.0 * lagr.kinetic_coeff * zdot + lagr.kinetic_linear
    f_zx = 2.0 * lagr.gradient_coeff * zx
    p = f_zdot - f_zx * v
    energy = (f_zdot * zdot - f_val) - f_zx * zdot * v
    flux = f_zdot * zx - (f_zx * zx - f_val) * v
    tangential = p * zs - energy * v - flux
    return p, energy, flux, tangential


def _side_momenta(sol: ExtremalSolution, lagr: LagrangianSpec, final: bool) -> BoundarySideMomenta:
    """Boundary densities as the mean of the two adjacent-link evaluations.

    The discrete action assigns each link half its energy to either end (the
    link-symmetric measure), so the per-site conjugate densities are averages
    of per-link formulas sharing the site's one-sided time derivative.  The
    tangential combination vanishes identically link by link, hence also
    after averaging.
    """
    z = sol.z
    delta = sol.deltas
    a = sol.bd.spacing
    if final:
        zb = z[-1]
        zdot = (3.0 * z[-1] - 4.0 * z[-2] + z[-3]) / (2.0 * delta)
        times = np.asarray(sol.bd.t1)
    else:
        zb = z[0]
        zdot = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * delta)
        times = np.asarray(sol.bd.t0)
    if sol.bd.n_sites > 1:
        v_right = (np.roll(times, -1) - times) / a
        v_left = np.roll(v_right, 1)
        zs_right = (np.roll(zb, -1) - zb) / a
        zs_left = np.roll(zs_right, 1)
    else:
        v_right = v_left = np.zeros(1)
        zs_right = zs_left = np.zeros(1)
    left = _link_momenta(lagr, zb, zdot, zs_left, v_left)
    right = _link_momenta(lagr, zb, zdot, zs_right, v_right)
    p, energy, flux, tangential = (0.5 * (l + r) for l, r in zip(left, right))
    return BoundarySideMomenta(p, energy, flux, tangential)


def boundary_momenta(sol: ExtremalSolution, lagr: LagrangianSpec) -> BoundaryMomenta:
    """One-sided O(dt^2) boundary kinematics on both surfaces."""
    return BoundaryMomenta(
        initial=_side_momenta(sol, lagr, final=False),
        final=_side_momenta(sol, lagr, final=True),
    )


def _rel_err(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-10)


def hj_residuals(bd: BoundaryData, lagr: LagrangianSpec, dt_c: float,
                 fd_epsilon: float = 1e-4) -> dict:
    """Finite-difference boundary variations of S against the momentum formulas.

    Checks, per final-surface site: dS/dz vs a*p and dS/dt vs -a*energy
    (central differences, re-solving the boundary problem), the
    Hamilton-Jacobi residual dS/dt/a + H(z, zs, dS/dz/a; v) with the fitted
    derivatives, and the tangential identity on both surfaces.  Initial-
    surface variations carry the opposite orientation sign.
    """
    base = solve_extremal(bd, lagr, dt_c)
    momenta = boundary_momenta(base, lagr)
    density = legendre_transform(lagr)
    a = bd.spacing
    n = bd.n_sites
    eps = fd_epsilon

    z1 = np.asarray(bd.z1)
    t1 = np.asarray(bd.t1)
    if n > 1:
        v1_right = (np.roll(t1, -1) - t1) / a
        v1_left = np.roll(v1_right, 1)
        zs1_right = (np.roll(z1, -1) - z1) / a
        zs1_left = np.roll(zs1_right, 1)
    else:
        v1_right = v1_left = np.zeros(1)
        zs1_right = zs1_left = np.zeros(1)

    dsdz_rel = np.empty(n)
    dsdt_rel = np.empty(n)
    eq10_resid = np.empty(n)
    dsdz0_rel = np.empty(n)
    for j in range(n):
        s_up = solve_extremal(bd.replace_z1(j, z1[j] + eps), lagr, dt_c).action
        s_dn = solve_extremal(bd.replace_z1(j, z1[j] - eps), lagr, dt_c).action
        fd_z = (s_up - s_dn) / (2.0 * eps)
        dsdz_rel[j] = _rel_err(fd_z, a * momenta.final.p[j])

        tp = solve_extremal(bd.replace_t1(j, t1[j] + eps), lagr, dt_c).action
        tm = solve_extremal(bd.replace_t1(j, t1[j] - eps), lagr, dt_c).action
        fd_t = (tp - tm) / (2.0 * eps)
        dsdt_rel[j] = _rel_err(fd_t, -a * momenta.final.energy[j])

        # the density at a site is the mean of its two adjacent-link values,
        # matching the link-symmetric energy split of the discrete action
        h_links = 0.5 * (float(density.evaluate(z1[j], zs1_left[j], fd_z / a, v1_left[j]))
                         + float(density.evaluate(z1[j], zs1_right[j], fd_z / a, v1_right[j])))
        eq10_resid[j] = abs(fd_t / a + h_links)

        z0j = bd.z0[j]
        s0p = solve_extremal(bd.replace_z0(j, z0j + eps), lagr, dt_c).action
        s0m = solve_extremal(bd.replace_z0(j, z0j - eps), lagr, dt_c).action
        fd_z0 = (s0p - s0m) / (2.0 * eps)
        dsdz0_rel[j] = _rel_err(fd_z0, -a * momenta.initial.p[j])

    return {
        "action": base.action,
        "residual": base.residual,
        "dSdz_final_rel": dsdz_rel,
        "dSdt_final_rel": dsdt_rel,
        "dSdz_initial_rel": dsdz0_rel,
        "hj_resid": eq10_resid,
        "tangential_final": np.abs(momenta.final.tangential),
        "tangential_initial": np.abs(momenta.initial.tangential),
        "p_final": momenta.final.p,
        "energy_final": momenta.final.energy,
        "fd_epsilon": eps,
        "dt_c": dt_c,
    }


def reparameterization_check(bd: BoundaryData, lagr: LagrangianSpec, dt_c: float) -> dict:
    """Action invariance under exact lattice relabelings plus a row refinement.

    Cyclic and reflected site orders are exact symmetries of the periodic
    lattice (reflection needs the zx-even densities this grammar produces);
    the refinement ratio quantifies the O(dt^2) discretization movement.
    """
    s_base = solve_extremal(bd, lagr, dt_c).action
    s_cyclic = solve_extremal(bd.relabeled(1), lagr, dt_c).action
    s_parity = solve_extremal(bd.reflected(), lagr, dt_c).action
    s_shift = solve_extremal(bd.shifted(0.37), lagr, dt_c).action
    s_half = solve_extremal(bd, lagr, dt_c / 2.0).action
    s_quarter = solve_extremal(bd, lagr, dt_c / 4.0).action
    diff_1 = s_base - s_half
    diff_2 = s_half - s_quarter
    ratio = diff_1 / diff_2 if diff_2 != 0.0 else float("inf")
    return {
        "action": s_base,
        "cyclic_diff": abs(s_cyclic - s_base),
        "parity_diff": abs(s_parity - s_base),
        "time_shift_diff": abs(s_shift - s_base),
        "refinement_actions": [s_base, s_half, s_quarter],
        "refinement_ratio": ratio,
        "dt_c": dt_c,
    }
