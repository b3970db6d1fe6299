"""Constructive path integral: brute-force history sums and transfer operators.

The amplitude at a final field configuration is the sum over all grid-valued
field histories of measure * exp(i S / h) * psi0(initial slice), with the
discrete action S built from forward differences.  The same sum factorizes
into iterated one-step transfer operators; that identity is exact for any
kernel and is the module's central test.

Two kinetic kernels are provided: ``fresnel_exact`` is the one-step
propagator of the compiled lattice kinetic operator (making the transfer
step equal one Trotter step of the kinetic/diagonal split exactly), and
``lagrangian_riemann`` is the literal Riemann-sum reading with the Gaussian
kinetic phase taken from the discrete action itself, normalized per site and
step by sqrt(2 c2 a / (2 pi i h dt)).  The two agree as the field grid is
refined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge, ShapeMismatch
from .evolve import ExactPropagator
from .lagrangian import LagrangianSpec, legendre_transform
from .lattice import LatticeConfig, WaveFunctional, norm
from .operators import compile_hamiltonian, momentum_grids
from .surface import fit_order

ENUMERATION_GUARD = 2 ** 22

KERNELS = ("fresnel_exact", "lagrangian_riemann")


@dataclass(frozen=True)
class PathIntegralSpec:
    """Slice layout: t_steps intermediate slices, so t_steps + 1 kernel steps."""

    t_steps: int
    dt: float
    kernel: str = "fresnel_exact"

    def __post_init__(self):
        if self.t_steps < 0:
            raise ValueError("t_steps must be nonnegative")
        if self.dt < 0:
            raise ValueError("dt must be nonnegative")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")

    @property
    def total_time(self) -> float:
        return (self.t_steps + 1) * self.dt


def discrete_action(history: np.ndarray, pspec: PathIntegralSpec,
                    lagr: LagrangianSpec, cfg: LatticeConfig) -> float:
    """S = sum_t sum_j dt * a * F(z_j^t, forward dz/dt, forward dz/dx).

    ``history`` holds t_steps + 2 slices including both boundary slices.
    """
    history = np.asarray(history, dtype=float)
    expected = (pspec.t_steps + 2, cfg.n_sites)
    if history.shape != expected:
        raise ShapeMismatch(f"history shape {history.shape}, expected {expected}")
    earlier = history[:-1]
    zdot = (history[1:] - earlier) / pspec.dt
    zx = (np.roll(earlier, -1, axis=1) - earlier) / cfg.spacing
    f_vals = lagr.evaluate(earlier, zdot, zx)
    return float(pspec.dt * cfg.spacing * f_vals.sum())


def one_site_kinetic_matrix(pspec: PathIntegralSpec, lagr: LagrangianSpec,
                            cfg: LatticeConfig) -> np.ndarray:
    """(Q, Q) one-step kinetic kernel including the quadrature weight."""
    q = cfg.q_points
    a, h, dt = cfg.spacing, cfg.hbar, pspec.dt
    c2, c1 = lagr.kinetic_coeff, lagr.kinetic_linear
    if pspec.kernel == "fresnel_exact":
        k2, k1 = momentum_grids(cfg)
        h_over_a = h / a
        mult = a * (h_over_a ** 2 * k2 - 2.0 * c1 * h_over_a * k1 + c1 ** 2) / (4.0 * c2)
        phase = np.exp(-1j * dt * mult / h)
        return np.fft.ifft(phase[:, None] * np.fft.fft(np.eye(q), axis=0), axis=0)
    if dt == 0.0:
        raise ValueError("the lagrangian_riemann kernel needs dt > 0")
    zg = cfg.z_values()
    delta = zg[:, None] - zg[None, :]
    amp = cfg.dz * np.sqrt(c2 * a / (np.pi * h * dt)) * np.exp(-0.25j * np.pi)
    return amp * np.exp(1j * a * (c2 * delta ** 2 / dt + c1 * delta) / h)


def _diagonal_action_phase(pspec: PathIntegralSpec, lagr: LagrangianSpec,
                           cfg: LatticeConfig) -> np.ndarray:
    """exp(i dt a sum_j (g zs_j^2 - V(z_j)) / h) over the grid."""
    n, q, a = cfg.n_sites, cfg.q_points, cfg.spacing
    zg = cfg.z_values()
    total = np.zeros(cfg.shape)
    for j in range(n):
        shape_j = [1] * n
        shape_j[j] = q
        zj = zg.reshape(shape_j)
        if n == 1:
            zs = np.zeros_like(zj)
        else:
            neighbor = (j + 1) % n
            shape_k = [1] * n
            shape_k[neighbor] = q
            zs = (zg.reshape(shape_k) - zj) / a
        total = total + lagr.gradient_coeff * zs ** 2 - lagr.potential_value(zj)
    return np.exp(1j * pspec.dt * a * total / cfg.hbar)


class TransferOperator:
    """One time-step map: diagonal action phase then the kinetic kernel per site."""

    def __init__(self, pspec: PathIntegralSpec, lagr: LagrangianSpec, cfg: LatticeConfig):
        self.pspec = pspec
        self.lagr = lagr
        self.cfg = cfg
        self.kinetic = one_site_kinetic_matrix(pspec, lagr, cfg)
        self.diag_phase = _diagonal_action_phase(pspec, lagr, cfg)

    def step(self, psi: np.ndarray) -> np.ndarray:
        out = self.diag_phase * psi
        for j in range(self.cfg.n_sites):
            out = np.moveaxis(np.tensordot(self.kinetic, out, axes=([1], [j])), 0, j)
        return out

    def evolve(self, state: WaveFunctional) -> WaveFunctional:
        psi = state.psi
        for _ in range(self.pspec.t_steps + 1):
            psi = self.step(psi)
        return WaveFunctional(self.cfg, psi)


def _check_enumerable(pspec: PathIntegralSpec, cfg: LatticeConfig):
    count = cfg.q_points ** (cfg.n_sites * (pspec.t_steps + 1))
    if count > ENUMERATION_GUARD:
        raise EnumerationTooLarge(
            f"{count} histories exceed the enumeration guard {ENUMERATION_GUARD}")


def brute_force_amplitudes(state: WaveFunctional, pspec: PathIntegralSpec,
                           lagr: LagrangianSpec) -> np.ndarray:
    """Literal history sum for every final configuration (the exact oracle).

    Free slices are the initial slice (weighted by psi0, summed over) and the
    t_steps intermediates; the final slice indexes the output array.
    """
    cfg = state.cfg
    _check_enumerable(pspec, cfg)
    n, q = cfg.n_sites, cfg.q_points
    zg = cfg.z_values()
    n_free = pspec.t_steps + 1
    out = np.zeros(cfg.shape, dtype=np.complex128)
    riemann = pspec.kernel == "lagrangian_riemann"
    if riemann:
        c2 = lagr.kinetic_coeff
        nu_dz = cfg.dz * np.sqrt(c2 * cfg.spacing / (np.pi * cfg.hbar * pspec.dt)) \
            * np.exp(-0.25j * np.pi)
        measure = nu_dz ** (n * n_free)
    else:
        kin = one_site_kinetic_matrix(pspec, lagr, cfg)
        diag_phase = _diagonal_action_phase(pspec, lagr, cfg)

    site_range = range(q)
    for final_idx in itertools.product(site_range, repeat=n):
        total = 0.0 + 0.0j
        for flat_hist in itertools.product(site_range, repeat=n * n_free):
            idx = np.asarray(flat_hist, dtype=int).reshape(n_free, n)
            first = tuple(idx[0])
            if riemann:
                history = np.vstack([zg[idx], zg[np.asarray(final_idx)][None, :]])
                s_val = discrete_action(history, pspec, lagr, cfg)
                total += measure * np.exp(1j * s_val / cfg.hbar) * state.psi[first]
            else:
                factor = state.psi[first]
                for t in range(n_free):
                    factor *= diag_phase[tuple(idx[t])]
                    nxt = idx[t + 1] if t + 1 < n_free else np.asarray(final_idx)
                    for j in range(n):
                        factor *= kin[nxt[j], idx[t, j]]
                total += factor
        out[final_idx] = total
    return out


def brute_force_feynman(state: WaveFunctional, z_final, pspec: PathIntegralSpec,
                        lagr: LagrangianSpec) -> complex:
    """Amplitude at one final configuration (values must lie on the grid)."""
    cfg = state.cfg
    zg = cfg.z_values()
    z_final = np.asarray(z_final, dtype=float)
    if z_final.shape != (cfg.n_sites,):
        raise ShapeMismatch(f"z_final shape {z_final.shape}, expected ({cfg.n_sites},)")
    idx = []
    for value in z_final:
        m = int(np.argmin(np.abs(zg - value)))
        if abs(zg[m] - value) > 1e-9:
            raise ValueError(f"final value {value} is not a grid point")
        idx.append(m)
    return complex(brute_force_amplitudes(state, pspec, lagr)[tuple(idx)])


def feynman_vs_schrodinger(state: WaveFunctional, pspec: PathIntegralSpec,
                           lagr: LagrangianSpec, levels: int = 3) -> dict:
    """Transfer-operator evolution against the exact exponential, dt refined.

    Total time is held fixed while dt halves per level; the report carries L2
    distances and the fitted order in dt.
    """
    cfg = state.cfg
    total_time = pspec.total_time
    if total_time == 0.0:
        return {
            "dt_values": [0.0] * levels,
            "distances": [0.0] * levels,
            "fitted_order": 0.0,
            "kernel": pspec.kernel,
            "total_time": 0.0,
        }
    density = legendre_transform(lagr)
    exact = ExactPropagator(compile_hamiltonian(density, cfg)).propagate(state, total_time)
    dt_values, distances = [], []
    for level in range(levels):
        steps = (pspec.t_steps + 1) * 2 ** level
        dt = total_time / steps
        level_spec = PathIntegralSpec(steps - 1, dt, pspec.kernel)
        evolved = TransferOperator(level_spec, lagr, cfg).evolve(state)
        diff = WaveFunctional(cfg, evolved.psi - exact.psi)
        dt_values.append(dt)
        distances.append(norm(diff))
    return {
        "dt_values": dt_values,
        "distances": distances,
        "fitted_order": fit_order(dt_values, distances),
        "kernel": pspec.kernel,
        "total_time": total_time,
    }
