"""Flat-surface time integration of wavefunctionals.

Three integrators with a ground-truth hierarchy: a dense eigendecomposition
exponential (exact, small dimensions), Strang splitting with the momentum
step applied in the per-site Fourier representation (exact for the spectral
derivative, so splitting is the only error), and a matrix-free
Crank--Nicolson step for operators with cross terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DimensionTooLarge, NonSeparableHamiltonian, SolverDivergence
from .lattice import WaveFunctional, norm as state_norm, site_moments
from .operators import DENSE_GUARD, LatticeHamiltonian


@dataclass
class EvolveParams:
    dt: float
    steps: int
    method: str = "strang"
    cn_tol: float = 1e-10
    cn_maxiter: int = 500

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.method not in ("exact", "strang", "crank_nicolson"):
            raise ValueError(f"unknown method {self.method!r}")


class ExactPropagator:
    """Dense Hermitian eigendecomposition of the compiled operator."""

    def __init__(self, hamiltonian: LatticeHamiltonian):
        if hamiltonian.cfg.dim > DENSE_GUARD:
            raise DimensionTooLarge(
                f"dimension {hamiltonian.cfg.dim} exceeds dense guard {DENSE_GUARD}")
        self.cfg = hamiltonian.cfg
        mat = hamiltonian.dense_matrix()
        self.eigvals, self.eigvecs = np.linalg.eigh(mat)

    def propagate(self, state: WaveFunctional, t: float) -> WaveFunctional:
        coeff = self.eigvecs.conj().T @ state.psi.ravel()
        coeff = coeff * np.exp(-1j * t * self.eigvals / self.cfg.hbar)
        return WaveFunctional(self.cfg, self.eigvecs @ coeff)

    def ground_energy(self) -> float:
        return float(self.eigvals[0])


def evolve_exact(hamiltonian: LatticeHamiltonian, state: WaveFunctional,
                 t: float) -> WaveFunctional:
    """psi(t) = exp(-i t H / h) psi, unitary to roundoff."""
    if t == 0.0:
        return state.copy()
    return ExactPropagator(hamiltonian).propagate(state, t)


def evolve_strang(hamiltonian: LatticeHamiltonian, state: WaveFunctional,
                  params: EvolveParams) -> WaveFunctional:
    """Half diagonal phase, full momentum step in Fourier space, half phase."""
    if not hamiltonian.separable:
        raise NonSeparableHamiltonian("Strang splitting needs a kinetic + diagonal operator")
    cfg = hamiltonian.cfg
    if params.steps == 0:
        return state.copy()
    h = cfg.hbar
    half_phase = np.exp(-0.5j * params.dt * hamiltonian.diag / h)
    kin_phase = np.exp(-1j * params.dt * hamiltonian.kinetic_multiplier() / h)
    psi = state.psi
    for _ in range(params.steps):
        psi = half_phase * psi
        psi = np.fft.ifftn(kin_phase * np.fft.fftn(psi))
        psi = half_phase * psi
    return WaveFunctional(cfg, psi)


def _gmres(op, rhs, x0, tol, maxiter):
    try:
        return spla.gmres(op, rhs, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter)
    except TypeError:  # older scipy spells the relative tolerance 'tol'
        return spla.gmres(op, rhs, x0=x0, tol=tol, atol=0.0, maxiter=maxiter)


def crank_nicolson_step(hamiltonian: LatticeHamiltonian, psi: np.ndarray,
                        dt: float, tol: float, maxiter: int) -> np.ndarray:
    """One Cayley step (1 + i dt H / 2h) psi' = (1 - i dt H / 2h) psi, matrix-free."""
    cfg = hamiltonian.cfg
    alpha = 0.5 * dt / cfg.hbar

    def matvec(x):
        arr = x.reshape(cfg.shape)
        return (arr + 1j * alpha * hamiltonian.apply(arr)).ravel()

    op = spla.LinearOperator((cfg.dim, cfg.dim), matvec=matvec, dtype=np.complex128)
    rhs = (psi - 1j * alpha * hamiltonian.apply(psi)).ravel()
    sol, info = _gmres(op, rhs, psi.ravel(), tol, maxiter)
    if info != 0:
        raise SolverDivergence(f"gmres failed to reach tol {tol} (info={info})")
    return sol.reshape(cfg.shape)


def evolve_crank_nicolson(hamiltonian: LatticeHamiltonian, state: WaveFunctional,
                          params: EvolveParams) -> WaveFunctional:
    psi = state.psi
    for _ in range(params.steps):
        psi = crank_nicolson_step(hamiltonian, psi, params.dt, params.cn_tol, params.cn_maxiter)
    return WaveFunctional(state.cfg, psi.copy())


def evolve(hamiltonian: LatticeHamiltonian, state: WaveFunctional,
           params: EvolveParams) -> WaveFunctional:
    if params.method == "exact":
        return evolve_exact(hamiltonian, state, params.dt * params.steps)
    if params.method == "strang":
        return evolve_strang(hamiltonian, state, params)
    return evolve_crank_nicolson(hamiltonian, state, params)


def observables(state: WaveFunctional,
                hamiltonian: LatticeHamiltonian | None = None) -> dict:
    """norm, per-site <z_j> and <z_j^2>, and <H> when an operator is given."""
    z_mean, z2_mean = site_moments(state)
    record = {
        "norm": state_norm(state),
        "z_mean": z_mean,
        "z2_mean": z2_mean,
    }
    if hamiltonian is not None:
        record["energy"] = hamiltonian.expectation(state)
    return record
