"""Compile Hamiltonian densities into matrix-free lattice operators.

Discretization dictionary: the functional derivative becomes (1/a) d/dz_j,
the spatial derivative the forward link difference (z_{j+1} - z_j)/a with
periodic wrap, and the spatial integral a * sum_j.  Site momenta are
p_j = -i h (1/a) d/dz_j, realized spectrally on the per-site field grid
(3-point stencils as the ``fd`` fallback).  Operators are substituted into
the classical polynomial as written; the only factors that fail to commute
are the slope-induced products of p_j with the link difference at site j,
which are symmetrized as (A B + B A) / 2 to keep the operator Hermitian.
The p^2 coefficient depends on the slope alone, so no other monomial ever
needs an ordering rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge, NotSpacelike, UnsupportedOrdering
from .lagrangian import HamiltonianDensity
from .lattice import LatticeConfig, WaveFunctional

DENSE_GUARD = 4096


def momentum_grids(cfg: LatticeConfig):
    """(k^2 multiplier, first-derivative k multiplier) for one grid axis.

    Spectral mode returns wavenumbers (Nyquist zeroed for the first
    derivative); fd mode returns the exact DFT multipliers of the periodic
    3-point stencils, so both modes are diagonal in the Fourier basis.
    """
    q, dz = cfg.q_points, cfg.dz
    if cfg.derivative == "spectral":
        k = 2.0 * np.pi * np.fft.fftfreq(q, d=dz)
        k2 = k ** 2
        k1 = k.copy()
        if q % 2 == 0:
            k1[q // 2] = 0.0
    else:
        m = np.arange(q)
        k2 = (2.0 - 2.0 * np.cos(2.0 * np.pi * m / q)) / dz ** 2
        k1 = np.sin(2.0 * np.pi * m / q) / dz
    return k2, k1


@dataclass
class _SiteTerm:
    site: int
    neighbor: int
    quad: float                      # coefficient of p_site^2
    lin_const: float                 # field-independent coefficient of p_site
    cross: np.ndarray | None = None  # (Q, Q) field-dependent p coefficient, axis-ordered


@dataclass
class LatticeHamiltonian:
    """Hermitian matrix-free operator: a real diagonal plus per-site momentum terms."""

    cfg: LatticeConfig
    diag: np.ndarray
    terms: list[_SiteTerm] = field(default_factory=list)

    @property
    def separable(self) -> bool:
        """True when the operator splits into a k-diagonal plus a z-diagonal part."""
        return all(t.cross is None for t in self.terms)

    def _momentum_apply(self, psi, j, multiplier):
        shape = [1] * self.cfg.n_sites
        shape[j] = self.cfg.q_points
        return np.fft.ifft(np.fft.fft(psi, axis=j) * multiplier.reshape(shape), axis=j)

    def _cross_view(self, term):
        """Reshape the stored (Q, Q) array onto the pair of state axes."""
        n, q = self.cfg.n_sites, self.cfg.q_points
        shape = [1] * n
        shape[term.site] = q
        shape[term.neighbor] = q
        return term.cross.reshape(shape)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        k2, k1 = momentum_grids(cfg)
        h_over_a = cfg.hbar / cfg.spacing
        out = self.diag * psi
        for term in self.terms:
            mult = term.quad * (h_over_a ** 2) * k2 + term.lin_const * h_over_a * k1
            if term.quad or term.lin_const:
                out = out + self._momentum_apply(psi, term.site, mult)
            if term.cross is not None:
                f = self._cross_view(term)
                p_psi = self._momentum_apply(psi, term.site, h_over_a * k1)
                out = out + 0.5 * (f * p_psi + self._momentum_apply(f * psi, term.site, h_over_a * k1))
        return out

    def __call__(self, state: WaveFunctional) -> WaveFunctional:
        return WaveFunctional(self.cfg, self.apply(state.psi))

    def expectation(self, state: WaveFunctional) -> float:
        num = np.vdot(state.psi, self.apply(state.psi))
        den = np.vdot(state.psi, state.psi)
        return float((num / den).real)

    def kinetic_multiplier(self) -> np.ndarray:
        """Fourier multiplier of the momentum part; requires separability."""
        cfg = self.cfg
        k2, k1 = momentum_grids(cfg)
        h_over_a = cfg.hbar / cfg.spacing
        mult = np.zeros(cfg.shape)
        for term in self.terms:
            if term.cross is not None:
                raise UnsupportedOrdering("cross terms have no global Fourier multiplier")
            shape = [1] * cfg.n_sites
            shape[term.site] = cfg.q_points
            mult = mult + (term.quad * (h_over_a ** 2) * k2
                           + term.lin_const * h_over_a * k1).reshape(shape)
        return mult

    def dense_matrix(self) -> np.ndarray:
        dim = self.cfg.dim
        if dim > DENSE_GUARD:
            raise DimensionTooLarge(f"dimension {dim} exceeds dense guard {DENSE_GUARD}")
        mat = np.empty((dim, dim), dtype=np.complex128)
        basis = np.zeros(self.cfg.shape, dtype=np.complex128)
        flat = basis.ravel()
        for i in range(dim):
            flat[i] = 1.0
            mat[:, i] = self.apply(basis).ravel()
            flat[i] = 0.0
        return mat


def site_slopes_from_links(v_links: np.ndarray) -> np.ndarray:
    """Per-site slope = mean of the two adjacent link slopes."""
    return 0.5 * (np.roll(v_links, 1) + v_links)


def _build_site(density: HamiltonianDensity, cfg: LatticeConfig, j: int,
                v_site: float, diag_out: np.ndarray, terms_out: list,
                symmetrize_cross: bool):
    n, q, a = cfg.n_sites, cfg.q_points, cfg.spacing
    zg = cfg.z_values()
    neighbor = (j + 1) % n
    shape_j = [1] * n
    shape_j[j] = q
    zj = zg.reshape(shape_j)
    if n == 1:
        zs = np.zeros_like(zj)
    else:
        shape_k = [1] * n
        shape_k[neighbor] = q
        zs = (zg.reshape(shape_k) - zj) / a

    diag_out += a * density.scalar_part(v_site, zj, zs)
    if not density.has_momentum:
        return
    quad = float(a * density.p_quad_coeff(v_site))
    lin_const = float(a * density.p_lin_coeff(v_site, 0.0))
    cross_arr = None
    if n > 1:
        varying = np.asarray(a * density.p_lin_coeff(v_site, zs) - lin_const)
        if np.any(varying):
            if not symmetrize_cross:
                raise UnsupportedOrdering(
                    f"p_{j} multiplies a field expression containing z_{j} "
                    "and symmetrization is disabled"
                )
            # squeeze to (Q, Q) in axis order; _cross_view reshapes with the
            # same ordering so the indices line up for any (j, neighbor) pair
            cross_arr = np.ascontiguousarray(varying.reshape(q, q))
    terms_out.append(_SiteTerm(j, neighbor, quad, lin_const, cross_arr))


def compile_hamiltonian(density: HamiltonianDensity, cfg: LatticeConfig,
                        v_links: np.ndarray | float | None = None,
                        sites: list[int] | None = None,
                        symmetrize_cross: bool = True) -> LatticeHamiltonian:
    """Assemble a * sum_j H(z_j, zs_j, p_j; v_j) as a matrix-free operator.

    ``v_links[j]`` is the slope of the link from site j to j+1 (scalar or
    None mean a uniform/flat surface); the density at site j uses the mean of
    its two adjacent link slopes.  ``sites`` restricts the sum to a subset,
    which is how the single-site local densities of surface deformations are
    built.
    """
    n = cfg.n_sites
    if v_links is None:
        v_arr = np.zeros(n)
    else:
        v_arr = np.broadcast_to(np.asarray(v_links, dtype=float), (n,)).astype(float)
    if np.any(np.abs(v_arr) >= 1.0):
        raise NotSpacelike(f"link slopes {v_arr} violate |v| < 1")
    v_sites = site_slopes_from_links(v_arr)

    diag = np.zeros(cfg.shape)
    terms: list[_SiteTerm] = []
    for j in sites if sites is not None else range(n):
        _build_site(density, cfg, j, float(v_sites[j]), diag, terms, symmetrize_cross)
    return LatticeHamiltonian(cfg, diag, terms)
