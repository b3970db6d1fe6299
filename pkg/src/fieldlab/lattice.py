"""Lattice discretization, wavefunctional storage, and Gaussian initial data.

A state is a complex array over the Q^N grid of field values, one axis per
site, with the quadrature measure dz^N.  Gaussians follow the convention
``psi ~ exp(-1/2 (z-mu)^T C^{-1} (z-mu))`` so the probability covariance is
C/2 and a single-oscillator ground state has C = h/omega.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigMismatch,
    GridUnresolved,
    MasslessZeroMode,
    NonPositiveCovariance,
)

MEMORY_GUARD = 2 ** 24


@dataclass(frozen=True)
class LatticeConfig:
    """Sites, per-site field grid, and the Planck constant for the operators."""

    n_sites: int
    spacing: float = 1.0
    q_points: int = 32
    q_extent: float = 10.0
    hbar: float = 1.0
    derivative: str = "spectral"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        q = self.q_points
        if q < 4 or q > 128 or (q & (q - 1)) != 0:
            raise ValueError(f"q_points must be a power of two in [4, 128], got {q}")
        if q ** self.n_sites > MEMORY_GUARD:
            raise ValueError(f"Q^N = {q ** self.n_sites} exceeds the memory guard {MEMORY_GUARD}")
        for name in ("spacing", "q_extent", "hbar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.derivative not in ("spectral", "fd"):
            raise ValueError(f"derivative must be 'spectral' or 'fd', got {self.derivative!r}")

    @property
    def dz(self) -> float:
        return self.q_extent / self.q_points

    @property
    def dim(self) -> int:
        return self.q_points ** self.n_sites

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.q_points,) * self.n_sites

    def z_values(self) -> np.ndarray:
        return -0.5 * self.q_extent + self.dz * np.arange(self.q_points)


@dataclass
class WaveFunctional:
    """Complex amplitudes over the field grid, row-major over sites."""

    cfg: LatticeConfig
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.ascontiguousarray(self.psi, dtype=np.complex128).reshape(self.cfg.shape)

    def copy(self) -> "WaveFunctional":
        return WaveFunctional(self.cfg, self.psi.copy())


def _check_cfg(a: WaveFunctional, b: WaveFunctional):
    if a.cfg != b.cfg:
        raise ConfigMismatch(f"{a.cfg} vs {b.cfg}")


def inner(a: WaveFunctional, b: WaveFunctional) -> complex:
    """Sesquilinear <a|b> with the dz^N measure (conjugates the first slot)."""
    _check_cfg(a, b)
    return complex(a.cfg.dz ** a.cfg.n_sites * np.vdot(a.psi, b.psi))


def norm(a: WaveFunctional) -> float:
    return float(np.sqrt(inner(a, a).real))


def normalize(a: WaveFunctional) -> WaveFunctional:
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize the zero state")
    return WaveFunctional(a.cfg, a.psi / n)


@dataclass(frozen=True)
class GaussianStateSpec:
    """Per-site centers plus either per-site widths or a full width matrix.

    ``widths`` gives the product state exp(-sum (z_j-mu_j)^2 / (2 s_j^2));
    ``covariance`` is the matrix C in exp(-1/2 (z-mu)^T C^{-1} (z-mu)).
    """

    centers: tuple[float, ...]
    widths: tuple[float, ...] | None = None
    covariance: tuple[tuple[float, ...], ...] | None = None
    phase: float = 0.0

    def __post_init__(self):
        if (self.widths is None) == (self.covariance is None):
            raise ValueError("exactly one of widths / covariance must be given")

    def matrix(self) -> np.ndarray:
        if self.widths is not None:
            return np.diag(np.asarray(self.widths, dtype=float) ** 2)
        return np.asarray(self.covariance, dtype=float)


def free_ground_state_covariance(cfg: LatticeConfig, mass: float) -> GaussianStateSpec:
    """Ground-state covariance of the free field from the lattice dispersion.

    Mode frequencies are omega_k = sqrt(mass^2 + (4/a^2) sin^2(pi k / N)); the
    state is exp(-(a/2h) z^T Omega z) with Omega the matrix square root of the
    coupling, i.e. C = (h/a) Omega^{-1}.
    """
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    if mass == 0.0:
        raise MasslessZeroMode("zero-momentum mode has omega = 0 at zero mass")
    n, a = cfg.n_sites, cfg.spacing
    coupling = mass ** 2 * np.eye(n)
    if n > 1:
        shift = np.roll(np.eye(n), 1, axis=1)
        coupling = coupling + (2.0 * np.eye(n) - shift - shift.T) / a ** 2
    w2, vecs = np.linalg.eigh(coupling)
    omega = np.sqrt(np.maximum(w2, 0.0))
    cov = (cfg.hbar / a) * (vecs / omega) @ vecs.T
    return GaussianStateSpec(
        centers=(0.0,) * n,
        covariance=tuple(tuple(row) for row in cov),
    )


def mode_frequencies(cfg: LatticeConfig, mass: float) -> np.ndarray:
    """omega_k = sqrt(mass^2 + (4/a^2) sin^2(pi k / N)), k = 0..N-1."""
    k = np.arange(cfg.n_sites)
    return np.sqrt(mass ** 2 + (4.0 / cfg.spacing ** 2) * np.sin(np.pi * k / cfg.n_sites) ** 2)


def init_wavefunctional(spec: GaussianStateSpec, cfg: LatticeConfig) -> WaveFunctional:
    """Sample the Gaussian on the grid and normalize.

    Hard error when the narrowest principal width falls under one grid cell;
    warnings when widths are under 2 dz or above q_extent/6 (wrap-around risk).
    """
    n = cfg.n_sites
    mu = np.asarray(spec.centers, dtype=float)
    if mu.shape != (n,):
        raise ValueError(f"centers must have length {n}")
    cov = spec.matrix()
    if cov.shape != (n, n):
        raise ValueError(f"covariance must be {n}x{n}")
    eigs = np.linalg.eigvalsh(cov)
    if eigs[0] <= 0.0:
        raise NonPositiveCovariance(f"covariance eigenvalues {eigs}")
    sigma_min, sigma_max = np.sqrt(eigs[0]), np.sqrt(eigs[-1])
    if sigma_min < cfg.dz:
        raise GridUnresolved(f"width {sigma_min:.3g} below one grid cell {cfg.dz:.3g}")
    if sigma_min < 2.0 * cfg.dz:
        warnings.warn(f"width {sigma_min:.3g} under 2 dz; grid barely resolves the state")
    if sigma_max > cfg.q_extent / 6.0:
        warnings.warn(f"width {sigma_max:.3g} above q_extent/6; wrap-around error may be visible")

    prec = np.linalg.inv(cov)
    zg = cfg.z_values()
    quad = np.zeros(cfg.shape)
    deltas = []
    for j in range(n):
        shape = [1] * n
        shape[j] = cfg.q_points
        deltas.append((zg - mu[j]).reshape(shape))
    for j in range(n):
        quad = quad + prec[j, j] * deltas[j] ** 2
        for k in range(j + 1, n):
            quad = quad + 2.0 * prec[j, k] * deltas[j] * deltas[k]
    psi = np.exp(-0.5 * quad + 1j * spec.phase)
    return normalize(WaveFunctional(cfg, psi))


# --- state serialization -------------------------------------------------

_HEADER = struct.Struct("<qdqdd")  # n_sites, spacing, q_points, q_extent, hbar


def save_state(state: WaveFunctional, path) -> None:
    """Binary snapshot: little-endian header then Q^N (re, im) float64 pairs."""
    cfg = state.cfg
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(cfg.n_sites, cfg.spacing, cfg.q_points, cfg.q_extent, cfg.hbar))
        fh.write(np.ascontiguousarray(state.psi, dtype="<c16").tobytes())


def load_state(path, derivative: str = "spectral") -> WaveFunctional:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        n, a, q, lq, h = _HEADER.unpack(header)
        cfg = LatticeConfig(n, a, q, lq, h, derivative)
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != cfg.dim:
        raise ValueError(f"expected {cfg.dim} amplitudes, found {data.size}")
    return WaveFunctional(cfg, data.copy())


def state_to_csv(state: WaveFunctional, path, meta_line: str | None = None) -> None:
    """Flat CSV export (index, re, im); intended for small states."""
    flat = state.psi.ravel()
    with open(path, "w") as fh:
        if meta_line:
            fh.write(f"# {meta_line}\n")
        fh.write("index,re,im\n")
        for i, amp in enumerate(flat):
            fh.write(f"{i},{amp.real!r},{amp.imag!r}\n")


def site_moments(state: WaveFunctional):
    """(<z_j>, <z_j^2>) arrays with the lattice measure, norm-independent."""
    prob = np.abs(state.psi) ** 2
    total = prob.sum()
    zg = state.cfg.z_values()
    n = state.cfg.n_sites
    z_mean = np.empty(n)
    z2_mean = np.empty(n)
    for j in range(n):
        marginal = prob.sum(axis=tuple(k for k in range(n) if k != j))
        z_mean[j] = (marginal * zg).sum() / total
        z2_mean[j] = (marginal * zg ** 2).sum() / total
    return z_mean, z2_mean


def site_covariance(state: WaveFunctional) -> np.ndarray:
    """<z_j z_k> - <z_j><z_k> matrix over sites."""
    prob = np.abs(state.psi) ** 2
    total = prob.sum()
    zg = state.cfg.z_values()
    n = state.cfg.n_sites
    first = np.empty(n)
    second = np.empty((n, n))
    for j in range(n):
        marginal = prob.sum(axis=tuple(k for k in range(n) if k != j))
        first[j] = (marginal * zg).sum() / total
        second[j, j] = (marginal * zg ** 2).sum() / total
    for j in range(n):
        for k in range(j + 1, n):
            axes = tuple(m for m in range(n) if m not in (j, k))
            marg = prob.sum(axis=axes) if axes else prob
            second[j, k] = second[k, j] = (marg * np.outer(zg, zg)).sum() / total
    return second - np.outer(first, first)
