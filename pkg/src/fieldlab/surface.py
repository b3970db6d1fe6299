"""Evolution of wavefunctionals under deformations of a spacelike surface.

A surface is a per-site time graph t_j with periodic link slopes
(t_{j+1} - t_j)/a bounded below the characteristic speed.  Elementary
deformations advance one site's time; the generator is the single-site
density operator a * H_j built with the mean of the adjacent link slopes.
Exact path independence would need commuting densities at distinct sites,
which fails at finite spacing, so same-endpoint schedules are compared under
step refinement instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotSpacelike, ScheduleMismatch
from .evolve import crank_nicolson_step
from .lagrangian import HamiltonianDensity
from .lattice import LatticeConfig, WaveFunctional, norm
from .operators import LatticeHamiltonian, compile_hamiltonian, site_slopes_from_links


@dataclass(frozen=True)
class SpacelikeSurface:
    """Per-site times with the spacelike link-slope bound |v| < 1."""

    times: tuple[float, ...]
    spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if len(self.times) < 1:
            raise ValueError("surface needs at least one site")
        slopes = self.link_slopes()
        if np.any(np.abs(slopes) >= 1.0):
            raise NotSpacelike(f"link slopes {slopes} violate |v| < 1")

    @property
    def n_sites(self) -> int:
        return len(self.times)

    def link_slopes(self) -> np.ndarray:
        t = np.asarray(self.times)
        return (np.roll(t, -1) - t) / self.spacing

    def site_slopes(self) -> np.ndarray:
        return site_slopes_from_links(self.link_slopes())

    def advanced(self, site: int, dt: float) -> "SpacelikeSurface":
        t = list(self.times)
        t[site] += dt
        return SpacelikeSurface(tuple(t), self.spacing)

    def is_flat(self, tol: float = 0.0) -> bool:
        t = np.asarray(self.times)
        return bool(np.max(np.abs(t - t[0])) <= tol)

    @classmethod
    def flat(cls, n_sites: int, t: float = 0.0, spacing: float = 1.0) -> "SpacelikeSurface":
        return cls((t,) * n_sites, spacing)


def surfaces_equal(a: SpacelikeSurface, b: SpacelikeSurface, tol: float = 1e-12) -> bool:
    return (a.n_sites == b.n_sites and a.spacing == b.spacing
            and np.allclose(a.times, b.times, rtol=0.0, atol=tol))


@dataclass(frozen=True)
class DeformationSchedule:
    """Ordered single-site advances; every intermediate surface is validated."""

    start: SpacelikeSurface
    moves: tuple[tuple[int, float], ...]

    def end(self) -> SpacelikeSurface:
        surface = self.start
        for site, dt in self.moves:
            surface = surface.advanced(site, dt)
        return surface

    @classmethod
    def sweep(cls, start: SpacelikeSurface, total_time: float, dt: float,
              direction: str = "left_right") -> "DeformationSchedule":
        """Repeated full sweeps advancing each site by dt until total_time."""
        rounds = total_time / dt
        n_rounds = int(round(rounds))
        if n_rounds < 1 or abs(rounds - n_rounds) > 1e-9:
            raise ValueError(f"total_time {total_time} is not a multiple of dt {dt}")
        if direction == "left_right":
            order = list(range(start.n_sites))
        elif direction == "right_left":
            order = list(range(start.n_sites - 1, -1, -1))
        else:
            raise ValueError(f"unknown direction {direction!r}")
        moves = tuple((j, dt) for _ in range(n_rounds) for j in order)
        return cls(start, moves)


def local_density_operator(density: HamiltonianDensity, cfg: LatticeConfig,
                           surface: SpacelikeSurface, site: int) -> LatticeHamiltonian:
    """The single term a * H_site on the full lattice, slopes from the surface."""
    if surface.n_sites != cfg.n_sites:
        raise ValueError("surface and lattice site counts differ")
    return compile_hamiltonian(density, cfg, surface.link_slopes(), sites=[site])


class SurfaceEvolver:
    """Applies elementary deformations with a chosen integrator.

    ``integrator='exact'`` exponentiates the local density on the pair of
    axes it touches (dense only in Q^2); ``'crank_nicolson'`` takes one
    matrix-free Cayley step per move and scales to larger grids.
    """

    def __init__(self, density: HamiltonianDensity, cfg: LatticeConfig,
                 integrator: str = "crank_nicolson",
                 cn_tol: float = 1e-10, cn_maxiter: int = 500):
        if integrator not in ("exact", "crank_nicolson"):
            raise ValueError(f"unknown integrator {integrator!r}")
        self.density = density
        self.cfg = cfg
        self.integrator = integrator
        self.cn_tol = cn_tol
        self.cn_maxiter = cn_maxiter
        self._eig_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._prop_cache: dict[tuple[float, float], np.ndarray] = {}

    def _pair_matrix(self, v_site: float) -> tuple[np.ndarray, np.ndarray]:
        """Eigendecomposition of the local density on a 2-site pair lattice."""
        if v_site not in self._eig_cache:
            cfg = self.cfg
            n_mini = min(cfg.n_sites, 2)
            mini_cfg = LatticeConfig(n_mini, cfg.spacing, cfg.q_points,
                                     cfg.q_extent, cfg.hbar, cfg.derivative)
            links = np.full(n_mini, v_site)
            mini = compile_hamiltonian(self.density, mini_cfg, links, sites=[0])
            mat = mini.dense_matrix()
            self._eig_cache[v_site] = np.linalg.eigh(mat)
        return self._eig_cache[v_site]

    def _local_propagator(self, v_site: float, dt: float) -> np.ndarray:
        key = (v_site, dt)
        if key not in self._prop_cache:
            w, vecs = self._pair_matrix(v_site)
            phase = np.exp(-1j * dt * w / self.cfg.hbar)
            self._prop_cache[key] = (vecs * phase) @ vecs.conj().T
        return self._prop_cache[key]

    def _apply_local_exact(self, psi: np.ndarray, site: int, v_site: float,
                           dt: float) -> np.ndarray:
        u = self._local_propagator(v_site, dt)
        n, q = self.cfg.n_sites, self.cfg.q_points
        if n == 1:
            return u @ psi
        neighbor = (site + 1) % n
        moved = np.moveaxis(psi, (site, neighbor), (-2, -1))
        lead = moved.shape[:-2]
        flat = moved.reshape(-1, q * q)
        flat = flat @ u.T
        return np.moveaxis(flat.reshape(lead + (q, q)), (-2, -1), (site, neighbor))

    def deform_step(self, state: WaveFunctional, surface: SpacelikeSurface,
                    site: int, dt: float):
        """Advance t_site by dt; the generator is frozen at the input surface."""
        new_surface = surface.advanced(site, dt)  # raises NotSpacelike first
        if dt == 0.0:
            return state.copy(), new_surface
        if self.integrator == "exact":
            v_site = float(surface.site_slopes()[site])
            psi = self._apply_local_exact(state.psi, site, v_site, dt)
            return WaveFunctional(self.cfg, psi), new_surface
        op = local_density_operator(self.density, self.cfg, surface, site)
        psi = crank_nicolson_step(op, state.psi, dt, self.cn_tol, self.cn_maxiter)
        return WaveFunctional(self.cfg, psi), new_surface

    def run_schedule(self, state: WaveFunctional,
                     schedule: DeformationSchedule) -> WaveFunctional:
        surface = schedule.start
        for site, dt in schedule.moves:
            state, surface = self.deform_step(state, surface, site, dt)
        return state


def run_schedule(state: WaveFunctional, density: HamiltonianDensity,
                 schedule: DeformationSchedule,
                 integrator: str = "crank_nicolson", **kwargs) -> WaveFunctional:
    return SurfaceEvolver(density, state.cfg, integrator, **kwargs).run_schedule(state, schedule)


def fit_order(dt_values, errors) -> float:
    """Least-squares slope of log error against log dt."""
    dt_values = np.asarray(dt_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = errors > 0
    if mask.sum() < 2:
        return 0.0
    slope = np.polyfit(np.log(dt_values[mask]), np.log(errors[mask]), 1)[0]
    return float(slope)


def integrability_test(state: WaveFunctional, density: HamiltonianDensity,
                       build_a, build_b, dt_values,
                       integrator: str = "exact", ratio_floor: float = 1.8,
                       cn_tol: float = 1e-10) -> dict:
    """Compare two same-endpoint schedule families under step refinement.

    ``build_a`` / ``build_b`` map a step size to a DeformationSchedule; all
    schedules must share start and end surfaces.  The report carries the L2
    discrepancies, consecutive-halving ratios, the fitted convergence order,
    and flags for any ratio below ``ratio_floor`` (a flagged run is a
    reported finding, not a failure: path independence here is a conjecture).
    """
    dt_values = [float(dt) for dt in dt_values]
    evolver = SurfaceEvolver(density, state.cfg, integrator, cn_tol=cn_tol)
    discrepancies = []
    reference = None
    for dt in dt_values:
        sched_a, sched_b = build_a(dt), build_b(dt)
        if not surfaces_equal(sched_a.start, sched_b.start):
            raise ScheduleMismatch("schedules start on different surfaces")
        if not surfaces_equal(sched_a.end(), sched_b.end(), tol=1e-9):
            raise ScheduleMismatch("schedules end on different surfaces")
        if reference is None:
            reference = (sched_a.start, sched_a.end())
        elif not (surfaces_equal(reference[0], sched_a.start)
                  and surfaces_equal(reference[1], sched_a.end(), tol=1e-9)):
            raise ScheduleMismatch("refinement levels changed the endpoint surfaces")
        psi_a = evolver.run_schedule(state, sched_a)
        psi_b = evolver.run_schedule(state, sched_b)
        diff = WaveFunctional(state.cfg, psi_a.psi - psi_b.psi)
        discrepancies.append(norm(diff))

    ratios = []
    flags = []
    for i in range(len(discrepancies) - 1):
        later = discrepancies[i + 1]
        ratio = discrepancies[i] / later if later > 0 else float("inf")
        ratios.append(ratio)
        if ratio < ratio_floor and discrepancies[i] > 1e-14:
            flags.append(
                f"ratio {ratio:.3f} between dt={dt_values[i]} and dt={dt_values[i + 1]} "
                f"below floor {ratio_floor}"
            )
    degenerate = all(d <= 1e-14 for d in discrepancies)
    order = 0.0 if degenerate else fit_order(dt_values, discrepancies)
    return {
        "dt_values": dt_values,
        "discrepancies": discrepancies,
        "ratios": ratios,
        "fitted_order": order,
        "degenerate": degenerate,
        "flags": flags,
    }
