"""Pseudospectral solver for the drift-diffusion equation on a periodic box.

Solves ``u_t = Lap u + sign * div(u grad psi)`` with ``-Lap psi = u``.
``sign = +1`` is the repulsive drift-diffusion model, ``-1`` the
Keller-Segel form, ``0`` switches the interaction off (pure heat flow).

The box ``[-L/2, L/2)^3`` is sampled at ``x_i = (i - n/2) h`` so the centre
grid point is the origin. Time stepping is integrating-factor RK2: the heat
semigroup is applied exactly in Fourier space and Heun's method handles the
nonlinear term.
"""

from __future__ import annotations

import functools
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

log = logging.getLogger(__name__)

__all__ = [
    "GridSpec",
    "SolverConfig",
    "FieldState",
    "RunResult",
    "ConfigurationError",
    "BlowUpError",
    "CFLError",
    "init_density",
    "poisson_field",
    "step",
    "run",
    "valid_window_end",
    "in_valid_window",
]


class ConfigurationError(ValueError):
    pass


class CFLError(ConfigurationError):
    pass


class BlowUpError(FloatingPointError):
    def __init__(self, message, step_index=None, partial=None):
        super().__init__(message)
        self.step_index = step_index
        self.partial = partial


def _workers():
    env = os.environ.get("THREADS")
    return int(env) if env else -1


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float

    def __post_init__(self):
        if self.n < 32 or self.n & (self.n - 1):
            raise ConfigurationError(f"n must be a power of two >= 32, got {self.n}")
        if not self.box_length > 0:
            raise ConfigurationError("box length must be positive")
        if not self.spacing < 1:
            raise ConfigurationError(f"spacing L/n = {self.spacing} must be < 1")

    @property
    def spacing(self):
        return self.box_length / self.n

    @property
    def cell_volume(self):
        return self.spacing ** 3

    def axis(self):
        return (np.arange(self.n) - self.n // 2) * self.spacing

    def coordinates(self):
        """Positions, shape ``(n, n, n, 3)``; index order is (x, y, z)."""
        a = self.axis()
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)

    def radius(self):
        a = self.axis()
        return np.sqrt(a[:, None, None] ** 2 + a[None, :, None] ** 2 + a[None, None, :] ** 2)


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec
    dt: float
    t_end: float
    interaction_sign: int = 1
    poisson_mode: str = "free_space_padded"
    dealias: bool = True
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.t_end < 0:
            raise ConfigurationError("t_end must be non-negative")
        if self.interaction_sign not in (-1, 0, 1):
            raise ConfigurationError("interaction_sign must be -1, 0 or +1")
        if self.poisson_mode not in ("torus_neutralized", "free_space_padded"):
            raise ConfigurationError(f"unknown poisson mode {self.poisson_mode!r}")
        times = tuple(float(t) for t in self.snapshot_times)
        if list(times) != sorted(times):
            raise ConfigurationError("snapshot_times must be ascending")
        object.__setattr__(self, "snapshot_times", times)

    def canonical_text(self):
        lines = [
            "[grid]",
            f"n = {self.grid.n}",
            f"box_length = {self.grid.box_length!r}",
            "[solver]",
            f"dt = {self.dt!r}",
            f"t_end = {self.t_end!r}",
            f"interaction_sign = {self.interaction_sign}",
            f"poisson_mode = {self.poisson_mode}",
            f"dealias = {str(self.dealias).lower()}",
            "snapshot_times = " + ", ".join(repr(t) for t in self.snapshot_times),
        ]
        return "\n".join(lines) + "\n"


@dataclass
class FieldState:
    time: float
    density: np.ndarray
    grid: GridSpec
    provenance: str = ""
    # Time at which a point source would have produced the initial data.
    clock_offset: float = 0.0

    @property
    def mass(self):
        return float(np.sum(self.density) * self.grid.cell_volume)

    @property
    def clock(self):
        return self.time + self.clock_offset


@dataclass
class RunResult:
    snapshots: list
    manifest: dict


# ---------------------------------------------------------------- presets

def _gaussian_on_grid(grid, mass, t0, center):
    x = grid.coordinates() - np.asarray(center, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return mass * (4.0 * np.pi * t0) ** -1.5 * np.exp(-r2 / (4.0 * t0))


def _check_resolved(grid, t0, center):
    width = 2.0 * math.sqrt(t0)  # e-folding radius of G(t0)
    if width < 4.0 * grid.spacing:
        raise ConfigurationError(
            f"Gaussian width 2 sqrt(t0) = {width:.3g} under-resolved (need >= 4 h = {4 * grid.spacing:.3g})")
    reach = float(np.max(np.abs(center))) + 6.0 * width
    if reach > grid.box_length / 2:
        raise ConfigurationError(
            f"data reaches {reach:.3g} from the centre; box half-width is {grid.box_length / 2:.3g}")


def init_density(grid: GridSpec, preset: str, mass: float = 1.0, width: float = 1.0,
                 offset: Sequence[float] = (0.0, 0.0, 0.0)) -> FieldState:
    """Initial density from a named preset.

    ``width`` is the heat-kernel time ``t0`` of the Gaussian, so
    ``centered_gaussian`` samples ``mass * G(t0, x)`` exactly.
    ``skewed_blob`` superposes two Gaussians of unequal widths at distinct
    offsets, giving non-zero first moment and non-Gaussian shape.
    """
    if not mass > 0:
        raise ConfigurationError("presets need positive mass")
    if preset == "centered_gaussian":
        _check_resolved(grid, width, (0, 0, 0))
        u = _gaussian_on_grid(grid, mass, width, (0, 0, 0))
        offset_time = width
    elif preset == "offset_gaussian":
        _check_resolved(grid, width, offset)
        u = _gaussian_on_grid(grid, mass, width, offset)
        offset_time = width
    elif preset == "skewed_blob":
        c1 = np.array([0.5, 0.25, 0.0]) * math.sqrt(width)
        c2 = np.array([-1.0, 0.0, 0.5]) * math.sqrt(width)
        _check_resolved(grid, width, c1)
        _check_resolved(grid, 1.5 * width, c2)
        u = _gaussian_on_grid(grid, 0.7 * mass, width, c1) + _gaussian_on_grid(grid, 0.3 * mass, 1.5 * width, c2)
        offset_time = width
    else:
        raise ConfigurationError(f"unknown preset {preset!r}")
    return FieldState(0.0, u, grid, clock_offset=offset_time)


# ---------------------------------------------------------------- spectral ops

@functools.lru_cache(maxsize=8)
def _wavenumbers(n, L):
    k = 2.0 * np.pi * sfft.fftfreq(n, d=L / n)
    kr = 2.0 * np.pi * sfft.rfftfreq(n, d=L / n)
    kx = k[:, None, None]
    ky = k[None, :, None]
    kz = kr[None, None, :]
    k2 = kx ** 2 + ky ** 2 + kz ** 2
    return kx, ky, kz, k2


@functools.lru_cache(maxsize=8)
def _dealias_mask(n, L):
    kx, ky, kz, _ = _wavenumbers(n, L)
    kmax = np.pi * n / L
    cut = (2.0 / 3.0) * kmax
    return (np.abs(kx) < cut) & (np.abs(ky) < cut) & (np.abs(kz) < cut)


@functools.lru_cache(maxsize=4)
def _free_space_kernel(n, L):
    """Fourier symbol of the Green's function truncated at radius L, on the 2n grid.

    ``(1 - cos(R k)) / k^2`` with ``R = L`` is the exact transform of
    ``1/(4 pi r)`` restricted to ``r < R``. On the doubled period 2L the
    truncated kernel has no overlapping images, so the discrete periodic
    convolution equals the free-space one for every pair of points closer
    than L, which covers any density supported in the central ball of radius L/2.
    """
    kx, ky, kz, k2 = _wavenumbers(2 * n, 2.0 * L)
    k = np.sqrt(k2)
    R = L
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(k2 > 0, 2.0 * np.sin(0.5 * R * k) ** 2 / np.where(k2 > 0, k2, 1.0), 0.5 * R * R)
    return sym


def _padded_forward(u):
    n = u.shape[0]
    w = _workers()
    a = sfft.rfft(u, n=2 * n, axis=2, workers=w)
    a = sfft.fft(a, n=2 * n, axis=1, workers=w)
    return sfft.fft(a, n=2 * n, axis=0, workers=w)


def _padded_inverse_crop(a, n):
    w = _workers()
    a = sfft.ifft(a, axis=0, workers=w)[:n]
    a = sfft.ifft(a, axis=1, workers=w)[:, :n]
    return sfft.irfft(a, n=2 * n, axis=2, workers=w)[:, :, :n]


def _free_space_field(u, L):
    n = u.shape[0]
    # Only displacements between cells matter, so the data can sit in the
    # first n cells of each doubled axis without re-centring.
    uh = _padded_forward(u)
    kx, ky, kz, _ = _wavenumbers(2 * n, 2.0 * L)
    phi = _free_space_kernel(n, L) * uh
    return np.stack([_padded_inverse_crop(1j * kk * phi, n) for kk in (kx, ky, kz)], axis=-1)


def _torus_field_hat(uh, grid):
    kx, ky, kz, k2 = _wavenumbers(grid.n, grid.box_length)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    phi = uh * inv
    return [1j * kk * phi for kk in (kx, ky, kz)]


def poisson_field(state: FieldState, mode: str = "free_space_padded") -> np.ndarray:
    """``grad (-Lap)^{-1} u`` on the grid, shape ``(n, n, n, 3)``.

    ``torus_neutralized`` solves with the mean removed; ``free_space_padded``
    convolves with the free-space kernel on a doubled, zero-padded box.
    """
    return _field(np.asarray(state.density, dtype=float), state.grid, mode)


def _field(u, grid, mode):
    n = grid.n
    if mode == "torus_neutralized":
        uh = sfft.rfftn(u, workers=_workers())
        return np.stack([sfft.irfftn(e, u.shape, workers=_workers()) for e in _torus_field_hat(uh, grid)], axis=-1)
    if mode == "free_space_padded":
        return _free_space_field(u, grid.box_length)
    raise ConfigurationError(f"unknown poisson mode {mode!r}")


# ---------------------------------------------------------------- time stepping

class _Stepper:
    def __init__(self, config: SolverConfig):
        self.cfg = config
        g = config.grid
        self.n = g.n
        self.kx, self.ky, self.kz, self.k2 = _wavenumbers(g.n, g.box_length)
        self.mask = _dealias_mask(g.n, g.box_length) if config.dealias else None
        self.max_field = 0.0

    def nonlinear(self, uh):
        """Fourier transform of ``sign * div(u E)``; exactly zero at k = 0."""
        cfg = self.cfg
        if cfg.interaction_sign == 0:
            return np.zeros_like(uh)
        w = _workers()
        shape = (self.n,) * 3
        if self.mask is not None:
            uh = uh * self.mask
        u = sfft.irfftn(uh, shape, workers=w)
        if cfg.poisson_mode == "torus_neutralized":
            E = [sfft.irfftn(e, shape, workers=w) for e in _torus_field_hat(uh, cfg.grid)]
        else:
            Ef = _free_space_field(u, cfg.grid.box_length)
            E = [Ef[..., j] for j in range(3)]
        self.max_field = max(float(np.max(np.abs(e))) for e in E)
        div = 1j * (self.kx * sfft.rfftn(u * E[0], workers=w)
                    + self.ky * sfft.rfftn(u * E[1], workers=w)
                    + self.kz * sfft.rfftn(u * E[2], workers=w))
        if self.mask is not None:
            div = div * self.mask
        return cfg.interaction_sign * div

    def advance(self, uh, dt):
        decay = np.exp(-self.k2 * dt)
        n0 = self.nonlinear(uh)
        self._check_cfl(dt)
        pred = decay * (uh + dt * n0)
        n1 = self.nonlinear(pred)
        return decay * (uh + 0.5 * dt * n0) + 0.5 * dt * n1

    def _check_cfl(self, dt):
        if self.max_field > 0:
            limit = 0.25 * self.cfg.grid.spacing / self.max_field
            if dt > limit:
                raise CFLError(f"dt = {dt:.3g} exceeds the advective limit {limit:.3g}")


def step(state: FieldState, config: SolverConfig, dt: Optional[float] = None) -> FieldState:
    """One integrating-factor RK2 step of length ``dt`` (default ``config.dt``)."""
    dt = config.dt if dt is None else dt
    st = _Stepper(config)
    uh = sfft.rfftn(state.density, workers=_workers())
    uh = st.advance(uh, dt)
    u = sfft.irfftn(uh, state.density.shape, workers=_workers())
    if not np.all(np.isfinite(u)):
        raise BlowUpError("non-finite density after step", step_index=0)
    return FieldState(state.time + dt, u, state.grid, state.provenance, state.clock_offset)


def run(config: SolverConfig, initial: FieldState, provenance: str = "") -> RunResult:
    """Advance ``initial`` to ``config.t_end``, collecting snapshots.

    The step count is ``ceil(t_end / dt)`` with the step shortened so the
    final time is hit exactly. Requested snapshot times snap to the nearest
    step; the recorded time is the step time. Initial and final states are
    always included.
    """
    if initial.grid != config.grid:
        raise ConfigurationError("initial state lives on a different grid")
    nsteps = max(int(math.ceil(config.t_end / config.dt - 1e-9)), 0)
    dt = config.t_end / nsteps if nsteps else 0.0
    wanted = {0, nsteps}
    for t in config.snapshot_times:
        if 0 <= t <= config.t_end:
            wanted.add(int(round(t / dt)) if dt else 0)
    st = _Stepper(config)
    shape = initial.density.shape
    uh = sfft.rfftn(initial.density, workers=_workers())
    vol = config.grid.cell_volume

    def snap(k, u):
        return FieldState(initial.time + k * dt, u.copy(), config.grid, provenance, initial.clock_offset)

    u = np.array(initial.density, dtype=float)
    snapshots = [snap(0, u)]
    mass_trace = [float(np.sum(u) * vol)]
    min_trace = [float(u.min())]
    max_trace = [float(u.max())]
    for k in range(1, nsteps + 1):
        uh = st.advance(uh, dt)
        u = sfft.irfftn(uh, shape, workers=_workers())
        if not np.all(np.isfinite(u)):
            manifest = _manifest(config, provenance, snapshots, mass_trace, min_trace, max_trace, dt, k - 1)
            raise BlowUpError(f"non-finite density at step {k}", step_index=k,
                              partial=RunResult(snapshots, manifest))
        mass_trace.append(float(np.sum(u) * vol))
        min_trace.append(float(u.min()))
        max_trace.append(float(u.max()))
        if k in wanted:
            snapshots.append(snap(k, u))
    if min(min_trace) < -1e-8 * max(max_trace):
        log.info("negative density undershoot %.3g (max %.3g)", min(min_trace), max(max_trace))
    manifest = _manifest(config, provenance, snapshots, mass_trace, min_trace, max_trace, dt, nsteps)
    return RunResult(snapshots, manifest)


def _manifest(config, provenance, snapshots, mass, mins, maxs, dt, nsteps):
    return {
        "config_hash": provenance,
        "n": config.grid.n,
        "box_length": config.grid.box_length,
        "dt": dt,
        "steps": nsteps,
        "snapshot_times": [s.time for s in snapshots],
        "mass_trace": mass,
        "min_density_trace": mins,
        "max_density_trace": maxs,
    }


# ---------------------------------------------------------------- window rule

def valid_window_end(grid: GridSpec, clock_offset: float) -> float:
    """Largest solver time with effective support radius ``6 sqrt(t + t0) < L/4``."""
    return (grid.box_length / 24.0) ** 2 - clock_offset


def in_valid_window(state: FieldState) -> bool:
    return 6.0 * math.sqrt(state.clock) < state.grid.box_length / 4.0
