"""1-D diffusion of pH solutions in cast channels: ticker and gradiator.

Explicit forward-time centered-space stepping on a node grid (node 0 and
node n-1 sit on the channel ends). Fixed boundaries re-impose the boundary
solution's concentrations; closed boundaries are zero-flux. The scheme is
run strictly inside the CFL bound, which the API enforces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .chemistry import AcidBaseSpecies, Solution, equilibrium_ph, mix, pack_species
from .errors import ConfigurationError, StabilityError

DEFAULT_DIFFUSIVITY = 1e-9  # m^2/s, generic small-ion scale in water

TIMEOUT = math.inf  # sentinel for markers never reached within the horizon


@dataclass(frozen=True)
class Channel:
    """A 1-D channel: species concentration fields on n_cells grid nodes."""

    length: float  # m
    diameter: float  # m
    species: tuple[AcidBaseSpecies, ...]
    field: np.ndarray  # (n_species, n_cells) mol/L
    diffusivity: np.ndarray  # (n_species,) m^2/s
    left: Optional[Solution]  # None = closed (zero-flux)
    right: Optional[Solution]

    def __post_init__(self):
        if self.field.ndim != 2 or self.field.shape[0] != len(self.species):
            raise ConfigurationError("field must be (n_species, n_cells)")
        if self.n_cells < 3:
            raise ConfigurationError("n_cells must be at least 3")
        if np.any(self.diffusivity <= 0):
            raise ConfigurationError("diffusivities must be positive")
        if np.any(self.field < 0):
            raise ConfigurationError("concentrations must be non-negative")

    @property
    def n_cells(self) -> int:
        return self.field.shape[1]

    @property
    def dx(self) -> float:
        return self.length / (self.n_cells - 1)

    @property
    def max_stable_dt(self) -> float:
        if len(self.species) == 0:
            return math.inf  # pure solvent: nothing diffuses
        return self.dx ** 2 / (2.0 * float(self.diffusivity.max()))

    @property
    def positions(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells)


@dataclass(frozen=True)
class PhProfile:
    positions: tuple[float, ...]  # fractional coordinates in [0, 1]
    ph_values: tuple[float, ...]

    def __post_init__(self):
        if len(self.positions) != len(self.ph_values):
            raise ConfigurationError("positions and ph_values must have equal length")


def _solution_concentrations(sol: Optional[Solution], species) -> np.ndarray:
    out = np.zeros(len(species))
    if sol is not None:
        for i, sp in enumerate(species):
            out[i] = sol.contents.get(sp, 0.0)
    return out


def make_channel(
    length: float,
    diameter: float,
    n_cells: int,
    fill: Solution,
    left: Optional[Solution] = None,
    right: Optional[Solution] = None,
    diffusivity: float | dict[str, float] = DEFAULT_DIFFUSIVITY,
) -> Channel:
    """Build a channel filled uniformly with ``fill``.

    The species axis is the union of the fill and boundary solutions.
    ``diffusivity`` is either one shared coefficient or a per-species map.
    """
    if length <= 0 or diameter <= 0:
        raise ConfigurationError("length and diameter must be positive")
    names = {}
    for sol in (fill, left, right):
        if sol is not None:
            for sp in sol.contents:
                names[sp.name] = sp
    species = tuple(names[n] for n in sorted(names))
    field = np.tile(_solution_concentrations(fill, species)[:, None], (1, n_cells))
    if left is not None:
        field[:, 0] = _solution_concentrations(left, species)
    if right is not None:
        field[:, -1] = _solution_concentrations(right, species)
    if isinstance(diffusivity, dict):
        d = np.array([diffusivity.get(sp.name, DEFAULT_DIFFUSIVITY) for sp in species])
    else:
        d = np.full(len(species), float(diffusivity))
    return Channel(
        length=length, diameter=diameter, species=species, field=field,
        diffusivity=d, left=left, right=right,
    )


def with_left_boundary(channel: Channel, solution: Solution) -> Channel:
    """Fix the left boundary to a new solution, extending the species axis.

    New species enter with zero interior concentration and the default
    diffusivity (or the mean of the existing coefficients when uniform).
    """
    new = [sp for sp in solution.contents if sp not in channel.species]
    species = channel.species + tuple(new)
    field = np.zeros((len(species), channel.n_cells))
    field[: len(channel.species)] = channel.field
    default_d = (
        float(channel.diffusivity.mean()) if len(channel.species) else DEFAULT_DIFFUSIVITY
    )
    diffusivity = np.concatenate([channel.diffusivity, np.full(len(new), default_d)])
    ch = Channel(
        length=channel.length,
        diameter=channel.diameter,
        species=species,
        field=field,
        diffusivity=diffusivity,
        left=solution,
        right=channel.right,
    )
    new_field = ch.field.copy()
    new_field[:, 0] = _solution_concentrations(solution, species)
    return replace(ch, field=new_field)


def diffuse_step(channel: Channel, dt: float) -> Channel:
    """One FTCS update of every species field."""
    if dt > channel.max_stable_dt:
        raise StabilityError(dt, channel.max_stable_dt)
    r = channel.diffusivity * dt / channel.dx ** 2
    field = _kernels.diffuse_step(
        channel.field,
        r,
        channel.left is not None,
        channel.right is not None,
        _kernels_boundary(channel, channel.left),
        _kernels_boundary(channel, channel.right),
    )
    return replace(channel, field=field)


def _kernels_boundary(channel: Channel, sol: Optional[Solution]) -> np.ndarray:
    return _solution_concentrations(sol, channel.species)


def total_moles(channel: Channel) -> np.ndarray:
    """Per-species total moles: each node represents a slab of width dx.

    The zero-flux scheme conserves this sum exactly in exact arithmetic.
    """
    area = math.pi * (channel.diameter / 2.0) ** 2
    return channel.field.sum(axis=1) * channel.dx * area * 1000.0  # L per m^3


def ph_at_cells(channel: Channel, indices: Optional[np.ndarray] = None, tol: float = 1e-6) -> np.ndarray:
    """Equilibrium pH for each (selected) grid node via the batched solver."""
    kind, zfix, nprot, kaprod = pack_species(list(channel.species))
    conc = channel.field if indices is None else channel.field[:, indices]
    return _kernels.solve_ph_batch(conc, kind, zfix, nprot, kaprod, tol, 200)


def ticker_arrival_times(
    channel: Channel,
    marker_positions: list[float],
    ph_threshold_band: tuple[float, float],
    horizon: float = 1e6,
    dt: Optional[float] = None,
) -> list[float]:
    """First time each marker's local pH leaves the threshold band.

    The channel's left boundary must be fixed to the activating solution.
    Markers never reached within ``horizon`` get the TIMEOUT sentinel (inf).
    """
    if channel.left is None:
        raise ConfigurationError("ticker requires a fixed (active) left boundary")
    lo, hi = ph_threshold_band
    if dt is None:
        dt = 0.4 * channel.max_stable_dt
    idx = np.array(
        [min(channel.n_cells - 1, int(round(p * (channel.n_cells - 1)))) for p in marker_positions]
    )
    times = [TIMEOUT] * len(marker_positions)
    t = 0.0
    pending = set(range(len(marker_positions)))
    while pending and t < horizon:
        channel = diffuse_step(channel, dt)
        t += dt
        phs = ph_at_cells(channel, idx)
        for j in list(pending):
            if not lo <= phs[j] <= hi:
                times[j] = t
                pending.discard(j)
    return times


def gradiator_steady(channel: Channel) -> Channel:
    """Analytic steady state: per-species linear profile between fixed ends."""
    if channel.left is None or channel.right is None:
        raise ConfigurationError("gradiator requires both boundaries fixed")
    cl = _solution_concentrations(channel.left, channel.species)
    cr = _solution_concentrations(channel.right, channel.species)
    x = channel.positions
    field = cl[:, None] * (1.0 - x)[None, :] + cr[:, None] * x[None, :]
    return replace(channel, field=field)


def gradiator_profile(
    channel: Channel,
    left: Solution,
    right: Solution,
    tol: float = 1e-6,
) -> PhProfile:
    """Steady titrated gradient between two fixed-pH ends.

    Concentrations vary linearly between the boundary compositions; the pH
    at each node follows from the equilibrium solver (and is therefore not
    linear in position).
    """
    channel = replace(channel, left=left, right=right)
    steady = gradiator_steady(channel)
    phs = ph_at_cells(steady, tol=tol)
    return PhProfile(
        positions=tuple(float(p) for p in steady.positions),
        ph_values=tuple(float(p) for p in phs),
    )
