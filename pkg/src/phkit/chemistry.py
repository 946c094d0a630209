"""Aqueous acid/base equilibrium: pH solving, mixing, inverse mixing.

All computations assume 25 C, Kw = 1e-14, and ideal solutions (activities
equal concentrations). The equilibrium pH is the root of the charge-balance
function

    f(h) = h - Kw/h + sum_i C_i * (fixed cation charge_i - anionic charge_i(h))

where the anionic charge of a polyprotic group follows from its alpha
(speciation) fractions. f is strictly increasing in h for the supported
species kinds, so bisection on log10(h) in [-14, 0] always converges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import (
    ConfigurationError,
    InsufficientVolumeError,
    InternalConsistencyError,
    UnreachableSetpointError,
)

KW = 1e-14
DEFAULT_TOL = 1e-6
MAX_ITER = 200

KINDS = {"weak-polyprotic-acid", "strong-acid", "strong-base", "conjugate-salt", "solvent"}

_KIND_CODE = {
    "solvent": _kernels.KIND_INERT,
    "weak-polyprotic-acid": _kernels.KIND_WEAK_ACID,
    "strong-acid": _kernels.KIND_STRONG_ACID,
    "strong-base": _kernels.KIND_STRONG_BASE,
    "conjugate-salt": _kernels.KIND_SALT,
}


@dataclass(frozen=True)
class AcidBaseSpecies:
    """One dissolved species: a (poly)protic acid, salt, or strong acid/base.

    For conjugate salts, ``charge_of_fully_protonated_form`` is the fixed
    counter-cation charge contributed per mole (e.g. 1 for NaHCO3).
    """

    name: str
    kind: str
    pka_list: tuple[float, ...] = ()
    charge_of_fully_protonated_form: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unsupported species kind: {self.kind!r}")
        if self.kind in ("strong-acid", "strong-base") and self.pka_list:
            raise ConfigurationError(
                f"{self.name}: strong acids/bases dissociate completely; pKa list must be empty"
            )
        if any(b <= a for a, b in zip(self.pka_list, self.pka_list[1:])):
            raise ConfigurationError(f"{self.name}: pKa list must be strictly increasing")
        if len(self.pka_list) > _kernels.MAX_PROTONS:
            raise ConfigurationError(
                f"{self.name}: at most {_kernels.MAX_PROTONS} dissociation steps supported"
            )


@dataclass(frozen=True)
class Solution:
    """Aqueous mixture: analytical concentrations (mol/L) and a volume (L)."""

    contents: Mapping[AcidBaseSpecies, float] = field(default_factory=dict)
    volume: float = 1.0

    def __post_init__(self):
        if self.volume <= 0:
            raise ConfigurationError("solution volume must be positive")
        for sp, c in self.contents.items():
            if c < 0:
                raise ConfigurationError(f"{sp.name}: negative concentration")
        # normalize to a plain immutable dict (drop zero-concentration entries)
        object.__setattr__(
            self, "contents", {sp: float(c) for sp, c in self.contents.items() if c > 0.0}
        )


@dataclass(frozen=True)
class PhValue:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 14.0:
            raise ConfigurationError(f"pH {self.value} outside [0, 14]")

    def __float__(self):
        return self.value


def load_species_db(path: str | Path | None = None) -> dict[str, AcidBaseSpecies]:
    """Load a species database file; defaults to the shipped built-ins."""
    if path is None:
        text = resources.files("phkit.data").joinpath("species.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    db = {}
    for entry in doc["species"]:
        sp = AcidBaseSpecies(
            name=entry["name"],
            kind=entry["kind"],
            pka_list=tuple(entry["pka_list"]),
            charge_of_fully_protonated_form=entry["charge_of_fully_protonated_form"],
        )
        db[sp.name] = sp
    return db


BUILTIN = load_species_db()


def pack_species(species: list[AcidBaseSpecies]):
    """Pack species metadata into the flat arrays the kernels consume."""
    n = len(species)
    kind = np.zeros(n, dtype=np.int64)
    zfix = np.zeros(n, dtype=np.float64)
    nprot = np.zeros(n, dtype=np.int64)
    kaprod = np.zeros((n, _kernels.MAX_PROTONS + 1), dtype=np.float64)
    for i, sp in enumerate(species):
        kind[i] = _KIND_CODE[sp.kind]
        zfix[i] = sp.charge_of_fully_protonated_form
        nprot[i] = len(sp.pka_list)
        kaprod[i, 0] = 1.0
        prod = 1.0
        for j, pka in enumerate(sp.pka_list):
            prod *= 10.0 ** (-pka)
            kaprod[i, j + 1] = prod
    return kind, zfix, nprot, kaprod


def _solution_arrays(solution: Solution):
    species = sorted(solution.contents, key=lambda sp: sp.name)
    conc = np.array([solution.contents[sp] for sp in species], dtype=np.float64)
    return species, conc


def equilibrium_ph(solution: Solution, tol: float = DEFAULT_TOL) -> PhValue:
    """Equilibrium pH of a solution by bisection on log10(h).

    Deterministic for a fixed tolerance: the iteration policy is bisection
    with a hard cap of 200 halvings, stopping once both the bracket width
    (in pH units) and the charge-balance residual fall below ``tol``.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    species, conc = _solution_arrays(solution)
    kind, zfix, nprot, kaprod = pack_species(species)
    ph = _kernels.solve_ph_single(conc, kind, zfix, nprot, kaprod, tol, MAX_ITER)
    if math.isnan(ph):
        raise InternalConsistencyError(
            "charge balance has no sign change over pH [0, 14]; "
            "solution is outside the solver's validity range"
        )
    return PhValue(ph)


def charge_balance_residual(solution: Solution, ph: float) -> float:
    """Residual f(10^-ph) of the charge-balance function; 0 at equilibrium."""
    species, conc = _solution_arrays(solution)
    kind, zfix, nprot, kaprod = pack_species(species)
    return float(_kernels.charge_balance_residual(10.0 ** (-ph), conc, kind, zfix, nprot, kaprod))


def mix(a: Solution, vol_a: float, b: Solution, vol_b: float) -> Solution:
    """Combine drawn volumes of two solutions; moles add, volumes add.

    Composition-space only: no equilibrium is computed here.
    """
    if vol_a < 0 or vol_b < 0 or vol_a + vol_b <= 0:
        raise ConfigurationError("drawn volumes must be non-negative with a positive sum")
    if vol_a > a.volume:
        raise InsufficientVolumeError(
            f"requested {vol_a} L from a reservoir holding {a.volume} L"
        )
    if vol_b > b.volume:
        raise InsufficientVolumeError(
            f"requested {vol_b} L from a reservoir holding {b.volume} L"
        )
    total = vol_a + vol_b
    moles: dict[AcidBaseSpecies, float] = {}
    for sol, vol in ((a, vol_a), (b, vol_b)):
        for sp, c in sol.contents.items():
            moles[sp] = moles.get(sp, 0.0) + c * vol
    return Solution(contents={sp: m / total for sp, m in moles.items()}, volume=total)


def reservoir_ratio_for_target(
    acid_reservoir: Solution,
    base_reservoir: Solution,
    target: PhValue | float,
    tol: float = 1e-3,
) -> float:
    """Pump ratio r in [0, 1] such that mix(acid, 1-r, base, r) hits target.

    The mixed pH is monotone non-decreasing in r for the supported reservoir
    pairs, so bisection on r converges.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    target = float(target)
    ph_lo = float(equilibrium_ph(acid_reservoir))
    ph_hi = float(equilibrium_ph(base_reservoir))
    if not ph_lo <= target <= ph_hi:
        raise UnreachableSetpointError(target, ph_lo, ph_hi)
    if abs(ph_lo - target) <= tol:
        return 0.0
    if abs(ph_hi - target) <= tol:
        return 1.0

    def ph_at(r: float) -> float:
        return float(equilibrium_ph(mix(acid_reservoir, 1.0 - r, base_reservoir, r)))

    lo, hi = 0.0, 1.0
    r = 0.5
    for _ in range(MAX_ITER):
        r = 0.5 * (lo + hi)
        p = ph_at(r)
        if abs(p - target) <= tol:
            return r
        if p < target:
            lo = r
        else:
            hi = r
    return r


def protonation_fraction(ph: PhValue | float, pka: float) -> float:
    """Fraction of a group in its protonated (neutral, volatile) form."""
    return 1.0 / (1.0 + 10.0 ** (float(ph) - pka))


def solution_from_dict(spec: Mapping, db: Mapping[str, AcidBaseSpecies] | None = None) -> Solution:
    """Build a Solution from the file/wire form {"species": {...}, "volume": v}."""
    db = db or BUILTIN
    contents = {}
    for name, conc in spec.get("species", {}).items():
        if name not in db:
            raise ConfigurationError(f"unknown species: {name!r}")
        contents[db[name]] = float(conc)
    return Solution(contents=contents, volume=float(spec.get("volume", 1.0)))


def stock_reservoirs(path: str | Path | None = None) -> tuple[Solution, Solution]:
    """The shipped (acid, base) reservoir pair (pH 2.00 and 10.00 stocks)."""
    if path is None:
        text = resources.files("phkit.data").joinpath("stock_solutions.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    return solution_from_dict(doc["acid"]), solution_from_dict(doc["base"])


def solution_to_dict(solution: Solution) -> dict:
    return {
        "species": {sp.name: c for sp, c in sorted(solution.contents.items(), key=lambda kv: kv[0].name)},
        "volume": solution.volume,
    }
