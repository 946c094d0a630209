"""Independent reference implementations used to check the package.

These deliberately share no code with phkit: the pH oracle evaluates the
charge balance on a dense pH grid and returns the grid point with the
smallest absolute residual.
"""

from __future__ import annotations

import numpy as np

KW = 1e-14

GRID = np.round(np.arange(0.0, 14.0 + 1e-9, 1e-4), 4)
_H = 10.0 ** (-GRID)


def _avg_anion_charge(h: np.ndarray, pkas) -> np.ndarray:
    """Average number of protons lost per molecule of a polyprotic acid."""
    kas = [10.0 ** (-pka) for pka in pkas]
    # denominators: [1, K1/h, K1K2/h^2, ...]
    terms = [np.ones_like(h)]
    for ka in kas:
        terms.append(terms[-1] * ka / h)
    denom = sum(terms)
    num = sum(i * t for i, t in enumerate(terms))
    return num / denom


def grid_ph(components) -> float:
    """components: list of (kind, concentration, pka_list, fixed_charge).

    kind in {"weak-polyprotic-acid", "strong-acid", "strong-base",
    "conjugate-salt", "solvent"}.
    """
    h = _H
    f = h - KW / h
    for kind, conc, pkas, zfix in components:
        if conc == 0.0 or kind == "solvent":
            continue
        if kind == "strong-acid":
            f = f - conc
        elif kind == "strong-base":
            f = f + conc * zfix
        elif kind in ("weak-polyprotic-acid", "conjugate-salt"):
            f = f + conc * (zfix - _avg_anion_charge(h, pkas))
        else:
            raise ValueError(kind)
    return float(GRID[np.argmin(np.abs(f))])


def grid_ph_solution(solution) -> float:
    """Adapter: run the grid oracle on a phkit Solution."""
    comps = [
        (sp.kind, conc, sp.pka_list, sp.charge_of_fully_protonated_form)
        for sp, conc in solution.contents.items()
    ]
    return grid_ph(comps)
