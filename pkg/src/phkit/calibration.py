"""Fit calibration parameters to measurement tables.

Color knots are taken directly from Lab rows (interpolation needs no fit).
The bimodal bend-angle curve and the odor logistic are fitted by damped
least squares (Levenberg-style: a trust parameter blends gradient and
Gauss-Newton steps; only cost-decreasing steps are accepted, so the
objective is monotone over accepted iterations). Time constants are fitted
from timed rows when the tables carry them, otherwise retained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, UnderDeterminedFitError
from .materials import CalibrationSet, ColorCalib, OdorCalib, ShapeCalib

LN10 = math.log(10.0)

TABLE_COLUMNS = {
    "color": ("ph", "L", "a", "b"),
    "odor": ("ph", "intensity"),
    "shape": ("ph", "angle"),
}


@dataclass(frozen=True)
class MeasurementTable:
    """Rows of (pH, observables..., optional time in seconds)."""

    kind: str
    rows: tuple[tuple, ...]
    has_time: bool = False

    def __post_init__(self):
        if self.kind not in TABLE_COLUMNS:
            raise ConfigurationError(f"unknown table kind: {self.kind!r}")
        width = len(TABLE_COLUMNS[self.kind]) + (1 if self.has_time else 0)
        seen = set()
        phs = set()
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(i, f"expected {width} columns, got {len(row)}")
            if any(not math.isfinite(v) for v in row):
                raise DataError(i, "non-finite observable")
            ph = row[0]
            if not 0.0 <= ph <= 14.0:
                raise DataError(i, f"pH {ph} outside [0, 14]")
            key = (ph, row[-1] if self.has_time else None)
            if key in seen:
                raise DataError(i, f"duplicate (pH, time) key {key}")
            seen.add(key)
            phs.add(ph)
        if len(phs) < 3:
            raise ConfigurationError("a measurement table needs at least 3 distinct pH rows")


def parse_table(text: str, kind: str) -> MeasurementTable:
    """Parse delimited text with a header row into a MeasurementTable."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ConfigurationError("empty measurement table")
    header = [h.strip().lower() for h in lines[0].split(",")]
    expected = [c.lower() for c in TABLE_COLUMNS[kind]]
    has_time = header == expected + ["time"]
    if not has_time and header != expected:
        raise ConfigurationError(
            f"expected header {','.join(expected)}[,time] for kind {kind!r}, got {','.join(header)}"
        )
    rows = []
    for i, ln in enumerate(lines[1:]):
        try:
            rows.append(tuple(float(v) for v in ln.split(",")))
        except ValueError as exc:
            raise DataError(i, str(exc)) from exc
    return MeasurementTable(kind=kind, rows=tuple(rows), has_time=has_time)


# --------------------------------------------------------------------------
# damped least squares core


def damped_least_squares(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0: np.ndarray,
    max_iter: int = 500,
    rel_tol: float = 1e-9,
) -> tuple[np.ndarray, dict]:
    """Minimize ||residual(p)||^2 with Levenberg-style damping.

    Returns (p, report); report["accepted_costs"] is monotone decreasing.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = residual(p)
    cost = float(r @ r)
    lam = 1e-3
    accepted = [cost]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        jac = jacobian(p)
        jtj = jac.T @ jac
        g = jac.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)) + 1e-15 * np.eye(len(p)), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        p_try = p + step
        r_try = residual(p_try)
        cost_try = float(r_try @ r_try)
        if cost_try < cost:
            rel = (cost - cost_try) / max(cost, 1e-300)
            p, r, cost = p_try, r_try, cost_try
            accepted.append(cost)
            lam = max(lam / 3.0, 1e-12)
            if rel < rel_tol:
                break
        else:
            lam *= 2.0
            if lam > 1e12:
                break
    return p, {"accepted_costs": accepted, "iterations": n_iter, "cost": cost}


# --------------------------------------------------------------------------
# models and analytic Jacobians


def two_bump_value(ph: np.ndarray, p: np.ndarray, base: float) -> np.ndarray:
    """p = [amp1, c1, wl1, wr1, amp2, c2, wl2, wr2]; base is held fixed."""
    out = np.full_like(ph, base, dtype=float)
    for k in (0, 4):
        amp, c, wl, wr = p[k : k + 4]
        w = np.where(ph < c, wl, wr)
        out = out + amp * np.exp(-((ph - c) ** 2) / (2.0 * w * w))
    return out


def two_bump_jacobian(ph: np.ndarray, p: np.ndarray) -> np.ndarray:
    jac = np.zeros((len(ph), 8))
    for k in (0, 4):
        amp, c, wl, wr = p[k : k + 4]
        left = ph < c
        w = np.where(left, wl, wr)
        d = ph - c
        g = amp * np.exp(-(d ** 2) / (2.0 * w * w))
        jac[:, k] = g / amp
        jac[:, k + 1] = g * d / (w * w)
        gw = g * d ** 2 / w ** 3
        jac[:, k + 2] = np.where(left, gw, 0.0)
        jac[:, k + 3] = np.where(left, 0.0, gw)
    return jac


def odor_logistic(ph: np.ndarray, p: np.ndarray) -> np.ndarray:
    """p = [i_max, pka_eff]; steady emission vs pH."""
    return p[0] / (1.0 + 10.0 ** (ph - p[1]))


def odor_logistic_jacobian(ph: np.ndarray, p: np.ndarray) -> np.ndarray:
    u = 10.0 ** (ph - p[1])
    denom = (1.0 + u) ** 2
    jac = np.empty((len(ph), 2))
    jac[:, 0] = 1.0 / (1.0 + u)
    jac[:, 1] = p[0] * u * LN10 / denom
    return jac


# --------------------------------------------------------------------------
# per-kind fits


def _fit_color(table: MeasurementTable, color: ColorCalib, report: dict) -> ColorCalib:
    static = [r for r in table.rows if not table.has_time] or [
        r[:-1] for r in table.rows if r[-1] == 0.0
    ]
    if static:
        knots = tuple(sorted((tuple(r[:4]) for r in static), key=lambda k: k[0]))
        color = replace(color, knots=knots)
        report["color"] = {"knots": len(knots), "fitted": "knots taken directly"}
    if table.has_time:
        color = _fit_color_tau(table, color, report)
    return color


def _fit_color_tau(table: MeasurementTable, color: ColorCalib, report: dict) -> ColorCalib:
    # one relaxation fit per tau band, using rows whose pH falls in the band
    bands = list(color.tau_bands)
    for bi, (lo, hi, tau0) in enumerate(bands):
        rows = [r for r in table.rows if lo <= r[0] <= hi and r[-1] > 0.0]
        if len(rows) < 2:
            continue
        t = np.array([r[-1] for r in rows])
        ph0 = rows[0][0]
        target = np.array(_interp_knots(ph0, color.knots))
        start = np.array(_interp_knots(7.0, color.knots))
        obs = np.array([r[1:4] for r in rows])

        def resid(p, t=t, obs=obs):
            decay = (1.0 - color.fast_fraction) * np.exp(-t / p[0]) + color.fast_fraction * np.exp(
                -t / color.fast_tau
            )
            model = target[None, :] + (start - target)[None, :] * decay[:, None]
            return (model - obs).ravel()

        def jac(p, t=t):
            ddecay = (1.0 - color.fast_fraction) * np.exp(-t / p[0]) * (t / p[0] ** 2)
            return ((start - target)[None, :] * ddecay[:, None]).reshape(-1, 1)

        p, rep = damped_least_squares(resid, jac, np.array([tau0]))
        bands[bi] = (lo, hi, float(p[0]))
        report.setdefault("color_tau", {})[f"band_{lo}_{hi}"] = rep["cost"]
    return replace(color, tau_bands=tuple(bands))


def _interp_knots(ph: float, knots) -> tuple[float, float, float]:
    for (p0, *lab0), (p1, *lab1) in zip(knots, knots[1:]):
        if p0 <= ph <= p1:
            t = 0.0 if p1 == p0 else (ph - p0) / (p1 - p0)
            return tuple(a + t * (b - a) for a, b in zip(lab0, lab1))
    raise ConfigurationError(f"pH {ph} outside fitted knot range")


def _fit_odor(table: MeasurementTable, odor: OdorCalib, report: dict) -> OdorCalib:
    rows = [r for r in table.rows if not table.has_time or r[-1] < 0] or list(table.rows)
    steady = [r for r in rows]
    ph = np.array([r[0] for r in steady])
    obs = np.array([r[1] for r in steady])
    if len(steady) < 2:
        raise UnderDeterminedFitError("odor fit needs at least 2 rows for (i_max, pka_eff)")
    if set(np.unique(obs)) <= {0.0, 1.0}:
        # ordinal on/off data: place pka_eff at the on/off boundary
        on = ph[obs > 0.5]
        off = ph[obs <= 0.5]
        if len(on) == 0 or len(off) == 0:
            raise UnderDeterminedFitError("on/off odor fit needs both classes present")
        pka = float((on.max() + off.min()) / 2.0)
        report["odor"] = {"mode": "threshold", "pka_eff": pka}
        return replace(odor, pka_eff=pka)
    p0 = np.array([odor.i_max, odor.pka_eff])
    p, rep = damped_least_squares(
        lambda p: odor_logistic(ph, p) - obs, lambda p: odor_logistic_jacobian(ph, p), p0
    )
    report["odor"] = {"mode": "logistic", "cost": rep["cost"], "i_max": p[0], "pka_eff": p[1]}
    if p[0] <= 0:
        raise ConfigurationError("odor fit produced non-positive i_max")
    return replace(odor, i_max=float(p[0]), pka_eff=float(p[1]))


def _fit_shape(table: MeasurementTable, shape: ShapeCalib, report: dict) -> ShapeCalib:
    if table.has_time:
        eq_rows = [r[:-1] for r in table.rows if r[-1] == 0.0]
    else:
        eq_rows = list(table.rows)
    ph = np.array([r[0] for r in eq_rows])
    obs = np.array([r[1] for r in eq_rows])
    p0 = np.array(
        [
            shape.amp1, shape.center1, shape.width1_left, shape.width1_right,
            shape.amp2, shape.center2, shape.width2_left, shape.width2_right,
        ]
    )
    if len(eq_rows) < len(p0):
        raise UnderDeterminedFitError(
            f"two-bump fit needs at least {len(p0)} equilibrium rows, got {len(eq_rows)}; "
            "add rows at distinct pH values"
        )
    base = shape.base_angle

    p, rep = damped_least_squares(
        lambda p: two_bump_value(ph, p, base) - obs,
        lambda p: two_bump_jacobian(ph, p),
        p0,
    )
    report["shape"] = {
        "cost_before": rep["accepted_costs"][0],
        "cost_after": rep["cost"],
        "iterations": rep["iterations"],
        "params": [float(v) for v in p],
    }
    shape = replace(
        shape,
        amp1=float(p[0]), center1=float(p[1]), width1_left=float(p[2]), width1_right=float(p[3]),
        amp2=float(p[4]), center2=float(p[5]), width2_left=float(p[6]), width2_right=float(p[7]),
    )
    if table.has_time:
        shape = _fit_shape_tau(table, shape, report)
    return shape


def _fit_shape_tau(table: MeasurementTable, shape: ShapeCalib, report: dict) -> ShapeCalib:
    rows = [r for r in table.rows if r[-1] >= shape.handoff_time]
    if len(rows) < 2:
        return shape
    ph = np.array([r[0] for r in rows])
    obs = np.array([r[1] for r in rows])
    t = np.array([r[-1] for r in rows])
    eq = two_bump_value(
        ph,
        np.array([shape.amp1, shape.center1, shape.width1_left, shape.width1_right,
                  shape.amp2, shape.center2, shape.width2_left, shape.width2_right]),
        shape.base_angle,
    )
    a0 = shape.common_swell_angle * (1.0 - math.exp(-shape.handoff_time / shape.tau_common))
    dt = t - shape.handoff_time

    def resid(p):
        return eq + (a0 - eq) * np.exp(-dt / p[0]) - obs

    def jac(p):
        return ((a0 - eq) * np.exp(-dt / p[0]) * (dt / p[0] ** 2)).reshape(-1, 1)

    p, rep = damped_least_squares(resid, jac, np.array([shape.tau_ph]))
    report["shape_tau"] = {"tau_ph": float(p[0]), "cost": rep["cost"]}
    return replace(shape, tau_ph=float(p[0]))


def fit_calibration(
    tables: Sequence[MeasurementTable], initial: CalibrationSet
) -> tuple[CalibrationSet, dict]:
    """Fit whatever the tables cover; everything else retains ``initial``."""
    if not tables:
        raise ConfigurationError("at least one measurement table is required")
    report: dict = {}
    color, odor, shape = initial.color, initial.odor, initial.shape
    for table in tables:
        if table.kind == "color":
            color = _fit_color(table, color, report)
        elif table.kind == "odor":
            odor = _fit_odor(table, odor, report)
        elif table.kind == "shape":
            shape = _fit_shape(table, shape, report)
    fitted = CalibrationSet(
        color=color, odor=odor, shape=shape,
        formulation_metadata=initial.formulation_metadata,
    )
    return fitted, report
