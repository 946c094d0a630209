"""Time-evolving response models for the three material primitives.

Color (pigment film), odor (volatile flavor film), and shape (swelling
polymer strip) all follow first-order exponential relaxation toward a
pH-dependent equilibrium, advanced with an exact-exponential integrator so
results are independent of step size. History effects (color lock flags,
odor suppression, the shape strip's common-swell phase) are explicit state.

Default calibration values are synthetic: they are constructed to satisfy
the characterized onset/equilibration windows and orderings of a reference
formulation, not measured from any specific batch. Real measurements
replace them via the calibration module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .chemistry import protonation_fraction
from .errors import ConfigurationError, InvalidCompositeError, OutOfCalibrationError

CALIB_FORMAT_VERSION = 1

PRIMITIVE_KINDS = ("color", "odor", "shape")


# --------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class ColorCalib:
    """pH -> Lab response curve plus relaxation and lock parameters.

    knots: ordered (pH, L*, a*, b*) rows spanning [2, 10].
    tau_bands: ((ph_lo, ph_hi, tau_seconds), ...) covering [2, 10].
    A small fast component (fast_fraction, fast_tau) models the visible
    onset that precedes the slow equilibration.
    """

    knots: tuple[tuple[float, float, float, float], ...]
    tau_bands: tuple[tuple[float, float, float], ...]
    fast_fraction: float = 0.05
    fast_tau: float = 0.005
    acid_lock_ph: float = 3.0
    base_lock_ph: float = 9.0
    acid_clamp_ph: float = 6.0
    base_clamp_ph: float = 8.0

    def __post_init__(self):
        phs = [k[0] for k in self.knots]
        if len(phs) < 2 or any(b <= a for a, b in zip(phs, phs[1:])):
            raise ConfigurationError("color knots must be strictly increasing in pH")
        if phs[0] > 2.0 or phs[-1] < 10.0:
            raise ConfigurationError("color knots must cover pH [2, 10]")
        if any(not 0.0 <= k[1] <= 100.0 for k in self.knots):
            raise ConfigurationError("L* must lie in [0, 100]")
        if any(t <= 0 for _, _, t in self.tau_bands):
            raise ConfigurationError("color time constants must be positive")

    def tau(self, ph: float) -> float:
        for lo, hi, t in self.tau_bands:
            if lo <= ph <= hi:
                return t
        raise OutOfCalibrationError(f"pH {ph} outside color tau bands")


@dataclass(frozen=True)
class OdorCalib:
    i_max: float = 1.0
    pka_eff: float = 7.38
    release_rate: float = 1e-4  # 1/s, reservoir consumption per unit emission
    reservoir_0: float = 1.0
    perception_threshold: float = 0.05
    onset_lag: float = 1.0  # s before any release is detectable
    onset_tau: float = 2.0
    suppress_ph: float = 9.0
    suppress_time: float = 30.0  # s of faint residual before full suppression
    residual_fraction: float = 0.8  # of perception_threshold, at transition start
    residual_tau: float = 10.0

    def __post_init__(self):
        if self.i_max <= 0 or self.release_rate <= 0:
            raise ConfigurationError("odor i_max and release_rate must be positive")
        if min(self.onset_tau, self.suppress_time, self.residual_tau) <= 0:
            raise ConfigurationError("odor time constants must be positive")


@dataclass(frozen=True)
class ShapeCalib:
    """Bimodal equilibrium bend-angle curve plus two-phase swelling dynamics.

    The equilibrium curve is a baseline plus two bumps with independent
    left/right widths (the asymmetry is what separates the sharp acid peak
    from its shallow shoulder).
    """

    base_angle: float = 10.0
    amp1: float = 70.0
    center1: float = 3.0
    width1_left: float = 2.03
    width1_right: float = 0.57
    amp2: float = 60.0
    center2: float = 8.0
    width2_left: float = 1.6
    width2_right: float = 1.1
    common_swell_angle: float = 33.0
    tau_common: float = 60.0
    handoff_time: float = 180.0  # time_in_phase at which swelling turns pH-dependent
    tau_ph: float = 180.0
    redeposit_gain: float = 6.0  # degrees of target shift per unit |delta pH|

    def __post_init__(self):
        if min(self.tau_common, self.tau_ph, self.handoff_time) <= 0:
            raise ConfigurationError("shape time constants must be positive")
        if self.amp1 <= 0 or self.amp2 <= 0:
            raise ConfigurationError("bump amplitudes must be positive")


@dataclass(frozen=True)
class CalibrationSet:
    color: ColorCalib
    odor: OdorCalib
    shape: ShapeCalib
    formulation_metadata: str = ""

    def __post_init__(self):
        n_max = len(local_maxima(self.shape))
        if n_max != 2:
            raise ConfigurationError(
                f"shape equilibrium curve must have exactly two local maxima on [2, 10], found {n_max}"
            )


def local_maxima(shape: ShapeCalib, resolution: float = 1e-3) -> list[float]:
    """Interior local maxima of the equilibrium-angle curve on [2, 10]."""
    maxima = []
    n = int(round(8.0 / resolution))
    prev = _two_bump(2.0, shape)
    cur = _two_bump(2.0 + resolution, shape)
    for i in range(2, n + 1):
        ph = 2.0 + i * resolution
        nxt = _two_bump(ph, shape)
        if cur > prev and cur >= nxt:
            maxima.append(ph - resolution)
        prev, cur = cur, nxt
    return maxima


def _two_bump(ph: float, shape: ShapeCalib) -> float:
    def bump(amp, center, wl, wr):
        w = wl if ph < center else wr
        return amp * math.exp(-((ph - center) ** 2) / (2.0 * w * w))

    return (
        shape.base_angle
        + bump(shape.amp1, shape.center1, shape.width1_left, shape.width1_right)
        + bump(shape.amp2, shape.center2, shape.width2_left, shape.width2_right)
    )


def calibration_to_dict(calib: CalibrationSet) -> dict:
    return {
        "format_version": CALIB_FORMAT_VERSION,
        "formulation_metadata": calib.formulation_metadata,
        "color": {
            "knots": [list(k) for k in calib.color.knots],
            "tau_bands": [list(b) for b in calib.color.tau_bands],
            "fast_fraction": calib.color.fast_fraction,
            "fast_tau": calib.color.fast_tau,
            "acid_lock_ph": calib.color.acid_lock_ph,
            "base_lock_ph": calib.color.base_lock_ph,
            "acid_clamp_ph": calib.color.acid_clamp_ph,
            "base_clamp_ph": calib.color.base_clamp_ph,
        },
        "odor": {k: getattr(calib.odor, k) for k in OdorCalib.__dataclass_fields__},
        "shape": {k: getattr(calib.shape, k) for k in ShapeCalib.__dataclass_fields__},
    }


def calibration_from_dict(doc: dict) -> CalibrationSet:
    if doc.get("format_version") != CALIB_FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported calibration format_version: {doc.get('format_version')!r}"
        )
    color = doc["color"]
    return CalibrationSet(
        color=ColorCalib(
            knots=tuple(tuple(k) for k in color["knots"]),
            tau_bands=tuple(tuple(b) for b in color["tau_bands"]),
            fast_fraction=color["fast_fraction"],
            fast_tau=color["fast_tau"],
            acid_lock_ph=color["acid_lock_ph"],
            base_lock_ph=color["base_lock_ph"],
            acid_clamp_ph=color["acid_clamp_ph"],
            base_clamp_ph=color["base_clamp_ph"],
        ),
        odor=OdorCalib(**doc["odor"]),
        shape=ShapeCalib(**doc["shape"]),
        formulation_metadata=doc.get("formulation_metadata", ""),
    )


def load_calibration(path: str | Path | None = None) -> CalibrationSet:
    """Load a .calib file; defaults to the shipped synthetic calibration."""
    if path is None:
        text = resources.files("phkit.data").joinpath("default_synthetic.calib").read_text()
    else:
        text = Path(path).read_text()
    return calibration_from_dict(json.loads(text))


def save_calibration(calib: CalibrationSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(calibration_to_dict(calib), indent=2) + "\n")


# --------------------------------------------------------------------------
# color


Lab = tuple[float, float, float]


@dataclass(frozen=True)
class ColorState:
    current: Lab
    target: Lab
    start: Lab  # color at the last deposition (relaxation origin)
    acid_locked: bool = False
    base_locked: bool = False
    applied_ph: Optional[float] = None
    elapsed_since_activation: float = 0.0


def color_equilibrium(ph: float, calib: CalibrationSet) -> Lab:
    """Piecewise-linear interpolation of the Lab knots; exact at knots."""
    knots = calib.color.knots
    if not knots[0][0] <= ph <= knots[-1][0]:
        raise OutOfCalibrationError(
            f"pH {ph} outside color calibration range [{knots[0][0]}, {knots[-1][0]}]"
        )
    for (p0, *lab0), (p1, *lab1) in zip(knots, knots[1:]):
        if p0 <= ph <= p1:
            t = 0.0 if p1 == p0 else (ph - p0) / (p1 - p0)
            return tuple(a + t * (b - a) for a, b in zip(lab0, lab1))
    raise OutOfCalibrationError(f"pH {ph} not bracketed by knots")  # pragma: no cover


def delta_e(a: Lab, b: Lab) -> float:
    """CIE76 color difference (Euclidean distance in Lab)."""
    return math.dist(a, b)


def fresh_color_state(calib: CalibrationSet, initial_ph: float = 7.0) -> ColorState:
    lab = color_equilibrium(initial_ph, calib)
    return ColorState(current=lab, target=lab, start=lab)


def _color_decay(t: float, tau: float, calib: ColorCalib, tau_scale: float) -> float:
    wf = calib.fast_fraction
    return wf * math.exp(-t / (calib.fast_tau * tau_scale)) + (1.0 - wf) * math.exp(
        -t / (tau * tau_scale)
    )


def color_step(
    state: ColorState,
    ph: float,
    dt: float,
    calib: CalibrationSet,
    tau_scale: float = 1.0,
) -> ColorState:
    """Advance the film dt seconds under the most recently applied pH.

    Passing a pH different from ``state.applied_ph`` counts as a new
    deposition: the target is recomputed (clamped by lock flags), the lock
    flags are updated from the raw deposited pH, and the relaxation clock
    restarts from the current color.
    """
    cc = calib.color
    if state.applied_ph is None or ph != state.applied_ph:
        acid_locked = state.acid_locked or ph <= cc.acid_lock_ph
        base_locked = state.base_locked or ph >= cc.base_lock_ph
        if state.acid_locked and state.base_locked:
            target = state.current  # both branches locked: film no longer responds
        else:
            eff = ph
            if state.acid_locked:
                eff = min(eff, cc.acid_clamp_ph)
            if state.base_locked:
                eff = max(eff, cc.base_clamp_ph)
            target = color_equilibrium(eff, calib)
        state = ColorState(
            current=state.current,
            target=target,
            start=state.current,
            acid_locked=acid_locked,
            base_locked=base_locked,
            applied_ph=ph,
            elapsed_since_activation=0.0,
        )
    if dt <= 0:
        return state
    t = state.elapsed_since_activation + dt
    decay = _color_decay(t, cc.tau(state.applied_ph), cc, tau_scale)
    current = tuple(
        tg + (st - tg) * decay for st, tg in zip(state.start, state.target)
    )
    return replace(state, current=current, elapsed_since_activation=t)


# --------------------------------------------------------------------------
# odor


@dataclass(frozen=True)
class OdorState:
    reservoir: float
    intensity: float = 0.0
    suppressed: bool = False
    applied_ph: Optional[float] = None
    elapsed_since_activation: float = 0.0
    suppressing: bool = False  # in the faint-residual transition window


def fresh_odor_state(calib: CalibrationSet) -> OdorState:
    return OdorState(reservoir=calib.odor.reservoir_0)


def odor_steady_intensity(ph: float, calib: CalibrationSet, reservoir: float = 1.0) -> float:
    return calib.odor.i_max * protonation_fraction(ph, calib.odor.pka_eff) * reservoir


def odor_step(
    state: OdorState,
    ph: float,
    dt: float,
    calib: CalibrationSet,
    tau_scale: float = 1.0,
) -> OdorState:
    """Advance the odor film; a changed pH counts as a new deposition.

    An alkaline deposition (pH >= suppress_ph) starts a faint-residual
    transition; once it has lasted suppress_time the film is permanently
    suppressed. Suppression does not consume the reservoir.
    """
    oc = calib.odor
    if state.applied_ph is None or ph != state.applied_ph:
        suppressing = state.suppressing
        if not state.suppressed and ph >= oc.suppress_ph:
            suppressing = True
        state = replace(
            state, applied_ph=ph, elapsed_since_activation=0.0, suppressing=suppressing
        )
    if dt <= 0:
        return state
    t = state.elapsed_since_activation + dt
    if state.suppressed:
        return replace(state, intensity=0.0, elapsed_since_activation=t)
    if state.suppressing:
        if t >= oc.suppress_time * tau_scale:
            return replace(
                state, intensity=0.0, suppressed=True, elapsed_since_activation=t
            )
        residual0 = oc.residual_fraction * oc.perception_threshold
        intensity = residual0 * math.exp(-t / (oc.residual_tau * tau_scale))
        return replace(state, intensity=intensity, elapsed_since_activation=t)
    lag = oc.onset_lag * tau_scale
    ramp = 0.0 if t <= lag else 1.0 - math.exp(-(t - lag) / (oc.onset_tau * tau_scale))
    frac = protonation_fraction(state.applied_ph, oc.pka_eff)
    reservoir = state.reservoir * math.exp(-oc.release_rate * frac * ramp * dt)
    intensity = oc.i_max * frac * reservoir * ramp
    return replace(
        state, reservoir=reservoir, intensity=intensity, elapsed_since_activation=t
    )


# --------------------------------------------------------------------------
# shape


PHASE_COMMON = "common-swell"
PHASE_PH = "ph-dependent"


@dataclass(frozen=True)
class ShapeState:
    angle: float = 0.0
    phase: str = PHASE_COMMON
    last_applied_ph: Optional[float] = None
    time_in_phase: float = 0.0
    target: float = 0.0


def fresh_shape_state() -> ShapeState:
    return ShapeState()


def shape_equilibrium_angle(ph: float, calib: CalibrationSet) -> float:
    """Equilibrium bend angle from the bimodal two-bump curve."""
    if not 2.0 <= ph <= 10.0:
        raise OutOfCalibrationError(f"pH {ph} outside shape calibration range [2, 10]")
    return _two_bump(ph, calib.shape)


def _relax(angle: float, target: float, dt: float, tau: float) -> float:
    return target + (angle - target) * math.exp(-dt / tau)


def shape_step(
    state: ShapeState,
    ph: float,
    dt: float,
    calib: CalibrationSet,
    tau_scale: float = 1.0,
) -> ShapeState:
    """Advance the strip; a changed pH counts as a new deposition.

    First deposition: the strip swells toward the common angle, then after
    handoff_time the target becomes the pH-dependent equilibrium angle.
    Re-deposition: the target shifts toward the new equilibrium by
    redeposit_gain * |new pH - old pH| degrees (clamped to [0, 180]).
    """
    sc = calib.shape
    if ph != state.last_applied_ph:
        if state.last_applied_ph is None:
            state = ShapeState(
                angle=state.angle,
                phase=PHASE_COMMON,
                last_applied_ph=ph,
                time_in_phase=0.0,
                target=sc.common_swell_angle,
            )
        else:
            eq = shape_equilibrium_angle(ph, calib)
            delta = abs(ph - state.last_applied_ph)
            direction = math.copysign(1.0, eq - state.angle) if eq != state.angle else 0.0
            target = min(180.0, max(0.0, state.angle + direction * sc.redeposit_gain * delta))
            state = ShapeState(
                angle=state.angle,
                phase=PHASE_PH,
                last_applied_ph=ph,
                time_in_phase=0.0,
                target=target,
            )
    if dt <= 0:
        return state
    if state.phase == PHASE_COMMON:
        handoff = sc.handoff_time * tau_scale
        remaining = handoff - state.time_in_phase
        if dt < remaining:
            angle = _relax(state.angle, sc.common_swell_angle, dt, sc.tau_common * tau_scale)
            return replace(state, angle=angle, time_in_phase=state.time_in_phase + dt)
        # advance exactly to the handoff, switch phase, then use the remainder
        angle = _relax(state.angle, sc.common_swell_angle, remaining, sc.tau_common * tau_scale)
        state = ShapeState(
            angle=angle,
            phase=PHASE_PH,
            last_applied_ph=state.last_applied_ph,
            time_in_phase=0.0,
            target=shape_equilibrium_angle(state.last_applied_ph, calib),
        )
        dt -= remaining
        if dt <= 0:
            return state
    angle = _relax(state.angle, state.target, dt, sc.tau_ph * tau_scale)
    return replace(state, angle=angle, time_in_phase=state.time_in_phase + dt)


# --------------------------------------------------------------------------
# composites


# combinations measured to perform well; everything else carries a warning
_OPTIMAL = {
    ("layer", ("color", "odor")),
    ("panel", ("shape", "odor")),
    ("panel", ("odor", "shape")),
    ("panel", ("odor", "color")),
    ("mix", ("color", "odor")),
    ("mix", ("odor", "color")),
}

COMPOSITE_WARNING = (
    "combination outside the verified set: confirm it reacts as intended, "
    "holds together structurally, and responds on a human-perceptible timescale"
)


@dataclass(frozen=True)
class Composite:
    layers: tuple[tuple[str, CalibrationSet], ...]
    method: str
    panel_regions: Optional[tuple[str, ...]] = None
    warnings: tuple[str, ...] = ()


def make_composite(
    parts: list[tuple[str, CalibrationSet]],
    method: str,
    panel_regions: Optional[list[str]] = None,
) -> Composite:
    """Combine 1-3 primitives by layering, paneling, or mixing."""
    if method not in ("layer", "panel", "mix"):
        raise InvalidCompositeError(f"unknown composite method: {method!r}")
    if not 1 <= len(parts) <= 3:
        raise InvalidCompositeError("a composite takes 1 to 3 parts")
    kinds = tuple(kind for kind, _ in parts)
    for kind in kinds:
        if kind not in PRIMITIVE_KINDS:
            raise InvalidCompositeError(f"unknown primitive kind: {kind!r}")
    if method == "mix" and len(set(kinds)) != len(kinds):
        raise InvalidCompositeError("duplicate primitive kinds within one mix")
    warnings = ()
    if len(parts) > 1 and (method, kinds) not in _OPTIMAL:
        warnings = (COMPOSITE_WARNING,)
    return Composite(
        layers=tuple(parts),
        method=method,
        panel_regions=tuple(panel_regions) if panel_regions else None,
        warnings=warnings,
    )


def fresh_state(kind: str, calib: CalibrationSet):
    if kind == "color":
        return fresh_color_state(calib)
    if kind == "odor":
        return fresh_odor_state(calib)
    if kind == "shape":
        return fresh_shape_state()
    raise ConfigurationError(f"unknown primitive kind: {kind!r}")


def step_state(state, ph: float, dt: float, calib: CalibrationSet, tau_scale: float = 1.0):
    if isinstance(state, ColorState):
        return color_step(state, ph, dt, calib, tau_scale)
    if isinstance(state, OdorState):
        return odor_step(state, ph, dt, calib, tau_scale)
    if isinstance(state, ShapeState):
        return shape_step(state, ph, dt, calib, tau_scale)
    raise ConfigurationError(f"unknown state type: {type(state).__name__}")
