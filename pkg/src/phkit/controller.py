"""Closed-loop two-reservoir mixer: reach a pH setpoint, then deposit.

The control law is noise-tolerant bisection on the pump ratio. A bracket
[lo, hi] is maintained on the ratio; measurements confidently above or
below the setpoint move the matching end, while measurements inside the
noise band only shrink the bracket around the measured ratio. The sensor
is the true mixed pH plus seeded Gaussian noise, delayed by a fixed number
of iterations. Everything is reproducible from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chemistry import Solution, equilibrium_ph, mix
from .errors import ConfigurationError, DepositGuardError, UnreachableSetpointError

DEFAULT_DROPLET_UL = 0.75


@dataclass(frozen=True)
class ControllerConfig:
    setpoint: float
    tolerance: float = 0.1
    max_iterations: int = 50
    sensor_noise_sigma: float = 0.05
    sensor_lag: int = 1
    ratio_gain: float = 0.5  # bracket shrink factor on ambiguous readings
    rng_seed: int = 0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if self.sensor_noise_sigma < 0:
            raise ConfigurationError("sensor_noise_sigma must be non-negative")
        if not 0.0 < self.ratio_gain < 1.0:
            raise ConfigurationError("ratio_gain must lie in (0, 1)")


@dataclass(frozen=True)
class ControllerTrace:
    """Iteration log of one setpoint run: (pump_ratio, true_ph, measured_ph)."""

    iterations: tuple[tuple[float, float, float], ...]
    converged: bool
    final_solution: Solution
    setpoint: float
    rng_seed: int


@dataclass(frozen=True)
class DepositionEvent:
    mode: str  # global | local | discrete
    solution: Solution
    targets: Optional[object]  # None (whole scene), channel id, or [(x, y, uL)]
    time: float = 0.0


def run_to_setpoint(config: ControllerConfig, acid: Solution, base: Solution) -> ControllerTrace:
    """Iterate the mixer until the measured pH holds the setpoint.

    Converges when the measurement has been within tolerance for two
    consecutive reads; returns a non-converged trace (not an error) when
    max_iterations runs out.
    """
    ph_acid = float(equilibrium_ph(acid))
    ph_base = float(equilibrium_ph(base))
    if not ph_acid <= config.setpoint <= ph_base:
        raise UnreachableSetpointError(config.setpoint, ph_acid, ph_base)

    rng = np.random.default_rng(config.rng_seed)
    lo, hi = 0.0, 1.0
    history: list[tuple[float, float]] = []  # (ratio, true_ph) per iteration
    iterations: list[tuple[float, float, float]] = []
    in_band = 0
    converged = False
    solution = None
    hold_ratio: Optional[float] = None  # pump held here while confirming
    # a setpoint equal to a reservoir's own pH needs no search at all
    if abs(config.setpoint - ph_acid) < 1e-9:
        hold_ratio = 0.0
    elif abs(config.setpoint - ph_base) < 1e-9:
        hold_ratio = 1.0

    for k in range(config.max_iterations):
        r = hold_ratio if hold_ratio is not None else 0.5 * (lo + hi)
        solution = mix(acid, 1.0 - r, base, r)
        true_ph = float(equilibrium_ph(solution))
        history.append((r, true_ph))

        lag_idx = max(0, k - config.sensor_lag)
        r_meas, ph_meas_true = history[lag_idx]
        measured = ph_meas_true + config.sensor_noise_sigma * float(rng.standard_normal())
        iterations.append((r, true_ph, measured))

        err = measured - config.setpoint
        if abs(err) <= config.tolerance:
            in_band += 1
            if in_band >= 2:
                converged = True
                break
            hold_ratio = r_meas
        else:
            in_band = 0
            hold_ratio = None

        confident = abs(err) > 2.0 * config.sensor_noise_sigma
        if confident:
            if lo < r_meas < hi:
                if err < 0:
                    lo = r_meas
                else:
                    hi = r_meas
            # a stale/out-of-bracket ratio carries no usable side information
        else:
            half = 0.5 * (hi - lo) * config.ratio_gain
            lo = max(lo, r_meas - half)
            hi = min(hi, r_meas + half)
        if hi - lo < 1e-13:
            # bracket collapsed without convergence (noise misled a move);
            # re-open it around the collapse point
            lo = max(0.0, lo - 0.05)
            hi = min(1.0, hi + 0.05)

    return ControllerTrace(
        iterations=tuple(iterations),
        converged=converged,
        final_solution=solution,
        setpoint=config.setpoint,
        rng_seed=config.rng_seed,
    )


def deposit(
    trace: ControllerTrace,
    mode: str,
    targets: Optional[object] = None,
    time: float = 0.0,
    force: bool = False,
) -> DepositionEvent:
    """Package the trace's final solution as a deposition event.

    Refuses a non-converged trace unless ``force`` is set.
    """
    if mode not in ("global", "local", "discrete"):
        raise ConfigurationError(f"unknown deposition mode: {mode!r}")
    if not trace.converged and not force:
        raise DepositGuardError(
            "controller trace did not converge; pass force=True to deposit anyway"
        )
    if mode == "discrete":
        if not targets:
            raise ConfigurationError("discrete deposition requires target cells")
        norm = []
        for t in targets:
            if len(t) == 2:
                x, y = t
                vol = DEFAULT_DROPLET_UL
            else:
                x, y, vol = t
            if vol <= 0:
                raise ConfigurationError("droplet volume must be positive")
            norm.append((int(x), int(y), float(vol)))
        targets = tuple(norm)
    return DepositionEvent(mode=mode, solution=trace.final_solution, targets=targets, time=time)


def trace_to_dict(trace: ControllerTrace) -> dict:
    from .chemistry import solution_to_dict

    return {
        "setpoint": trace.setpoint,
        "rng_seed": trace.rng_seed,
        "converged": trace.converged,
        "iterations": [
            {"pump_ratio": r, "true_ph": t, "measured_ph": m}
            for r, t, m in trace.iterations
        ],
        "final_solution": solution_to_dict(trace.final_solution),
    }
