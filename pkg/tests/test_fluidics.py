from dataclasses import replace

import numpy as np
import pytest

from phkit.chemistry import BUILTIN, Solution, equilibrium_ph, mix, stock_reservoirs
from phkit.errors import ConfigurationError, StabilityError
from phkit.fluidics import (
    diffuse_step,
    gradiator_profile,
    make_channel,
    ph_at_cells,
    ticker_arrival_times,
    total_moles,
    with_left_boundary,
)

CITRIC = BUILTIN["citric-acid"]
NAOH = BUILTIN["sodium-hydroxide"]


def closed_channel(n=33, length=0.002, fill_conc=0.01):
    fill = Solution(contents={CITRIC: fill_conc})
    ch = make_channel(length, 0.0006, n, fill, None, None, diffusivity=1e-9)
    # perturb the interior so diffusion actually transports something
    field = ch.field.copy()
    field[:, : n // 2] *= 0.25
    return replace(ch, field=field)


def test_closed_channel_conserves_moles_over_1e4_steps():
    ch = closed_channel()
    before = total_moles(ch)
    dt = 0.4 * ch.max_stable_dt
    for _ in range(10_000):
        ch = diffuse_step(ch, dt)
    after = total_moles(ch)
    assert np.all(np.abs(after - before) <= 1e-9 * np.abs(before))


def test_closed_channel_maximum_principle():
    ch = closed_channel()
    lo, hi = ch.field.min(), ch.field.max()
    dt = 0.4 * ch.max_stable_dt
    for _ in range(500):
        ch = diffuse_step(ch, dt)
        assert ch.field.min() >= lo - 1e-15
        assert ch.field.max() <= hi + 1e-15


def test_cfl_violation_raises():
    ch = closed_channel()
    with pytest.raises(StabilityError) as exc:
        diffuse_step(ch, 10.0 * ch.max_stable_dt)
    assert exc.value.dt_max == pytest.approx(ch.max_stable_dt)


def test_closed_channel_relaxes_to_uniform():
    ch = closed_channel(n=17)
    mean = ch.field.mean(axis=1)
    dt = 0.4 * ch.max_stable_dt
    for _ in range(20_000):
        ch = diffuse_step(ch, dt)
    assert np.allclose(ch.field, mean[:, None], rtol=1e-6, atol=1e-12)


def test_grid_refinement_converges():
    # fixed-boundary steady state is linear; refining the grid must not change it
    acid, base = stock_reservoirs()
    results = []
    for n in (17, 33):
        fill = Solution()
        ch = make_channel(0.002, 0.0006, n, fill, acid, base, diffusivity=1e-8)
        dt = 0.4 * ch.max_stable_dt
        t = 0.0
        while t < 400.0:
            ch = diffuse_step(ch, dt)
            t += dt
        results.append(float(ph_at_cells(ch)[n // 2]))
    assert abs(results[0] - results[1]) < 0.02


def test_ticker_arrival_scales_4x_with_doubled_length():
    acid, _ = stock_reservoirs()
    times = {}
    for length in (0.002, 0.004):
        ch = make_channel(length, 0.0006, 33, Solution(), None, None, diffusivity=1e-8)
        ch = with_left_boundary(ch, acid)
        (t,) = ticker_arrival_times(ch, [1.0], (6.0, 8.0))
        times[length] = t
    ratio = times[0.004] / times[0.002]
    assert abs(ratio - 4.0) <= 0.2


def test_ticker_arrival_monotone_in_position():
    acid, _ = stock_reservoirs()
    ch = make_channel(0.002, 0.0006, 33, Solution(), None, None, diffusivity=1e-8)
    ch = with_left_boundary(ch, acid)
    markers = [0.25, 0.5, 0.75, 1.0]
    times = ticker_arrival_times(ch, markers, (6.0, 8.0))
    assert all(b > a for a, b in zip(times, times[1:]))


def test_ticker_timeout_sentinel():
    acid, _ = stock_reservoirs()
    ch = make_channel(0.002, 0.0006, 33, Solution(), None, None, diffusivity=1e-8)
    ch = with_left_boundary(ch, acid)
    times = ticker_arrival_times(ch, [1.0], (6.0, 8.0), horizon=0.5)
    assert times[0] == float("inf")


def test_ticker_requires_active_boundary():
    ch = make_channel(0.002, 0.0006, 33, Solution(), None, None, diffusivity=1e-8)
    with pytest.raises(ConfigurationError):
        ticker_arrival_times(ch, [0.5], (6.0, 8.0))


def test_gradiator_endpoints_match_reservoirs():
    acid, base = stock_reservoirs()
    ch = make_channel(0.002, 0.0006, 41, Solution(), acid, base, diffusivity=1e-9)
    profile = gradiator_profile(ch, acid, base)
    assert profile.ph_values[0] == pytest.approx(equilibrium_ph(acid).value, abs=1e-3)
    assert profile.ph_values[-1] == pytest.approx(equilibrium_ph(base).value, abs=1e-3)


def test_gradiator_midpoint_is_equal_volume_mix():
    acid, base = stock_reservoirs()
    ch = make_channel(0.002, 0.0006, 41, Solution(), acid, base, diffusivity=1e-9)
    profile = gradiator_profile(ch, acid, base)
    mid = profile.ph_values[len(profile.ph_values) // 2]
    mixed = equilibrium_ph(mix(acid, 1.0, base, 1.0)).value
    assert mid == pytest.approx(mixed, abs=0.02)


def test_gradiator_equal_ends_uniform():
    acid, _ = stock_reservoirs()
    ch = make_channel(0.002, 0.0006, 21, Solution(), acid, acid, diffusivity=1e-9)
    profile = gradiator_profile(ch, acid, acid)
    assert max(profile.ph_values) - min(profile.ph_values) < 1e-9


def test_transient_approaches_gradiator_steady():
    acid, base = stock_reservoirs()
    ch = make_channel(0.001, 0.0006, 21, Solution(), acid, base, diffusivity=1e-8)
    steady = gradiator_profile(ch, acid, base)
    dt = 0.4 * ch.max_stable_dt
    t = 0.0
    while t < 200.0:
        ch = diffuse_step(ch, dt)
        t += dt
    transient = ph_at_cells(ch)
    assert np.max(np.abs(transient - np.array(steady.ph_values))) < 1e-3
