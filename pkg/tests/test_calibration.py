from dataclasses import replace

import numpy as np
import pytest

from phkit.calibration import (
    MeasurementTable,
    damped_least_squares,
    fit_calibration,
    odor_logistic,
    odor_logistic_jacobian,
    parse_table,
    two_bump_jacobian,
    two_bump_value,
)
from phkit.errors import ConfigurationError, DataError, UnderDeterminedFitError
from phkit.materials import odor_steady_intensity, shape_equilibrium_angle

SHAPE_PARAM_NAMES = (
    "amp1", "center1", "width1_left", "width1_right",
    "amp2", "center2", "width2_left", "width2_right",
)


def perturbed(calib):
    return replace(
        calib,
        shape=replace(
            calib.shape,
            amp1=calib.shape.amp1 * 1.2,
            center1=calib.shape.center1 + 0.3,
            amp2=calib.shape.amp2 * 0.85,
            center2=calib.shape.center2 - 0.25,
            width1_left=2.4,
            width1_right=0.7,
            width2_left=1.3,
            width2_right=0.9,
        ),
    )


def shape_table(calib, noise=0.0, seed=None):
    rng = np.random.default_rng(seed)
    phs = np.linspace(2.0, 10.0, 25)
    rows = tuple(
        (float(p), float(shape_equilibrium_angle(p, calib) + (rng.normal(0.0, noise) if noise else 0.0)))
        for p in phs
    )
    return MeasurementTable("shape", rows)


# ---------------------------------------------------------------------------
# table plumbing


def test_parse_table_with_and_without_time():
    t = parse_table("ph,angle\n2,70\n3,80\n4,30\n", "shape")
    assert not t.has_time and len(t.rows) == 3
    t = parse_table("ph,intensity,time\n2,0.1,0\n3,0.2,1\n4,0.3,2\n", "odor")
    assert t.has_time


def test_parse_table_rejects_bad_header():
    with pytest.raises(ConfigurationError):
        parse_table("ph,banana\n2,1\n3,1\n4,1\n", "shape")


def test_table_rejects_out_of_range_ph():
    with pytest.raises(DataError) as exc:
        MeasurementTable("shape", ((2.0, 70.0), (15.0, 30.0), (4.0, 30.0)))
    assert exc.value.row == 1


def test_table_rejects_duplicate_keys():
    with pytest.raises(DataError):
        MeasurementTable("shape", ((2.0, 70.0), (2.0, 71.0), (4.0, 30.0)))


def test_table_needs_three_distinct_ph():
    with pytest.raises(ConfigurationError):
        MeasurementTable("shape", ((2.0, 70.0), (4.0, 30.0)))


# ---------------------------------------------------------------------------
# optimizer core


def test_damped_least_squares_monotone_accepted_costs():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 40)
    y = 3.0 * x + 1.0 + rng.normal(0, 0.05, 40)

    def resid(p):
        return p[0] * x + p[1] - y

    def jac(_p):
        return np.stack([x, np.ones_like(x)], axis=1)

    p, rep = damped_least_squares(resid, jac, np.array([0.0, 0.0]))
    costs = rep["accepted_costs"]
    assert all(b < a for a, b in zip(costs, costs[1:]))
    assert p[0] == pytest.approx(3.0, abs=0.1)


# ---------------------------------------------------------------------------
# Jacobians vs central differences


def test_two_bump_jacobian_matches_finite_differences():
    rng = np.random.default_rng(42)
    for _ in range(20):
        p = np.array([
            rng.uniform(40, 90), rng.uniform(2.5, 4.5), rng.uniform(0.5, 2.5), rng.uniform(0.4, 1.5),
            rng.uniform(40, 80), rng.uniform(7, 9), rng.uniform(0.8, 2.0), rng.uniform(0.6, 1.5),
        ])
        ph = rng.uniform(2, 10, size=15)
        # the width switch at each bump center makes the curve only piecewise
        # smooth there; keep evaluation points off the kink
        ph = ph[np.min(np.abs(ph[:, None] - p[[1, 5]][None, :]), axis=1) > 0.05]
        jac = two_bump_jacobian(ph, p)
        for j in range(8):
            h = 1e-5 * max(abs(p[j]), 1.0)
            pp, pm = p.copy(), p.copy()
            pp[j] += h
            pm[j] -= h
            fd = (two_bump_value(ph, pp, 10.0) - two_bump_value(ph, pm, 10.0)) / (2 * h)
            assert np.max(np.abs(jac[:, j] - fd) / np.maximum(np.abs(fd), 1e-3)) <= 1e-6


def test_odor_jacobian_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = np.array([rng.uniform(0.5, 2.0), rng.uniform(6, 9)])
        ph = rng.uniform(2, 12, size=10)
        jac = odor_logistic_jacobian(ph, p)
        for j in range(2):
            h = 1e-5 * max(abs(p[j]), 1.0)
            pp, pm = p.copy(), p.copy()
            pp[j] += h
            pm[j] -= h
            fd = (odor_logistic(ph, pp) - odor_logistic(ph, pm)) / (2 * h)
            assert np.max(np.abs(jac[:, j] - fd) / np.maximum(np.abs(fd), 1e-3)) <= 1e-6


# ---------------------------------------------------------------------------
# round trips


def test_shape_noiseless_round_trip(calib):
    fitted, report = fit_calibration([shape_table(calib)], perturbed(calib))
    for name in SHAPE_PARAM_NAMES:
        gen = getattr(calib.shape, name)
        got = getattr(fitted.shape, name)
        assert abs(got - gen) <= 1e-6 * max(abs(gen), 1.0), name
    assert report["shape"]["cost_after"] < report["shape"]["cost_before"]


def test_odor_noiseless_round_trip(calib):
    rows = tuple(
        (float(p), float(odor_steady_intensity(p, calib))) for p in np.linspace(3, 11, 9)
    )
    start = replace(calib, odor=replace(calib.odor, i_max=calib.odor.i_max * 1.3, pka_eff=6.5))
    fitted, _ = fit_calibration([MeasurementTable("odor", rows)], start)
    assert fitted.odor.i_max == pytest.approx(calib.odor.i_max, rel=1e-6)
    assert fitted.odor.pka_eff == pytest.approx(calib.odor.pka_eff, rel=1e-6)


def test_color_knots_taken_directly(calib):
    rows = tuple((float(k[0]), k[1], k[2], k[3]) for k in calib.color.knots)
    shifted = replace(
        calib, color=replace(calib.color, knots=tuple((p, 50.0, 0.0, 0.0) for p, *_ in calib.color.knots))
    )
    fitted, _ = fit_calibration([MeasurementTable("color", rows)], shifted)
    assert fitted.color.knots == calib.color.knots


def test_shape_noisy_centers_within_band(calib):
    start = perturbed(calib)
    for seed in range(50):
        fitted, _ = fit_calibration([shape_table(calib, noise=2.0, seed=seed)], start)
        assert abs(fitted.shape.center1 - calib.shape.center1) <= 0.2
        assert abs(fitted.shape.center2 - calib.shape.center2) <= 0.2


def test_under_determined_shape_fit_raises(calib):
    rows = tuple(
        (float(p), float(shape_equilibrium_angle(p, calib))) for p in (2.0, 5.0, 9.0)
    )
    with pytest.raises(UnderDeterminedFitError):
        fit_calibration([MeasurementTable("shape", rows)], calib)


def test_unfitted_sections_retained(calib):
    start = perturbed(calib)
    fitted, _ = fit_calibration([shape_table(calib)], start)
    assert fitted.color == start.color
    assert fitted.odor == start.odor
