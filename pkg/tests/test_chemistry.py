import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_ph_solution
from phkit.chemistry import (
    BUILTIN,
    Solution,
    charge_balance_residual,
    equilibrium_ph,
    mix,
    protonation_fraction,
    reservoir_ratio_for_target,
    solution_from_dict,
    solution_to_dict,
    stock_reservoirs,
)
from phkit.errors import ConfigurationError, UnreachableSetpointError

NON_SOLVENT = [n for n in BUILTIN if BUILTIN[n].kind != "solvent"]


def sol(**conc):
    return Solution(contents={BUILTIN[k.replace("_", "-")]: v for k, v in conc.items()})


def test_pure_water_is_neutral():
    assert equilibrium_ph(Solution()).value == pytest.approx(7.0, abs=1e-6)


def test_citric_acid_10mM():
    assert equilibrium_ph(sol(citric_acid=0.01)).value == pytest.approx(2.6208, abs=1e-3)


def test_strong_acid_dilute():
    # 1e-4 M monoprotic strong acid: essentially fully dissociated
    assert equilibrium_ph(sol(hydrochloric_acid=1e-4)).value == pytest.approx(4.0, abs=1e-3)


def test_strong_base_dilute():
    assert equilibrium_ph(sol(sodium_hydroxide=1e-4)).value == pytest.approx(10.0, abs=1e-3)


def test_residual_is_zero_at_equilibrium():
    s = sol(citric_acid=0.003, sodium_bicarbonate=0.001)
    ph = equilibrium_ph(s).value
    assert abs(charge_balance_residual(s, ph)) < 1e-9


def test_residual_is_monotone_in_h():
    s = sol(citric_acid=0.003, sodium_bicarbonate=0.001)
    phs = np.linspace(1.0, 13.0, 200)
    res = np.array([charge_balance_residual(s, p) for p in phs])
    # residual as a function of pH is decreasing (f increasing in h)
    assert np.all(np.diff(res) < 0)


def test_oracle_equivalence_100_random_solutions():
    rng = np.random.default_rng(123)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        chosen = rng.choice(NON_SOLVENT, size=k, replace=False)
        s = Solution(contents={BUILTIN[n]: float(10 ** rng.uniform(-5, -1)) for n in chosen})
        assert equilibrium_ph(s).value == pytest.approx(grid_ph_solution(s), abs=1e-3)


def test_solver_bit_reproducible():
    s = sol(citric_acid=0.007, sodium_hydroxide=0.002)
    assert equilibrium_ph(s).value == equilibrium_ph(s).value


def test_mix_conserves_moles_exactly():
    a = sol(citric_acid=0.01)
    b = sol(sodium_hydroxide=0.004, sodium_bicarbonate=0.002)
    m = mix(a, 0.3, b, 0.7)
    for sp, conc in m.contents.items():
        moles_in = a.contents.get(sp, 0.0) * 0.3 + b.contents.get(sp, 0.0) * 0.7
        assert conc * (0.3 + 0.7) == moles_in


def test_mix_equal_volumes_strong_acid_base():
    acid = sol(hydrochloric_acid=0.01)  # pH 2
    base = sol(sodium_hydroxide=1e-4)  # pH 10
    ph = equilibrium_ph(mix(acid, 1.0, base, 1.0)).value
    assert ph == pytest.approx(2.3054, abs=1e-3)


def test_mix_identical_solutions_is_identity():
    a = sol(citric_acid=0.01)
    m = mix(a, 1.0, a, 1.0)
    assert equilibrium_ph(m).value == equilibrium_ph(a).value


def test_mix_rejects_zero_total_volume():
    a = sol(citric_acid=0.01)
    with pytest.raises(ConfigurationError):
        mix(a, 0.0, a, 0.0)


def test_reservoir_ratio_endpoints():
    acid, base = stock_reservoirs()
    ph_a = equilibrium_ph(acid).value
    ph_b = equilibrium_ph(base).value
    assert reservoir_ratio_for_target(acid, base, ph_a) == 0.0
    assert reservoir_ratio_for_target(acid, base, ph_b) == 1.0


def test_reservoir_ratio_matches_grid_scan():
    # a 1e-4-resolution scan over r can only locate the containing grid cell
    acid, base = stock_reservoirs()
    target = 7.0
    r = reservoir_ratio_for_target(acid, base, target, tol=1e-4)
    grid = np.arange(0.0, 1.0 + 1e-12, 1e-4)
    errs = [abs(equilibrium_ph(mix(acid, 1.0 - g, base, g)).value - target) for g in grid]
    r_grid = grid[int(np.argmin(errs))]
    assert abs(r - r_grid) <= 1e-4


def test_reservoir_ratio_unreachable():
    acid, base = stock_reservoirs()
    with pytest.raises(UnreachableSetpointError) as exc:
        reservoir_ratio_for_target(acid, base, 12.0)
    assert exc.value.target == 12.0
    assert exc.value.ph_min < exc.value.ph_max


def test_protonation_fraction_midpoint_and_limits():
    assert protonation_fraction(7.38, 7.38) == pytest.approx(0.5)
    assert protonation_fraction(2.0, 7.38) > 0.999
    assert protonation_fraction(12.0, 7.38) < 1e-4


def test_solution_dict_round_trip():
    s = sol(citric_acid=0.01, sodium_hydroxide=0.002)
    doc = solution_to_dict(s)
    back = solution_from_dict(doc)
    assert back == s


def test_unknown_species_rejected():
    with pytest.raises(ConfigurationError):
        solution_from_dict({"species": {"unobtainium": 0.1}, "volume": 1.0})


# ---------------------------------------------------------------------------
# property-based invariants


@settings(max_examples=50, deadline=None)
@given(conc=st.floats(min_value=1e-6, max_value=0.5))
def test_more_acid_never_raises_ph(conc):
    lo = equilibrium_ph(sol(citric_acid=conc)).value
    hi = equilibrium_ph(sol(citric_acid=conc * 2)).value
    assert hi <= lo + 1e-9


@settings(max_examples=50, deadline=None)
@given(
    conc=st.floats(min_value=1e-6, max_value=0.1),
    frac=st.floats(min_value=0.01, max_value=0.99),
)
def test_mix_ph_between_endpoint_phs(conc, frac):
    a = sol(hydrochloric_acid=conc)
    b = sol(sodium_hydroxide=conc)
    ph_a = equilibrium_ph(a).value
    ph_b = equilibrium_ph(b).value
    m = equilibrium_ph(mix(a, 1.0 - frac, b, frac)).value
    assert min(ph_a, ph_b) - 1e-9 <= m <= max(ph_a, ph_b) + 1e-9


@settings(max_examples=30, deadline=None)
@given(ph=st.floats(min_value=0.0, max_value=14.0), pka=st.floats(min_value=1.0, max_value=13.0))
def test_protonation_fraction_bounded_and_monotone(ph, pka):
    f = protonation_fraction(ph, pka)
    assert 0.0 <= f <= 1.0
    assert protonation_fraction(ph + 0.1, pka) <= f
