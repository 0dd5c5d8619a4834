import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import oracle_delta_k
from sfwmtools.dispersion import energy_mismatch
from sfwmtools.errors import NoSolution
from sfwmtools.phasematch import (
    classical_fwm_delta_k,
    classical_fwm_signal,
    delta_k,
    phasematch_curve,
    solve_signal_idler,
)

B_SET = (1.0e-4, 1.64e-4, 2.5e-4, 4.0e-4)


def brute_force_signal(pump, b, step=0.01):
    """First sign change of the oracle delta_k scanning down from pump - 1 nm."""
    grid = np.arange(pump - 1.0, pump / 2 + 1.0, -step)
    idl = 1.0 / (2.0 / pump - 1.0 / grid)
    grid = grid[idl < 3700]
    v = oracle_delta_k(pump, grid, b)
    j = np.nonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0][0]
    return grid[j]


def test_degenerate_identity(silica):
    assert delta_k(silica, 957.0, 957.0, 957.0, 0.0) == 0.0


def test_matches_independent_oracle(silica):
    got = delta_k(silica, 957.0, 830.0, 1129.886202, 1.64e-4)
    assert got == pytest.approx(oracle_delta_k(957.0, 830.0, 1.64e-4), abs=1e-3)


def test_operating_point_inside_central_lobe(silica):
    idl = 1.0 / (2 / 957 - 1 / 830)
    assert abs(delta_k(silica, 957.0, 830.0, idl, 1.64e-4)) < 2 * math.pi / 24.4e-3


@given(st.floats(0, 5e-4), st.floats(0, 1e-4))
def test_linear_in_birefringence(b, d):
    from sfwmtools.dispersion import fused_silica

    m = fused_silica()
    shift = delta_k(m, 957.0, 830.0, 1129.9, b + d) - delta_k(m, 957.0, 830.0, 1129.9, b)
    assert shift == pytest.approx(2 * 2 * math.pi * d / 957e-9, rel=1e-6, abs=1e-6)


@given(st.floats(700, 1100), st.floats(0.7, 0.99))
def test_signal_idler_symmetry(pump, frac):
    from sfwmtools.dispersion import fused_silica, idler_from_energy_conservation

    m = fused_silica()
    s = pump * frac
    i = idler_from_energy_conservation(pump, s)
    if i > 3700:
        return
    assert delta_k(m, pump, s, i, 2e-4) == pytest.approx(delta_k(m, pump, i, s, 2e-4), rel=1e-12, abs=1e-9)


def test_operating_point(silica):
    p = solve_signal_idler(silica, 957.0, 1.64e-4)
    assert p.signal_nm == pytest.approx(830, abs=5)
    assert p.idler_nm == pytest.approx(1130, abs=5)
    assert abs(p.delta_k) < 1e-6
    assert abs(energy_mismatch(p.pump_nm, p.signal_nm, p.idler_nm)) < 1e-12


def test_no_solution_without_birefringence(silica):
    with pytest.raises(NoSolution) as exc:
        solve_signal_idler(silica, 957.0, 0.0)
    assert exc.value.values[0] < 0 and exc.value.values[1] < 0


@pytest.mark.parametrize("b", B_SET)
def test_solver_agrees_with_brute_force(silica, b):
    ref = brute_force_signal(957.0, b)
    assert solve_signal_idler(silica, 957.0, b).signal_nm == pytest.approx(ref, abs=0.011)


def test_larger_b_wider_separation(silica):
    base = solve_signal_idler(silica, 957.0, 1.64e-4)
    wide = solve_signal_idler(silica, 957.0, 4.0e-4)
    assert wide.separation_nm > base.separation_nm
    # brute-force oracle agrees on the ordering
    assert brute_force_signal(957.0, 4e-4) < brute_force_signal(957.0, 1.64e-4)


def test_curve_passes_operating_point(silica):
    curve = phasematch_curve(silica, 1.64e-4, (900, 1000), 1.0)
    assert len(curve) == 101
    p957 = next(p for p in curve if p.pump_nm == 957.0)
    assert p957.signal_nm == pytest.approx(830, abs=5)
    assert p957.idler_nm == pytest.approx(1130, abs=5)


def test_curve_ordering(silica):
    curves = [phasematch_curve(silica, b, (900, 1000), 5.0) for b in B_SET]
    for pts in zip(*curves):
        seps = [p.separation_nm for p in pts]
        assert all(a < b for a, b in zip(seps, seps[1:]))


@pytest.mark.parametrize("b", B_SET)
def test_curve_continuity(silica, b):
    curve = phasematch_curve(silica, b, (900, 1000), 1.0)
    assert not any(p.is_gap for p in curve)
    assert np.max(np.abs(np.diff([p.signal_nm for p in curve]))) < 10


def test_curve_empty_range(silica):
    assert phasematch_curve(silica, 1.64e-4, (1000, 900), 1.0) == []


def test_curve_gap_markers(silica):
    curve = phasematch_curve(silica, 0.0, (950, 960), 5.0)
    assert len(curve) == 3 and all(p.is_gap for p in curve)


@settings(max_examples=50, deadline=None)
@given(st.floats(900, 1000), st.sampled_from(B_SET))
def test_solutions_are_roots(pump, b):
    p = solve_signal_idler(None, pump, b)
    assert abs(p.delta_k) < 1e-6
    assert p.signal_nm <= p.pump_nm <= p.idler_nm


def test_classical_seeded_signal():
    assert classical_fwm_signal(843.0, 976.0) == pytest.approx(741.9008115, rel=1e-9)
    assert classical_fwm_signal(957.0, 957.0) == pytest.approx(957.0)
    scan = classical_fwm_signal(np.arange(838.0, 848.5, 0.5), 976.0)
    assert np.all(np.diff(scan) > 0)


def test_classical_band_phase_matches_in_reported_range(silica):
    # for B in the reported classical interval delta_k changes sign inside the 838-848 nm scan
    for b in (1.9e-4, 2.13e-4):
        _, dk = classical_fwm_delta_k(silica, np.array([838.0, 848.0]), 976.0, b)
        assert dk[0] < 0 < dk[1]
