import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfwmtools.dispersion import (
    SellmeierModel,
    energy_mismatch,
    idler_from_energy_conservation,
    refractive_index,
    wavenumber,
)
from sfwmtools.errors import DomainError


def test_sodium_d_line(silica):
    # mpmath evaluation of the closed form: 1.458462342...
    assert refractive_index(silica, 587.6) == pytest.approx(1.45846, abs=1e-4)
    assert refractive_index(silica, 587.6) == pytest.approx(1.4584623420532409, rel=1e-13)


def test_vacuum_model():
    vac = SellmeierModel(B=(0.0, 0.0, 0.0), lambda_um=(0.1, 0.2, 9.0))
    assert refractive_index(vac, 1000.0) == 1.0


def test_normal_dispersion_830_vs_1130(silica):
    assert refractive_index(silica, 830) > refractive_index(silica, 1130)


@pytest.mark.parametrize("lam", [100.0, 200.0, 3800.0, 10000.0])
def test_outside_window_names_window(silica, lam):
    with pytest.raises(DomainError, match=r"\[210, 3700\] nm"):
        refractive_index(silica, lam)


def test_vector_input(silica):
    lam = np.array([600.0, 900.0, 1500.0])
    n = refractive_index(silica, lam)
    assert n.shape == (3,)
    assert n[0] == refractive_index(silica, 600.0)


def test_monotone_on_1nm_grid(silica):
    n = refractive_index(silica, np.arange(600.0, 1601.0, 1.0))
    assert np.all(np.diff(n) < 0)


def test_wavenumber_arithmetic():
    # n + offset = 1.45 at 1000 nm
    vac = SellmeierModel(B=(0.0,), lambda_um=(0.1,))
    assert wavenumber(vac, 1000.0, 0.45) == pytest.approx(2 * math.pi * 1.45 / 1e-6, rel=1e-14)
    assert wavenumber(vac, 1000.0, 0.45) == pytest.approx(9.1106e6, rel=1e-4)


def test_wavenumber_957(silica):
    # mpmath: 9526361.1091916
    assert wavenumber(silica, 957.0) == pytest.approx(9526361.1091916, rel=1e-12)


@given(st.floats(400, 3000), st.floats(0, 1e-3))
def test_birefringent_offset_is_linear(lam, b):
    from sfwmtools.dispersion import fused_silica

    m = fused_silica()
    diff = wavenumber(m, lam, b) - wavenumber(m, lam, 0.0)
    assert diff == pytest.approx(2 * math.pi * b / (lam * 1e-9), rel=1e-6, abs=1e-6)


def test_idler_examples():
    assert idler_from_energy_conservation(957, 830) == pytest.approx(1129.886202, rel=1e-9)
    assert round(idler_from_energy_conservation(957, 830)) == 1130
    assert idler_from_energy_conservation(843, 742) == pytest.approx(975.828393, rel=1e-9)
    assert idler_from_energy_conservation(957, 957) == pytest.approx(957, rel=1e-15)


def test_idler_no_solution():
    with pytest.raises(DomainError, match="no energy-conserving idler"):
        idler_from_energy_conservation(1000, 400)


@given(st.floats(500, 1500), st.floats(0.55, 0.999))
def test_idler_involution(pump, frac):
    signal = pump * frac
    idler = idler_from_energy_conservation(pump, signal)
    assert idler_from_energy_conservation(pump, idler) == pytest.approx(signal, rel=1e-12)
    assert abs(energy_mismatch(pump, signal, idler)) < 1e-12


def test_coefficient_file_roundtrip(tmp_path, silica):
    p = tmp_path / "c.json"
    import json

    p.write_text(json.dumps(silica.to_dict()))
    assert SellmeierModel.from_json(p) == silica
    assert set(silica.to_dict()) >= {"B", "lambda_um", "window_um", "source"}
