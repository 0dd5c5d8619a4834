import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfwmtools.errors import DomainError
from sfwmtools.waveguide import (
    MfdSample,
    WaveguideSpec,
    _v,
    effective_area,
    effective_length,
    fit_step_index,
    mfd_marcuse,
    nonlinear_gamma,
    read_mfd_csv,
    v_number,
)

SAMPLE_NM = (635.0, 808.0, 980.0, 1550.0)


@pytest.fixture
def device():
    return WaveguideSpec(6.1, 4e-3, 1.64e-4, 30.0, 26.0, ((808, 0.29), (980, 0.21), (1550, 2.9)))


def test_v_number_closed_form():
    # a = 3.05 um, n = 1.45, dn = 4e-3, 808 nm; mpmath gives 2.5562107
    assert _v(6.1, 4e-3, 808.0, 1.45) == pytest.approx(2.5562107011, rel=1e-9)


def test_v_scales_inverse_wavelength(device, silica):
    # cladding index changes with wavelength, so check the formula at fixed n
    assert _v(6.1, 4e-3, 1600.0, 1.45) == pytest.approx(_v(6.1, 4e-3, 800.0, 1.45) / 2, rel=1e-14)
    assert v_number(device, 808, silica) == pytest.approx(2.559, abs=1e-3)


def test_v_zero_without_contrast():
    assert _v(6.1, 0.0, 808.0, 1.45) == 0.0


def test_mfd_values(device, silica):
    assert mfd_marcuse(device, 808, silica) == pytest.approx(6.44004736, rel=1e-7)
    assert mfd_marcuse(device, 1550, silica) == pytest.approx(13.5813431, rel=1e-7)


def test_mfd_monotone(device, silica):
    m = mfd_marcuse(device, np.arange(635.0, 1551.0, 5.0), silica)
    assert np.all(np.diff(m) > 0)


def test_mfd_validity_bound(silica):
    weak = WaveguideSpec(2.0, 5e-4)
    with pytest.raises(DomainError, match="Marcuse"):
        mfd_marcuse(weak, 1550, silica)


def test_effective_length_examples():
    assert effective_length(0.0, 0.026) == 0.026
    assert effective_length(0.21, 0.026) == pytest.approx(0.0244320172, rel=1e-8)
    alpha = 0.21 * math.log(10) / 10 * 100
    assert effective_length(0.21, 1e3) == pytest.approx(1 / alpha, rel=1e-12)


@given(st.floats(0, 10), st.floats(1e-4, 1.0))
def test_effective_length_bounded(loss, length):
    le = effective_length(loss, length)
    assert le <= length
    if loss > 0 and loss * length > 1e-6:
        assert le < length


def test_effective_length_rejects_negative():
    with pytest.raises(DomainError):
        effective_length(-0.1, 0.02)


def test_gamma_examples():
    assert nonlinear_gamma(957.0, 2.6e-20, 7.0) == pytest.approx(4.43563e-3, rel=1e-5)
    assert nonlinear_gamma(957.0, 2.6e-20, 14.0) == pytest.approx(nonlinear_gamma(957.0, 2.6e-20, 7.0) / 4)
    assert nonlinear_gamma(957.0, 0.0, 7.0) == 0.0


def test_loss_interpolation(device):
    assert device.loss_at(980)[0] == pytest.approx(0.21)
    mid, flag = device.loss_at(894)
    assert 0.21 < mid < 0.29 and not flag
    # log-linear: geometric mean at the midpoint
    assert mid == pytest.approx(math.sqrt(0.29 * 0.21), rel=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert device.loss_at(700) == (0.29, True)


def test_spec_validation():
    with pytest.raises(DomainError):
        WaveguideSpec(6.1, 0.06)
    with pytest.raises(DomainError):
        WaveguideSpec(6.1, 4e-3, physical_length_mm=20, birefringent_length_mm=26)
    with pytest.raises(DomainError):
        WaveguideSpec(6.1, 4e-3, loss_table=((980, 0.2), (808, 0.3)))


def test_spec_json_roundtrip(tmp_path, device):
    device.save(tmp_path / "wg.json")
    assert WaveguideSpec.load(tmp_path / "wg.json") == device


def test_birefringence_hook(device):
    assert device.birefringence_at(900) == 1.64e-4
    device.birefringence_model = lambda lam: 2e-4 - 1e-8 * (lam - 800)
    assert device.birefringence_at(900) == pytest.approx(1.99e-4)


def _samples(spec, silica, noise=None):
    m = mfd_marcuse(spec, SAMPLE_NM, silica)
    if noise is not None:
        m = m * noise
    return [MfdSample(l, x, x) for l, x in zip(SAMPLE_NM, m)]


def test_fit_recovers_noiseless(device, silica):
    res = fit_step_index(_samples(device, silica), silica)
    assert res.core_diameter_um == pytest.approx(6.1, rel=5e-3)
    assert res.delta_n == pytest.approx(4e-3, rel=5e-3)


def test_fit_fixed_point(device, silica):
    first = fit_step_index(_samples(device, silica), silica)
    again = fit_step_index(_samples(WaveguideSpec(first.core_diameter_um, first.delta_n), silica), silica)
    assert again.core_diameter_um == pytest.approx(first.core_diameter_um, rel=1e-6)
    assert again.delta_n == pytest.approx(first.delta_n, rel=1e-6)


def test_fit_averages_axes(silica, device):
    m = mfd_marcuse(device, SAMPLE_NM, silica)
    s = [MfdSample(l, 1.05 * x, 0.95 * x) for l, x in zip(SAMPLE_NM, m)]
    res = fit_step_index(s, silica)
    assert res.core_diameter_um == pytest.approx(6.1, rel=1e-5)


def test_fit_needs_three_wavelengths(silica):
    with pytest.raises(DomainError):
        fit_step_index([MfdSample(800, 6, 6), MfdSample(800, 6, 6), MfdSample(900, 7, 7)], silica)


def test_area_consistency_within_residual(device, silica):
    """A_eff from the fitted curve tracks the measured A_eff to within the MFD residual band."""
    rng = np.random.default_rng(7)
    noise = 1 + 0.01 * rng.standard_normal(4)
    samples = _samples(device, silica, noise)
    res = fit_step_index(samples, silica)
    fitted = WaveguideSpec(res.core_diameter_um, res.delta_n)
    lams = np.array([s.wavelength_nm for s in samples])
    meas = np.array([s.mfd_um for s in samples])
    resid = np.abs(mfd_marcuse(fitted, lams, silica) - meas)
    rel_band = resid.max() / meas.min()
    assert res.rms_residual_um <= resid.max() + 1e-12
    a_meas = effective_area(meas)
    a_at = effective_area(mfd_marcuse(fitted, lams, silica))
    assert np.all(np.abs(a_at / a_meas - 1) <= 2 * rel_band + rel_band**2)
    # between samples the measured curve itself is only known to the noise level
    band = 2 * (rel_band + np.abs(noise - 1).max())
    for lam in np.linspace(lams[0], lams[-1], 20):
        a_true = effective_area(mfd_marcuse(device, lam, silica))
        a_fit = effective_area(mfd_marcuse(fitted, lam, silica))
        assert abs(a_fit / a_true - 1) < band


def test_mfd_sample_bound():
    with pytest.raises(DomainError, match="diffraction"):
        MfdSample(1550, 0.5, 6)


def test_read_mfd_csv(tmp_path):
    p = tmp_path / "mfd.csv"
    p.write_text("wavelength_nm,mfd_x_um,mfd_y_um\n808,6.5,6.3\n980,7.4,7.2\n")
    s = read_mfd_csv(p)
    assert s[1].mfd_um == pytest.approx(7.3)
    p.write_text("wavelength_nm,mfd_x_um,mfd_y_um\n808,6.5,abc\n")
    with pytest.raises(DomainError, match=":2:"):
        read_mfd_csv(p)
