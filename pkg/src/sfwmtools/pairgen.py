"""Photon-pair rate model, pump tuning curves and Klyshko-style count analysis.

Absolute rates use the bare expression dnu (gamma P0 L_eff)^2 sinc^2(dk L/2)
with unit proportionality constant, so they are model-scale only. Normalized
tuning curves and the count-ratio analysis do not depend on that constant.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.constants import c as C_LIGHT

from .dispersion import SellmeierModel, fused_silica, idler_from_energy_conservation
from .errors import DomainError
from .phasematch import delta_k, pump_grid


def filter_bandwidth_hz(center_nm: float, width_nm: float) -> float:
    """Optical bandwidth c * dlambda / lambda^2 of a bandpass filter."""
    return C_LIGHT * (width_nm * 1e-9) / (center_nm * 1e-9) ** 2


def peak_power(average_power_w: float, rep_rate_hz: float, pulse_duration_s: float) -> float:
    return average_power_w / (rep_rate_hz * pulse_duration_s)


@dataclass
class SourceConfig:
    pump_nm: float = 957.0
    peak_power_w: float = 0.1
    pump_bandwidth_nm: float = 10.0
    rep_rate_hz: float = 80e6
    gamma: float = 4.4e-3  # 1/(W m)
    l_eff_m: float = 24.4e-3
    collection_bandwidth_hz: float = field(default_factory=lambda: filter_bandwidth_hz(830.0, 3.0))
    birefringence: float = 1.64e-4
    pulse_duration_s: float | None = None

    def __post_init__(self):
        for name in ("pump_nm", "pump_bandwidth_nm", "rep_rate_hz", "l_eff_m", "collection_bandwidth_hz"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.peak_power_w < 0 or self.gamma < 0 or self.birefringence < 0:
            raise DomainError("peak_power_w, gamma and birefringence must be >= 0")

    @property
    def gamma_p0(self) -> float:
        return self.gamma * self.peak_power_w

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SourceConfig":
        d = dict(d)
        filt = d.pop("signal_filter", None)
        if filt is not None and "collection_bandwidth_hz" not in d:
            d["collection_bandwidth_hz"] = filter_bandwidth_hz(filt["center_nm"], filt["width_nm"])
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


def sinc2(x):
    """sin(x)^2 / x^2 with the removable singularity filled."""
    return np.sinc(np.asarray(x) / np.pi) ** 2


def pair_rate(cfg: SourceConfig, dk) -> float:
    """Model-scale pair rate dnu (gamma P0 L_eff)^2 sinc^2(dk L_eff / 2)."""
    amp = cfg.collection_bandwidth_hz * (cfg.gamma * cfg.peak_power_w * cfg.l_eff_m) ** 2
    out = amp * sinc2(np.asarray(dk) * cfg.l_eff_m / 2)
    return float(out) if np.ndim(out) == 0 else out


def sinc2_response(
    model: SellmeierModel,
    pumps_nm,
    fixed_nm: float,
    birefringence: float,
    l_eff_m: float,
    gamma_p0: float = 0.0,
    fixed_role: str = "signal",
):
    """Raw sinc^2(dk L/2) and dk along a pump scan with one arm held fixed.

    The partner wavelength follows energy conservation at each pump; the
    formula is symmetric in signal and idler so ``fixed_role`` only affects
    validation.
    """
    pumps = np.asarray(pumps_nm, dtype=float)
    if fixed_role not in ("signal", "idler"):
        raise DomainError("fixed_role must be 'signal' or 'idler'")
    partner = idler_from_energy_conservation(pumps, fixed_nm)
    dk = delta_k(model, pumps, fixed_nm, partner, birefringence, gamma_p0, 1.0)
    return sinc2(dk * l_eff_m / 2), dk


class TuningPoint(NamedTuple):
    pump_nm: float
    normalized_rate: float
    delta_k: float


def tuning_curve(
    cfg: SourceConfig,
    model: SellmeierModel | None = None,
    signal_nm: float = 830.0,
    pump_range: tuple[float, float] = (945.0, 970.0),
    step_nm: float = 0.1,
    fixed_role: str = "signal",
) -> list[TuningPoint]:
    """Expected singles rate versus pump wavelength, normalized to peak 1."""
    model = model or fused_silica()
    pumps = pump_grid(pump_range[0], pump_range[1], step_nm)
    if pumps.size == 0:
        return []
    resp, dk = sinc2_response(model, pumps, signal_nm, cfg.birefringence, cfg.l_eff_m, cfg.gamma_p0, fixed_role)
    peak = resp.max()
    norm = resp / peak if peak > 0 else resp
    return [TuningPoint(float(p), float(r), float(d)) for p, r, d in zip(pumps, norm, dk)]


@dataclass(frozen=True)
class MeasuredCounts:
    singles_signal: float
    singles_idler: float
    coincidences: float
    det_eff_signal: float
    det_eff_idler: float
    integration_time_s: float = 1.0

    def __post_init__(self):
        if min(self.singles_signal, self.singles_idler, self.coincidences) < 0:
            raise DomainError("count rates must be >= 0")
        if self.coincidences > min(self.singles_signal, self.singles_idler):
            raise DomainError("coincidences exceed singles")
        for eff in (self.det_eff_signal, self.det_eff_idler):
            if not 0 < eff <= 1:
                raise DomainError("detector efficiencies must lie in (0, 1]")
        if self.integration_time_s <= 0:
            raise DomainError("integration time must be positive")


@dataclass(frozen=True)
class KlyshkoResult:
    coupling_signal: float
    coupling_idler: float
    internal_pair_rate: float
    coupling_signal_err: float
    coupling_idler_err: float
    internal_pair_rate_err: float
    accidentals_subtracted: float = 0.0

    def report(self, counts: MeasuredCounts) -> dict:
        return {"inputs": asdict(counts), "derived": asdict(self)}


def klyshko_analysis(m: MeasuredCounts, rep_rate_hz: float | None = None) -> KlyshkoResult:
    """Arm transmissions and internal pair rate from singles and coincidences.

    Coupling of one arm is the heralding ratio C / S_other divided by that
    arm's detector efficiency; the internal rate S_s S_i / C has both
    efficiencies and both couplings cancel. If ``rep_rate_hz`` is given the
    per-pulse accidental level S_s S_i / f is subtracted from C first.
    Uncertainties assume Poisson counts over ``integration_time_s``.
    """
    acc = m.singles_signal * m.singles_idler / rep_rate_hz if rep_rate_hz else 0.0
    cc = m.coincidences - acc
    if cc <= 0:
        raise DomainError("insufficient statistics: no (true) coincidences")
    eta_i = cc / (m.singles_signal * m.det_eff_idler)
    eta_s = cc / (m.singles_idler * m.det_eff_signal)
    rate = m.singles_signal * m.singles_idler / cc

    t = m.integration_time_s
    n_s, n_i, n_c = m.singles_signal * t, m.singles_idler * t, cc * t
    rel_eta_i = math.sqrt(1 / n_c + 1 / n_s)
    rel_eta_s = math.sqrt(1 / n_c + 1 / n_i)
    rel_rate = math.sqrt(1 / n_c + 1 / n_s + 1 / n_i)
    return KlyshkoResult(eta_s, eta_i, rate, eta_s * rel_eta_s, eta_i * rel_eta_i, rate * rel_rate, acc)
