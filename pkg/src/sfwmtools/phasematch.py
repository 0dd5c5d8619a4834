"""Cross-polarized SFWM phase matching in a birefringent waveguide.

The pump travels on the slow axis (index offset +B); signal and idler are
co-polarized on the fast axis. Waveguide dispersion is neglected against
material dispersion.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .dispersion import (
    SellmeierModel,
    fused_silica,
    idler_from_energy_conservation,
    wavenumber,
)
from .errors import DomainError, NoSolution

SCAN_STEP_NM = 0.5
DEGENERACY_GUARD_NM = 1.0


@dataclass(frozen=True)
class PumpState:
    wavelength_nm: float
    peak_power_w: float = 0.0
    polarization: str = "slow"

    def __post_init__(self):
        if self.peak_power_w < 0:
            raise DomainError("peak power must be >= 0")
        if self.polarization not in ("slow", "fast"):
            raise DomainError(f"polarization must be 'slow' or 'fast', got {self.polarization!r}")


@dataclass(frozen=True)
class PhaseMatchPoint:
    pump_nm: float
    signal_nm: Optional[float]
    idler_nm: Optional[float]
    delta_k: Optional[float]
    birefringence: float

    @property
    def is_gap(self) -> bool:
        return self.signal_nm is None

    @property
    def separation_nm(self) -> float:
        return self.idler_nm - self.signal_nm

    def to_dict(self) -> dict:
        return asdict(self)


def delta_k(
    model: SellmeierModel,
    pump_nm,
    signal_nm,
    idler_nm,
    birefringence: float,
    gamma: float = 0.0,
    peak_power_w: float = 0.0,
):
    """Phase mismatch 2 k_p - k_s - k_i + (2/3) gamma P0 in rad/m."""
    kp = wavenumber(model, pump_nm, birefringence)
    ks = wavenumber(model, signal_nm, 0.0)
    ki = wavenumber(model, idler_nm, 0.0)
    return 2 * kp - ks - ki + (2.0 / 3.0) * gamma * peak_power_w


def _scan_floor(model: SellmeierModel, pump_nm: float) -> float:
    """Shortest signal wavelength whose idler is still inside the Sellmeier window."""
    lo_nm, hi_nm = (w * 1e3 for w in model.window_um)
    idler_limit = 1.0 / (2.0 / pump_nm - 1.0 / hi_nm)
    return max(pump_nm / 2 + 1.0, idler_limit + 1e-6, lo_nm)


def solve_signal_idler(
    model: SellmeierModel | None,
    pump_nm: float,
    birefringence: float,
    gamma_p0: float = 0.0,
) -> PhaseMatchPoint:
    """Non-degenerate phase-matched (signal, idler) for a given pump.

    Scans the signal downward from the degeneracy guard in 0.5 nm steps and
    refines the first sign change with Brent's method.
    """
    model = model or fused_silica()
    if birefringence < 0:
        raise DomainError("birefringence must be >= 0")

    def f(ls):
        return delta_k(model, pump_nm, ls, idler_from_energy_conservation(pump_nm, ls), birefringence, gamma_p0, 1.0)

    top = pump_nm - DEGENERACY_GUARD_NM
    floor = _scan_floor(model, pump_nm)
    if top <= floor:
        raise NoSolution(f"empty signal bracket for pump {pump_nm} nm", bracket=(floor, top))
    grid = np.arange(top, floor, -SCAN_STEP_NM)
    if grid[-1] > floor:
        grid = np.append(grid, floor)
    values = f(grid)
    sign_change = np.nonzero(np.signbit(values[:-1]) != np.signbit(values[1:]))[0]
    if sign_change.size == 0:
        raise NoSolution(
            f"no phase-matched signal for pump {pump_nm} nm, B={birefringence:g}: "
            f"delta_k = {values[0]:.4g} at {grid[0]:.2f} nm, {values[-1]:.4g} at {grid[-1]:.2f} nm",
            bracket=(float(grid[-1]), float(grid[0])),
            values=(float(values[-1]), float(values[0])),
        )
    j = sign_change[0]
    ls = brentq(f, grid[j + 1], grid[j], xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    li = idler_from_energy_conservation(pump_nm, ls)
    return PhaseMatchPoint(float(pump_nm), float(ls), float(li), float(f(ls)), float(birefringence))


def pump_grid(start_nm: float, stop_nm: float, step_nm: float) -> np.ndarray:
    """Inclusive pump grid; empty when stop < start."""
    if step_nm <= 0:
        raise DomainError("step must be positive")
    if stop_nm < start_nm:
        return np.empty(0)
    n = int(np.floor((stop_nm - start_nm) / step_nm + 1e-9)) + 1
    return start_nm + step_nm * np.arange(n)


def phasematch_curve(
    model: SellmeierModel | None,
    birefringence: float,
    pump_range: tuple[float, float],
    step_nm: float = 1.0,
    gamma_p0: float = 0.0,
) -> list[PhaseMatchPoint]:
    """One point per pump step; pumps without a solution become gap markers."""
    model = model or fused_silica()
    out = []
    for p in pump_grid(pump_range[0], pump_range[1], step_nm):
        try:
            out.append(solve_signal_idler(model, float(p), birefringence, gamma_p0))
        except NoSolution:
            out.append(PhaseMatchPoint(float(p), None, None, None, float(birefringence)))
    return out


def classical_fwm_signal(pump_nm, seed_nm):
    """Signal generated by a seeded idler under energy conservation (nm)."""
    if np.any(np.asarray(seed_nm) < np.asarray(pump_nm)):
        raise DomainError("seed must be at longer wavelength than the pump")
    return idler_from_energy_conservation(pump_nm, seed_nm)


def classical_fwm_delta_k(model: SellmeierModel | None, pump_nm, seed_nm, birefringence: float):
    """(signal_nm, delta_k) for seeded FWM with the idler fixed at ``seed_nm``."""
    model = model or fused_silica()
    signal = classical_fwm_signal(pump_nm, seed_nm)
    return signal, delta_k(model, pump_nm, signal, seed_nm, birefringence)
