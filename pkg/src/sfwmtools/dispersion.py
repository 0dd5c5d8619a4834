"""Fused-silica material dispersion and four-wave-mixing wavelength bookkeeping.

Public functions take vacuum wavelengths in nm and return SI quantities
(wavenumbers in rad/m). The Sellmeier sum itself is evaluated in microns,
as the coefficient file is tabulated that way.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError

NM = 1e-9


@dataclass(frozen=True)
class SellmeierModel:
    """Three-term (or n-term) Sellmeier model n^2 = 1 + sum B l^2 / (l^2 - l_j^2)."""

    B: tuple[float, ...]
    lambda_um: tuple[float, ...]
    window_um: tuple[float, float] = (0.21, 3.7)
    source: str = ""
    name: str = "custom"
    version: str = "1"

    def __post_init__(self):
        if len(self.B) != len(self.lambda_um) or not self.B:
            raise ValueError("B and lambda_um must be non-empty and of equal length")
        if any(b < 0 for b in self.B) or any(l <= 0 for l in self.lambda_um):
            raise ValueError("Sellmeier strengths must be >= 0 and resonances > 0")
        lo, hi = self.window_um
        if not 0 < lo < hi:
            raise ValueError(f"invalid validity window {self.window_um}")

    @classmethod
    def from_dict(cls, d: dict) -> "SellmeierModel":
        return cls(
            B=tuple(float(b) for b in d["B"]),
            lambda_um=tuple(float(l) for l in d["lambda_um"]),
            window_um=tuple(float(w) for w in d["window_um"]),
            source=d.get("source", ""),
            name=d.get("name", "custom"),
            version=str(d.get("version", "1")),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SellmeierModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "B": list(self.B),
            "lambda_um": list(self.lambda_um),
            "window_um": list(self.window_um),
            "source": self.source,
        }

    def in_window(self, wavelength_nm) -> np.ndarray:
        lam_um = np.asarray(wavelength_nm, dtype=float) * 1e-3
        return (lam_um >= self.window_um[0]) & (lam_um <= self.window_um[1])


@lru_cache(maxsize=None)
def fused_silica() -> SellmeierModel:
    """The bundled Malitson fused-silica coefficient set."""
    text = resources.files("sfwmtools.data").joinpath("fused_silica_malitson.json").read_text()
    return SellmeierModel.from_dict(json.loads(text))


def _check_window(model: SellmeierModel, wavelength_nm) -> np.ndarray:
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise DomainError("wavelength must be finite and positive")
    if not np.all(model.in_window(lam)):
        lo, hi = model.window_um
        raise DomainError(
            f"wavelength outside Sellmeier validity window "
            f"[{lo * 1e3:g}, {hi * 1e3:g}] nm: {np.atleast_1d(lam)[~np.atleast_1d(model.in_window(lam))][0]:g} nm"
        )
    return lam


def refractive_index(model: SellmeierModel, wavelength_nm):
    """Phase index n(lambda). Accepts scalars or arrays (nm)."""
    lam = _check_window(model, wavelength_nm)
    l2 = (lam * 1e-3) ** 2
    n2 = 1.0
    for b, lj in zip(model.B, model.lambda_um):
        n2 = n2 + b * l2 / (l2 - lj * lj)
    n = np.sqrt(n2)
    return float(n) if np.ndim(n) == 0 else n


def wavenumber(model: SellmeierModel, wavelength_nm, index_offset: float = 0.0):
    """Angular wavenumber 2*pi*(n + offset)/lambda in rad/m.

    ``index_offset`` is the birefringent index added on the slow axis
    (0 for the fast axis).
    """
    n = refractive_index(model, wavelength_nm)
    k = 2 * np.pi * (n + index_offset) / (np.asarray(wavelength_nm, dtype=float) * NM)
    return float(k) if np.ndim(k) == 0 else k


def idler_from_energy_conservation(pump_nm, signal_nm):
    """Partner wavelength from 2/lambda_p = 1/lambda_s + 1/lambda_i (nm)."""
    inv = 2.0 / np.asarray(pump_nm, dtype=float) - 1.0 / np.asarray(signal_nm, dtype=float)
    if np.any(inv <= 0):
        raise DomainError("no energy-conserving idler: 2/pump - 1/signal <= 0")
    out = 1.0 / inv
    return float(out) if np.ndim(out) == 0 else out


def energy_mismatch(pump_nm, signal_nm, idler_nm):
    """Residual 2/pump - 1/signal - 1/idler in 1/nm."""
    return 2.0 / pump_nm - 1.0 / signal_nm - 1.0 / idler_nm
