"""Step-index equivalent model of a laser-written waveguide.

Covers the V-number, Marcuse's empirical Gaussian mode-field diameter,
fitting of (core diameter, index contrast) to measured MFDs, the Kerr
nonlinear parameter and the loss-limited effective length.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .dispersion import SellmeierModel, fused_silica, refractive_index
from .errors import DomainError, FitError

MARCUSE_MIN_V = 0.8
DEFAULT_N2 = 2.6e-20  # m^2/W, fused silica


@dataclass
class WaveguideSpec:
    core_diameter_um: float
    delta_n: float
    birefringence: float = 0.0
    physical_length_mm: float = 30.0
    birefringent_length_mm: float = 26.0
    loss_table: tuple[tuple[float, float], ...] = ()
    # optional B(lambda_nm) override; no default model exists
    birefringence_model: Callable[[float], float] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.loss_table = tuple((float(w), float(l)) for w, l in self.loss_table)
        if self.core_diameter_um <= 0:
            raise DomainError("core_diameter must be positive")
        if not 0 < self.delta_n < 0.05:
            raise DomainError("delta_n must lie in (0, 0.05)")
        if self.birefringence < 0:
            raise DomainError("birefringence must be >= 0")
        if self.birefringent_length_mm > self.physical_length_mm:
            raise DomainError("birefringent_length exceeds physical_length")
        wl = [w for w, _ in self.loss_table]
        if any(b <= a for a, b in zip(wl, wl[1:])):
            raise DomainError("loss_table wavelengths must be strictly increasing")
        if any(l <= 0 for _, l in self.loss_table):
            raise DomainError("loss_table losses must be positive")

    @property
    def core_radius_um(self) -> float:
        return self.core_diameter_um / 2

    def birefringence_at(self, wavelength_nm: float) -> float:
        if self.birefringence_model is not None:
            return float(self.birefringence_model(wavelength_nm))
        return self.birefringence

    def loss_at(self, wavelength_nm: float) -> tuple[float, bool]:
        """Loss in dB/cm and whether it was extrapolated.

        Interpolates log(loss) linearly in wavelength; outside the table the
        nearest entry is used and the flag is set.
        """
        if not self.loss_table:
            return 0.0, True
        wl = np.array([w for w, _ in self.loss_table])
        ll = np.log([l for _, l in self.loss_table])
        outside = wavelength_nm < wl[0] or wavelength_nm > wl[-1]
        if outside:
            warnings.warn(f"loss at {wavelength_nm} nm extrapolated from nearest table entry", stacklevel=2)
        return float(np.exp(np.interp(wavelength_nm, wl, ll))), outside

    def effective_length_m(self, wavelength_nm: float) -> float:
        loss, _ = self.loss_at(wavelength_nm)
        return effective_length(loss, self.birefringent_length_mm * 1e-3)

    def to_dict(self) -> dict:
        return {
            "core_diameter_um": self.core_diameter_um,
            "delta_n": self.delta_n,
            "birefringence": self.birefringence,
            "physical_length_mm": self.physical_length_mm,
            "birefringent_length_mm": self.birefringent_length_mm,
            "loss_table": [list(p) for p in self.loss_table],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveguideSpec":
        return cls(
            core_diameter_um=float(d["core_diameter_um"]),
            delta_n=float(d["delta_n"]),
            birefringence=float(d.get("birefringence", 0.0)),
            physical_length_mm=float(d.get("physical_length_mm", 30.0)),
            birefringent_length_mm=float(d.get("birefringent_length_mm", d.get("physical_length_mm", 26.0))),
            loss_table=tuple(tuple(p) for p in d.get("loss_table", ())),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "WaveguideSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class MfdSample:
    wavelength_nm: float
    mfd_x_um: float
    mfd_y_um: float

    def __post_init__(self):
        if min(self.wavelength_nm, self.mfd_x_um, self.mfd_y_um) <= 0:
            raise DomainError("MFD samples must be positive")
        half = self.wavelength_nm * 1e-3 / 2
        if self.mfd_x_um < half or self.mfd_y_um < half:
            raise DomainError(f"MFD below diffraction bound at {self.wavelength_nm} nm")

    @property
    def mfd_um(self) -> float:
        return 0.5 * (self.mfd_x_um + self.mfd_y_um)


def read_mfd_csv(path: str | Path) -> list[MfdSample]:
    """Read ``wavelength_nm, mfd_x_um, mfd_y_um`` rows."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                out.append(MfdSample(float(row["wavelength_nm"]), float(row["mfd_x_um"]), float(row["mfd_y_um"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise DomainError(f"{path}:{lineno}: bad MFD row ({exc})") from exc
    return out


def _v(core_diameter_um, delta_n, wavelength_nm, n_clad):
    na = np.sqrt((n_clad + delta_n) ** 2 - n_clad**2)
    return np.pi * core_diameter_um / (np.asarray(wavelength_nm) * 1e-3) * na


def v_number(spec: WaveguideSpec, wavelength_nm, model: SellmeierModel | None = None):
    """Normalized frequency (2 pi a / lambda) NA with the Sellmeier cladding index."""
    n = refractive_index(model or fused_silica(), wavelength_nm)
    return _v(spec.core_diameter_um, spec.delta_n, wavelength_nm, n)


def marcuse_mfd(core_diameter_um, v):
    """Marcuse's Gaussian-fit MFD for a step-index guide."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= MARCUSE_MIN_V):
        raise DomainError(f"V = {np.min(v):.3g} outside Marcuse fit validity (V > {MARCUSE_MIN_V})")
    return core_diameter_um * (0.65 + 1.619 * v**-1.5 + 2.879 * v**-6)


def mfd_marcuse(spec: WaveguideSpec, wavelength_nm, model: SellmeierModel | None = None):
    mfd = marcuse_mfd(spec.core_diameter_um, v_number(spec, wavelength_nm, model))
    return float(mfd) if np.ndim(mfd) == 0 else mfd


def effective_length(loss_db_per_cm: float, length_m: float) -> float:
    """Loss-limited interaction length (1 - exp(-alpha L)) / alpha, in metres."""
    if loss_db_per_cm < 0 or length_m <= 0:
        raise DomainError("loss must be >= 0 and length > 0")
    if loss_db_per_cm == 0:
        return length_m
    alpha = loss_db_per_cm * math.log(10) / 10 * 100  # 1/m
    if alpha * length_m < 1e-12:
        return length_m
    return -math.expm1(-alpha * length_m) / alpha


def effective_area(mfd_um) -> float:
    """Gaussian effective area pi (MFD/2)^2 in m^2."""
    return np.pi * (np.asarray(mfd_um) * 1e-6 / 2) ** 2


def nonlinear_gamma(wavelength_nm, n2: float = DEFAULT_N2, mfd_um: float = 7.0):
    """Kerr parameter 2 pi n2 / (lambda A_eff) in 1/(W m)."""
    if np.any(np.asarray(wavelength_nm) <= 0) or n2 < 0 or np.any(np.asarray(mfd_um) <= 0):
        raise DomainError("wavelength and MFD must be positive, n2 >= 0")
    return 2 * np.pi * n2 / (np.asarray(wavelength_nm) * 1e-9 * effective_area(mfd_um))


class StepIndexFit(NamedTuple):
    core_diameter_um: float
    delta_n: float
    rms_residual_um: float


_DN_SCALE = 1e3  # optimizer works on delta_n * 1e3 so both axes are O(1-10)


def fit_step_index(
    samples: Sequence[MfdSample],
    model: SellmeierModel | None = None,
    grid_diameter_um: Sequence[float] = (4.0, 6.0, 9.0),
    grid_delta_n: Sequence[float] = (2e-3, 4e-3, 8e-3),
    xatol: float = 1e-10,
) -> StepIndexFit:
    """Least-squares (core diameter, delta_n) from averaged MFD samples.

    Nelder-Mead is restarted from every point of a 3x3 starting grid and
    the best converged result kept.
    """
    model = model or fused_silica()
    if len({s.wavelength_nm for s in samples}) < 3:
        raise DomainError("need at least 3 samples at distinct wavelengths")
    lam = np.array([s.wavelength_nm for s in samples])
    mfd = np.array([s.mfd_um for s in samples])
    n_clad = refractive_index(model, lam)

    def sse(x):
        d, dn = x[0], x[1] / _DN_SCALE
        if d <= 0 or not 0 < dn < 0.05:
            return 1e6
        v = _v(d, dn, lam, n_clad)
        if np.any(v <= MARCUSE_MIN_V):
            return 1e6
        r = marcuse_mfd(d, v) - mfd
        return float(r @ r)

    opts = {"xatol": xatol, "fatol": 1e-14, "maxiter": 3000, "maxfev": 3000}
    results = []
    for d0 in grid_diameter_um:
        for dn0 in grid_delta_n:
            x0 = [d0, dn0 * _DN_SCALE]
            if sse(x0) >= 1e6:  # start violates the Marcuse validity bound
                continue
            results.append(minimize(sse, x0, method="Nelder-Mead", options=opts))
    if not results:
        raise FitError("no feasible starting point on the grid")
    good = [r for r in results if r.success]
    best = min(good or results, key=lambda r: r.fun)
    rms = math.sqrt(best.fun / len(lam))
    if not good:
        raise FitError(f"step-index fit did not converge: {best.message}", last_params=tuple(best.x), residual=rms)
    return StepIndexFit(float(best.x[0]), float(best.x[1] / _DN_SCALE), rms)
