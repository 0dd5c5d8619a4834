"""Birefringence extraction from pump-tuning data and estimate cross-checks."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .dispersion import SellmeierModel, fused_silica
from .errors import DomainError, FitError
from .pairgen import sinc2_response

B_BOUNDS = (0.5e-4, 5.0e-4)
_B_GRID = 600


@dataclass(frozen=True)
class TuningSample:
    pump_nm: float
    normalized_counts: float
    uncertainty: float


def read_tuning_csv(path: str | Path, default_uncertainty: float | None = None) -> list[TuningSample]:
    """Read ``pump_nm, normalized_counts, uncertainty``; errors name the line.

    Lines starting with ``#`` are skipped. Files written by the ``tuning``
    command (``normalized_rate`` column, no uncertainty) are accepted when
    ``default_uncertainty`` is given.
    """
    with open(path, newline="") as fh:
        lines = [(i, ln) for i, ln in enumerate(fh, start=1) if not ln.startswith("#") and ln.strip()]
    if not lines:
        raise DomainError(f"{path}: empty file")
    header_line, header = lines[0]
    cols = next(csv.reader([header]))
    value_col = "normalized_counts" if "normalized_counts" in cols else "normalized_rate"
    if "pump_nm" not in cols or value_col not in cols:
        raise DomainError(f"{path}:{header_line}: expected columns pump_nm, normalized_counts, uncertainty")
    if "uncertainty" not in cols and default_uncertainty is None:
        raise DomainError(f"{path}:{header_line}: missing uncertainty column")
    out = []
    for lineno, text in lines[1:]:
        row = next(csv.reader([text]))
        if len(row) != len(cols):
            raise DomainError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}")
        rec = dict(zip(cols, row))
        try:
            unc = float(rec["uncertainty"]) if "uncertainty" in rec else float(default_uncertainty)
            s = TuningSample(float(rec["pump_nm"]), float(rec[value_col]), unc)
        except ValueError as exc:
            raise DomainError(f"{path}:{lineno}: malformed row ({exc})") from exc
        if not s.uncertainty > 0:
            raise DomainError(f"{path}:{lineno}: uncertainty must be positive")
        out.append(s)
    return out


def write_tuning_csv(path: str | Path, samples: Sequence[TuningSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pump_nm", "normalized_counts", "uncertainty"])
        for s in samples:
            w.writerow([repr(s.pump_nm), repr(s.normalized_counts), repr(s.uncertainty)])


@dataclass
class FitReport:
    birefringence: float
    birefringence_err: float
    l_eff_m: float
    l_eff_err: Optional[float]
    amplitude: float
    chi2: float
    chi2_per_dof: float
    residuals: list[float]
    n_samples: int
    fixed_nm: float
    fixed_role: str
    bootstrap_err: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


class _Objective:
    """chi2 over (B, L_eff) with the overall amplitude profiled out analytically."""

    def __init__(self, model, pumps, y, sigma, fixed_nm, gamma_p0, fixed_role):
        self.model, self.pumps, self.y = model, pumps, y
        self.w = 1.0 / sigma**2
        self.fixed_nm, self.gamma_p0, self.fixed_role = fixed_nm, gamma_p0, fixed_role

    def shape(self, b, l_eff):
        s, _ = sinc2_response(self.model, self.pumps, self.fixed_nm, b, l_eff, self.gamma_p0, self.fixed_role)
        return s

    def amplitude(self, s):
        den = np.sum(self.w * s * s)
        return float(np.sum(self.w * self.y * s) / den) if den > 0 else 0.0

    def residuals(self, b, l_eff):
        s = self.shape(b, l_eff)
        return self.y - self.amplitude(s) * s

    def __call__(self, b, l_eff):
        r = self.residuals(b, l_eff)
        return float(np.sum(self.w * r * r))


def _hessian(f, x, h):
    n = len(x)
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
    return H


def _fit_core(obj: _Objective, l_eff_m: float, float_l: bool, bounds):
    grid = np.linspace(bounds[0], bounds[1], _B_GRID)
    chi = np.array([obj(b, l_eff_m) for b in grid])
    j = int(np.argmin(chi))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, _B_GRID - 1)]
    res = minimize_scalar(lambda b: obj(b, l_eff_m), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    if not res.success:
        raise FitError(f"birefringence search failed: {res.message}",
                       last_params=(float(res.x),), residual=float(res.fun))
    b_best, l_best = float(res.x), l_eff_m
    if float_l:
        scale = np.array([1e-4, 1e-2])
        res2 = minimize(lambda x: obj(*(x * scale)), np.array([b_best, l_eff_m]) / scale, method="Nelder-Mead",
                        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
        if not res2.success:
            raise FitError(f"(B, L_eff) fit failed: {res2.message}",
                           last_params=tuple(res2.x * scale), residual=float(res2.fun))
        b_best, l_best = (float(v) for v in res2.x * scale)
        if not (bounds[0] <= b_best <= bounds[1] and l_best > 0):
            raise FitError("(B, L_eff) fit left the physical box", last_params=(b_best, l_best))
    return b_best, l_best, (grid, chi)


def fit_birefringence(
    samples: Sequence[TuningSample],
    model: SellmeierModel | None = None,
    fixed_nm: float = 830.0,
    l_eff_m: float = 24.4e-3,
    float_l: bool = False,
    gamma_p0: float = 0.0,
    fixed_role: str = "signal",
    bounds: tuple[float, float] = B_BOUNDS,
    bootstrap: int = 0,
    seed: int | None = None,
) -> FitReport:
    """Weighted least-squares birefringence (and optionally L_eff) from a tuning scan.

    A coarse grid over ``bounds`` picks the basin (the sinc^2 side lobes
    create local minima), then a bounded Brent search refines B. With
    ``float_l`` a Nelder-Mead polish runs over (B, L_eff). Errors come from
    the curvature of chi2 at the minimum (delta chi2 = 1).
    """
    model = model or fused_silica()
    samples = sorted(samples, key=lambda s: s.pump_nm)
    if len(samples) < 5:
        raise DomainError("need at least 5 tuning samples")
    pumps = np.array([s.pump_nm for s in samples])
    if np.any(np.diff(pumps) <= 0):
        raise DomainError("pump grid must be strictly increasing")
    y = np.array([s.normalized_counts for s in samples])
    sigma = np.array([s.uncertainty for s in samples])
    if np.any(sigma <= 0):
        raise DomainError("uncertainties must be positive")

    wmean = np.sum(y / sigma**2) / np.sum(1 / sigma**2)
    flat_chi2 = float(np.sum(((y - wmean) / sigma) ** 2))
    dof_flat = len(y) - 1
    if flat_chi2 <= dof_flat + 3 * math.sqrt(2 * dof_flat):
        raise FitError("uninformative data: counts are consistent with a constant")

    obj = _Objective(model, pumps, y, sigma, fixed_nm, gamma_p0, fixed_role)
    b_best, l_best, _ = _fit_core(obj, l_eff_m, float_l, bounds)

    if float_l:
        x0 = np.array([b_best, l_best])
        h = np.array([1e-3 * b_best, 1e-3 * l_best])
        H = _hessian(lambda x: obj(x[0], x[1]), x0, h)
    else:
        h = np.array([1e-3 * b_best])
        H = _hessian(lambda x: obj(x[0], l_eff_m), np.array([b_best]), h)
    try:
        cov = 2.0 * np.linalg.inv(H)
        errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        errs = np.full(len(h), np.nan)

    chi2 = obj(b_best, l_best)
    n_par = 2 + int(float_l)  # B, amplitude, optionally L_eff
    dof = max(len(y) - n_par, 1)
    resid = obj.residuals(b_best, l_best)
    amp = obj.amplitude(obj.shape(b_best, l_best))

    boot = None
    if bootstrap:
        rng = np.random.default_rng(seed)
        vals = []
        for _ in range(bootstrap):
            pick = np.sort(rng.choice(len(y), len(y), replace=True))
            pick = np.unique(pick)
            if pick.size < 5:
                continue
            sub = _Objective(model, pumps[pick], y[pick], sigma[pick], fixed_nm, gamma_p0, fixed_role)
            vals.append(_fit_core(sub, l_eff_m, False, bounds)[0])
        boot = float(np.std(vals, ddof=1)) if len(vals) > 1 else None

    return FitReport(
        birefringence=b_best,
        birefringence_err=float(errs[0]),
        l_eff_m=l_best,
        l_eff_err=float(errs[1]) if float_l else None,
        amplitude=amp,
        chi2=chi2,
        chi2_per_dof=chi2 / dof,
        residuals=[float(r) for r in resid],
        n_samples=len(y),
        fixed_nm=fixed_nm,
        fixed_role=fixed_role,
        bootstrap_err=boot,
        provenance={"model": model.to_dict(), "bounds": list(bounds), "gamma_p0": gamma_p0,
                    "bootstrap": bootstrap, "seed": seed},
    )


@dataclass(frozen=True)
class BirefringenceEstimate:
    label: str
    value: float
    sigma: Optional[float] = None
    interval: Optional[tuple[float, float]] = None
    wavelength_nm: Optional[float] = None

    @property
    def bounds(self) -> tuple[float, float]:
        if self.interval is not None:
            return (min(self.interval), max(self.interval))
        if self.sigma is not None:
            return (self.value - self.sigma, self.value + self.sigma)
        return (self.value, self.value)

    @classmethod
    def from_dict(cls, d: dict) -> "BirefringenceEstimate":
        iv = d.get("interval")
        return cls(d["label"], float(d["value"]), d.get("sigma"), tuple(iv) if iv else None, d.get("wavelength_nm"))


REFERENCE_ESTIMATES = (
    BirefringenceEstimate("polarization_rotation", 1.8e-4, sigma=0.3e-4, wavelength_nm=960.0),
    BirefringenceEstimate("classical_fwm", 2.015e-4, interval=(1.9e-4, 2.13e-4), wavelength_nm=843.0),
    BirefringenceEstimate("quantum_tuning", 1.64e-4, wavelength_nm=957.0),
)


def birefringence_consistency_report(estimates: Sequence[BirefringenceEstimate], z_limit: float = 3.0) -> dict:
    """Pairwise compatibility table for independent birefringence estimates.

    Two estimates are compatible when their intervals overlap (or, with both
    sigmas known, when z < ``z_limit``). An incompatible pair where the
    longer-wavelength estimate is the lower one raises the
    ``wavelength_dependence`` flag.
    """
    if len(estimates) < 2:
        raise DomainError("need at least two estimates")
    pairs = []
    flags = []
    for a, b in itertools.combinations(estimates, 2):
        (alo, ahi), (blo, bhi) = a.bounds, b.bounds
        overlap = max(alo, blo) <= min(ahi, bhi)
        z = None
        if a.sigma is not None and b.sigma is not None:
            den = math.hypot(a.sigma, b.sigma)
            z = abs(a.value - b.value) / den if den > 0 else (0.0 if a.value == b.value else math.inf)
        compatible = overlap or (z is not None and z < z_limit)
        entry = {"a": a.label, "b": b.label, "overlap": overlap, "z": z, "compatible": compatible}
        if not compatible:
            flags.append(f"incompatible:{a.label}:{b.label}")
            if a.wavelength_nm is not None and b.wavelength_nm is not None and a.wavelength_nm != b.wavelength_nm:
                long_, short = (a, b) if a.wavelength_nm > b.wavelength_nm else (b, a)
                if long_.value < short.value:
                    entry["lower_at_longer_wavelength"] = long_.label
                    if "wavelength_dependence" not in flags:
                        flags.append("wavelength_dependence")
        pairs.append(entry)
    return {
        "estimates": [asdict(e) for e in estimates],
        "pairs": pairs,
        "flags": flags,
        "all_compatible": all(p["compatible"] for p in pairs),
    }
