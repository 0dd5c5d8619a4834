"""Scenario documents: one JSON file describing device, source and detectors."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .dispersion import SellmeierModel, fused_silica
from .errors import DomainError
from .fit import BirefringenceEstimate
from .pairgen import MeasuredCounts, SourceConfig, filter_bandwidth_hz, peak_power
from .quantumstats import DetectorModel, PairSourceModel
from .waveguide import DEFAULT_N2, WaveguideSpec, mfd_marcuse, nonlinear_gamma

DEFAULT_SCENARIO = "paper_scenario.json"


def canonical_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class Scenario:
    raw: dict
    model: SellmeierModel
    waveguide: WaveguideSpec
    source: SourceConfig
    pair_source: PairSourceModel
    detectors: dict[str, DetectorModel]
    seed: int = 0
    outputs: str = "out"
    path: Path | None = field(default=None, compare=False)

    @property
    def hash(self) -> str:
        return canonical_hash(self.raw)

    def detector(self, label: str) -> DetectorModel:
        try:
            return self.detectors[label]
        except KeyError:
            raise DomainError(f"scenario has no detector labelled {label!r}") from None

    def simulation_setup(self, mode: str) -> tuple[DetectorModel, DetectorModel, float | None]:
        sim = self.raw.get("simulation", {})
        key = "cross" if mode == "cross_shuffled" else mode
        if key not in sim:
            raise DomainError(f"scenario has no simulation block for mode {mode!r}")
        a, b = sim[key]["detectors"]
        return self.detector(a), self.detector(b), sim[key].get("duration_s")

    def measured_counts(self) -> MeasuredCounts:
        if "measured_counts" not in self.raw:
            raise DomainError("scenario has no measured_counts block")
        d = {k: float(v) for k, v in self.raw["measured_counts"].items() if k != "note"}
        return MeasuredCounts(**d)

    def estimates(self) -> list[BirefringenceEstimate]:
        return [BirefringenceEstimate.from_dict(e) for e in self.raw.get("birefringence_estimates", [])]

    def with_source(self, **changes) -> "Scenario":
        return replace(self, source=replace(self.source, **changes))


def _sellmeier(ref, base: Path | None) -> SellmeierModel:
    if ref in (None, "fused_silica_malitson"):
        return fused_silica()
    if isinstance(ref, dict):
        return SellmeierModel.from_dict(ref)
    p = Path(ref)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.exists():
        raise DomainError(f"Sellmeier file not found: {p}")
    return SellmeierModel.from_json(p)


def build_source_config(src: dict, wg: WaveguideSpec, model: SellmeierModel, n2: float) -> SourceConfig:
    pump = float(src.get("pump_nm", 957.0))
    rep = float(src.get("rep_rate_hz", 80e6))
    if "peak_power_w" in src:
        p0 = float(src["peak_power_w"])
    elif src.get("pulse_duration_fs"):
        p0 = peak_power(float(src.get("average_power_mw", 0.0)) * 1e-3, rep, float(src["pulse_duration_fs"]) * 1e-15)
    else:
        p0 = 0.0
    if "gamma" in src:
        gamma = float(src["gamma"])
    else:
        gamma = float(nonlinear_gamma(pump, n2, mfd_marcuse(wg, pump, model)))
    if "l_eff_mm" in src:
        l_eff = float(src["l_eff_mm"]) * 1e-3
    else:
        l_eff = wg.effective_length_m(pump)
    filt = src.get("signal_filter", {"center_nm": 830.0, "width_nm": 3.0})
    return SourceConfig(
        pump_nm=pump,
        peak_power_w=p0,
        pump_bandwidth_nm=float(src.get("pump_bandwidth_nm", 10.0)),
        rep_rate_hz=rep,
        gamma=gamma,
        l_eff_m=l_eff,
        collection_bandwidth_hz=filter_bandwidth_hz(filt["center_nm"], filt["width_nm"]),
        birefringence=wg.birefringence,
        pulse_duration_s=float(src["pulse_duration_fs"]) * 1e-15 if src.get("pulse_duration_fs") else None,
    )


def scenario_from_dict(raw: dict, path: Path | None = None) -> Scenario:
    base = path.parent if path else None
    try:
        model = _sellmeier(raw.get("sellmeier"), base)
        wg_raw = raw["waveguide"]
        wg = WaveguideSpec.from_dict(wg_raw)
        n2 = float(wg_raw.get("n2_m2_per_w", DEFAULT_N2))
        source = build_source_config(raw.get("source", {}), wg, model, n2)
        ps = dict(raw.get("pair_source", {"mean_pairs_per_pulse": 0.0}))
        ps.setdefault("rep_rate_hz", source.rep_rate_hz)
        pair_source = PairSourceModel.from_dict(ps)
        detectors = {}
        for d in raw.get("detectors", []):
            det = DetectorModel.from_dict(d)
            detectors[det.label] = det
    except KeyError as exc:
        raise DomainError(f"scenario missing field {exc}") from exc
    except TypeError as exc:
        raise DomainError(f"malformed scenario: {exc}") from exc
    return Scenario(raw, model, wg, source, pair_source, detectors, int(raw.get("seed", 0)),
                    str(raw.get("outputs", "out")), path)


def load_scenario(path: str | Path | None = None) -> Scenario:
    """Load a scenario file; ``None`` gives the bundled reference-device scenario."""
    if path is None:
        text = resources.files("sfwmtools.data").joinpath(DEFAULT_SCENARIO).read_text()
        return scenario_from_dict(json.loads(text))
    p = Path(path)
    if not p.exists():
        raise DomainError(f"scenario file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return scenario_from_dict(raw, p)
