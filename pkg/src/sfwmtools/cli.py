"""Command-line entry point: ``sfwm <subcommand>``.

Every file written carries tool version, scenario hash, seed and the
Sellmeier coefficients; the wall-clock timestamp goes to a ``.meta.json``
sidecar so the data files themselves are byte-reproducible.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .dispersion import refractive_index, wavenumber
from .errors import DomainError, FitError, NoSolution
from .fit import BirefringenceEstimate, birefringence_consistency_report, fit_birefringence, read_tuning_csv
from .pairgen import klyshko_analysis, MeasuredCounts, tuning_curve
from .phasematch import phasematch_curve
from .quantumstats import cauchy_schwarz, g2_cross, g2_self, purity_from_g2, simulate_counts
from .scenario import Scenario, load_scenario
from .waveguide import fit_step_index, read_mfd_csv

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
OUTPUT_ENV = "SFWM_OUTPUT_DIR"
DEFAULT_BIREFRINGENCE = (1.0e-4, 1.64e-4, 2.5e-4, 4.0e-4)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _provenance(sc: Scenario | None, seed: int | None = None) -> dict:
    prov = {"tool": "sfwmtools", "tool_version": __version__}
    if sc is not None:
        prov.update(scenario_hash=sc.hash, seed=sc.seed if seed is None else seed, sellmeier=sc.model.to_dict())
    return prov


def _sidecar(path: Path, prov: dict) -> None:
    meta = dict(prov, file=path.name, timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _render_csv(header, rows, prov: dict | None) -> str:
    buf = io.StringIO()
    if prov:
        for key in ("tool_version", "scenario_hash", "seed"):
            if key in prov:
                buf.write(f"# {key}: {prov[key]}\n")
        if "sellmeier" in prov:
            buf.write(f"# sellmeier: {json.dumps(prov['sellmeier'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path: Path, header, rows, prov: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(_render_csv(header, rows, prov))
    _sidecar(path, prov)
    return path


def write_json(path: Path, payload: dict, prov: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(dict(payload, provenance=prov), indent=2, sort_keys=True) + "\n")
    _sidecar(path, prov)
    return path


def _outdir(args, sc: Scenario | None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(sc.outputs if sc else "out")


def _scenario(args) -> Scenario:
    sc = load_scenario(getattr(args, "scenario", None))
    if getattr(args, "seed", None) is not None:
        sc.seed = args.seed
    return sc


def cmd_dispersion(args) -> int:
    sc = load_scenario(args.scenario) if args.scenario else None
    model = sc.model if sc else load_scenario().model
    rows = []
    for lam in args.wavelengths:
        rows.append([_fmt(lam), _fmt(refractive_index(model, lam)), _fmt(wavenumber(model, lam, args.index_offset))])
    header = ["wavelength_nm", "n", "k_rad_per_m"]
    if args.out:
        prov = _provenance(sc) if sc else dict(_provenance(None), sellmeier=model.to_dict())
        write_csv(Path(args.out), header, rows, prov)
    else:
        sys.stdout.write(_render_csv(header, rows, None))
    return EXIT_OK


def cmd_phasematch(args) -> int:
    sc = _scenario(args)
    out = _outdir(args, sc)
    prov = _provenance(sc)
    bs = DEFAULT_BIREFRINGENCE if args.birefringence is None else args.birefringence
    gp = sc.source.gamma_p0 if args.with_spm else 0.0
    for b in bs:
        curve = phasematch_curve(sc.model, b, tuple(args.pump_range), args.step, gp)
        rows = [[_fmt(p.pump_nm), _fmt(p.signal_nm), _fmt(p.idler_nm), _fmt(p.delta_k), _fmt(p.birefringence)]
                for p in curve]
        path = write_csv(out / f"phasematch_B{b:.3e}.csv",
                         ["pump_nm", "signal_nm", "idler_nm", "delta_k_rad_per_m", "birefringence"], rows, prov)
        print(path)
    return EXIT_OK


def cmd_tuning(args) -> int:
    sc = _scenario(args)
    cfg = sc.source
    if args.l_eff_mm is not None:
        cfg = sc.with_source(l_eff_m=args.l_eff_mm * 1e-3).source
    if args.birefringence is not None:
        cfg = sc.with_source(birefringence=args.birefringence).source
    curve = tuning_curve(cfg, sc.model, args.fixed_nm, tuple(args.pump_range), args.step, args.fixed_role)
    rows = [[_fmt(t.pump_nm), _fmt(t.normalized_rate), _fmt(t.delta_k)] for t in curve]
    path = write_csv(_outdir(args, sc) / args.name, ["pump_nm", "normalized_rate", "delta_k"], rows, _provenance(sc))
    print(path)
    return EXIT_OK


def _g(fn, rec):
    try:
        v, e = fn(rec)
        return {"value": v, "std_error": e}
    except DomainError as exc:
        return {"value": None, "std_error": None, "error": str(exc)}


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    src = sc.pair_source
    if args.mu is not None:
        src = replace(src, mean_pairs_per_pulse=args.mu)
    modes = ["cross", "self_signal", "self_idler"] if args.mode == "all" else [args.mode]
    out = _outdir(args, sc)
    summary = {}
    for j, mode in enumerate(modes):
        det_a, det_b, dur = sc.simulation_setup(mode)
        duration = args.duration if args.duration is not None else dur
        if duration is None:
            raise DomainError(f"no duration given for mode {mode}")
        seed = sc.seed + j
        rec = simulate_counts(src, det_a, det_b, duration, seed, mode)
        prov = _provenance(sc, seed)
        print(write_json(out / f"record_{mode}.json", rec.to_dict(), prov))
        if mode.startswith("cross"):
            summary["g2_si"] = _g(g2_cross, rec)
        elif mode == "self_signal":
            summary["g2_ss"] = _g(g2_self, rec)
        else:
            summary["g2_ii"] = _g(g2_self, rec)
    gss = summary.get("g2_ss", {}).get("value")
    if gss is not None:
        try:
            summary["purity"] = purity_from_g2(gss)
        except DomainError as exc:
            summary["purity"] = None
            summary["purity_error"] = str(exc)
    keys = ("g2_ss", "g2_ii", "g2_si")
    if all(k in summary for k in keys):
        try:
            ratio, n_sigma = cauchy_schwarz(*((summary[k]["value"], summary[k]["std_error"]) for k in keys))
            summary["cauchy_schwarz"] = {"violation_ratio": ratio, "n_sigma": n_sigma}
        except (DomainError, TypeError) as exc:
            summary["cauchy_schwarz"] = {"violation_ratio": None, "n_sigma": None, "error": str(exc) or "g2 missing"}
    print(write_json(out / "simulation_summary.json", summary, _provenance(sc)))
    return EXIT_OK


def cmd_fit(args) -> int:
    sc = _scenario(args)
    data = Path(args.data)
    if not data.exists():
        raise DomainError(f"data file not found: {data}")
    samples = read_tuning_csv(data, default_uncertainty=args.uncertainty)
    fixed_nm = args.fixed_nm
    l_eff = args.l_eff_mm * 1e-3 if args.l_eff_mm is not None else sc.source.l_eff_m
    rep = fit_birefringence(samples, sc.model, fixed_nm, l_eff, args.float_l, sc.source.gamma_p0,
                            args.fixed_role, bootstrap=args.bootstrap, seed=sc.seed)
    prov = dict(_provenance(sc), input_file=data.name, input_sha256=hashlib.sha256(data.read_bytes()).hexdigest())
    print(write_json(_outdir(args, sc) / args.name, rep.to_dict(), prov))
    print(f"birefringence = {rep.birefringence:.6e} +/- {rep.birefringence_err:.2e}  chi2/dof = {rep.chi2_per_dof:.3g}")
    return EXIT_OK


def cmd_klyshko(args) -> int:
    sc = _scenario(args)
    flags = (args.singles_signal, args.singles_idler, args.coincidences)
    if all(v is not None for v in flags):
        base = sc.measured_counts() if "measured_counts" in sc.raw else None
        m = MeasuredCounts(
            *flags,
            det_eff_signal=args.det_eff_signal or (base.det_eff_signal if base else 1.0),
            det_eff_idler=args.det_eff_idler or (base.det_eff_idler if base else 1.0),
            integration_time_s=args.integration_time,
        )
    elif any(v is not None for v in flags):
        raise DomainError("give all of --singles-signal, --singles-idler, --coincidences or none")
    else:
        m = sc.measured_counts()
    res = klyshko_analysis(m, sc.source.rep_rate_hz if args.subtract_accidentals else None)
    print(write_json(_outdir(args, sc) / "klyshko.json", res.report(m), _provenance(sc)))
    print(f"coupling signal = {res.coupling_signal:.4g}, idler = {res.coupling_idler:.4g}, "
          f"internal rate = {res.internal_pair_rate:.4g} /s")
    return EXIT_OK


def cmd_report(args) -> int:
    sc = _scenario(args)
    estimates = sc.estimates()
    if args.fit_report:
        fr = json.loads(Path(args.fit_report).read_text())
        estimates.append(BirefringenceEstimate("fit", fr["birefringence"], fr["birefringence_err"],
                                               wavelength_nm=sc.source.pump_nm))
    report = birefringence_consistency_report(estimates)
    print(write_json(_outdir(args, sc) / "birefringence_report.json", report, _provenance(sc)))
    for flag in report["flags"]:
        print(f"flag: {flag}")
    return EXIT_OK


def cmd_mfd(args) -> int:
    sc = _scenario(args)
    samples = read_mfd_csv(args.data)
    res = fit_step_index(samples, sc.model)
    wg = sc.waveguide.to_dict()
    wg.update(core_diameter_um=res.core_diameter_um, delta_n=res.delta_n)
    payload = {"waveguide": wg, "rms_residual_um": res.rms_residual_um}
    print(write_json(_outdir(args, sc) / "waveguide_fit.json", payload, _provenance(sc)))
    print(f"core diameter = {res.core_diameter_um:.4f} um, delta_n = {res.delta_n:.4e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfwm", description="Birefringent-waveguide SFWM pair-source toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", help="scenario JSON (default: bundled reference device)")
            sp.add_argument("--seed", type=int, help="override scenario seed")
        sp.add_argument("--out", help=f"output directory (or ${OUTPUT_ENV})")

    sp = sub.add_parser("dispersion", help="refractive index and wavenumber table")
    sp.add_argument("wavelengths", nargs="*", type=float, help="vacuum wavelengths in nm")
    sp.add_argument("--index-offset", type=float, default=0.0, help="birefringent index offset")
    sp.add_argument("--scenario", help="scenario JSON supplying the Sellmeier model")
    sp.add_argument("--out", help="CSV file (default: stdout)")
    sp.set_defaults(func=cmd_dispersion)

    sp = sub.add_parser("phasematch", help="phase-matching curves, one CSV per birefringence")
    common(sp)
    sp.add_argument("--birefringence", "-B", nargs="*", type=float,
                    help="birefringence values (default: 1.0e-4 1.64e-4 2.5e-4 4.0e-4)")
    sp.add_argument("--pump-range", nargs=2, type=float, default=(900.0, 1000.0), metavar=("LO", "HI"))
    sp.add_argument("--step", type=float, default=1.0, help="pump step in nm")
    sp.add_argument("--with-spm", action="store_true", help="include the (2/3) gamma P0 term")
    sp.set_defaults(func=cmd_phasematch)

    sp = sub.add_parser("tuning", help="normalized sinc^2 tuning curve versus pump")
    common(sp)
    sp.add_argument("--fixed-nm", "--signal", type=float, default=830.0, dest="fixed_nm")
    sp.add_argument("--fixed-role", choices=("signal", "idler"), default="signal")
    sp.add_argument("--pump-range", nargs=2, type=float, default=(945.0, 970.0), metavar=("LO", "HI"))
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--l-eff-mm", type=float)
    sp.add_argument("--birefringence", "-B", type=float)
    sp.add_argument("--name", default="tuning.csv")
    sp.set_defaults(func=cmd_tuning)

    sp = sub.add_parser("simulate", help="Monte Carlo photon counting and g2 summary")
    common(sp)
    sp.add_argument("--mode", choices=("all", "cross", "self_signal", "self_idler", "cross_shuffled"), default="all")
    sp.add_argument("--duration", type=float, help="simulated seconds (default: per-mode scenario value)")
    sp.add_argument("--mu", type=float, help="override mean pairs per pulse")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit birefringence to tuning data")
    sp.add_argument("data", help="CSV with pump_nm, normalized_counts, uncertainty")
    common(sp)
    sp.add_argument("--fixed-nm", type=float, default=830.0)
    sp.add_argument("--fixed-role", choices=("signal", "idler"), default="signal")
    sp.add_argument("--l-eff-mm", type=float)
    sp.add_argument("--float-l", action="store_true", help="also fit L_eff")
    sp.add_argument("--uncertainty", type=float, default=0.01, help="used when the CSV has no uncertainty column")
    sp.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples (seeded)")
    sp.add_argument("--name", default="fit_report.json")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("klyshko", help="coupling efficiencies and internal pair rate from counts")
    common(sp)
    sp.add_argument("--singles-signal", type=float)
    sp.add_argument("--singles-idler", type=float)
    sp.add_argument("--coincidences", type=float)
    sp.add_argument("--det-eff-signal", type=float)
    sp.add_argument("--det-eff-idler", type=float)
    sp.add_argument("--integration-time", type=float, default=1.0)
    sp.add_argument("--subtract-accidentals", action="store_true")
    sp.set_defaults(func=cmd_klyshko)

    sp = sub.add_parser("report", help="birefringence consistency report")
    common(sp)
    sp.add_argument("--fit-report", help="fit_report.json to include as an extra estimate")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("mfd-fit", help="fit step-index diameter and index contrast to MFD data")
    sp.add_argument("data", help="CSV with wavelength_nm, mfd_x_um, mfd_y_um")
    common(sp)
    sp.set_defaults(func=cmd_mfd)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FitError, NoSolution) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
