"""Command-line front end: constants, simulate, classify, sweep, fit.

Exit codes: 0 completed, 2 configuration or input error, 3 blow-up detected,
4 numerical instability, 5 fit error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .decay import FitError, select_fit, write_envelope_csv
from .energetics import RECORD_FIELDS
from .kernels import (ConstantXi, KernelError, LogMixedXi, PowerLawXi, mass_threshold,
                      xi_for_kernel)
from .potential_well import WellClass, assess_initial_data, well_constants
from .solver import ProblemParams, Termination, certify_blowup, make_initial_data, run
from .weighted_space import read_field_csv, resolve_seed

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_INSTABILITY, EXIT_FIT = 0, 2, 3, 4, 5
PHASE_COLUMNS = ("A", "E0", "I0", "classification", "outcome", "detected_time", "Tstar_bound", "error")


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, inf/nan to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _problem(cfg: ExperimentConfig) -> ProblemParams:
    return ProblemParams(cfg.problem.p, cfg.problem.a, cfg.make_kernel(), cfg.make_grid(),
                         source_enabled=cfg.problem.source)


def _initial_data(cfg: ExperimentConfig, grid, amplitude=None):
    A = cfg.init.amplitude if amplitude is None else amplitude
    custom = None
    if cfg.init.family == "custom":
        try:
            custom = read_field_csv(cfg.init.path, grid)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"init.path: {exc}") from None
    return make_initial_data(grid, cfg.init.family, A, cfg.init.velocity_scale, custom=custom)


def _seed(cfg):
    return resolve_seed(cfg.analysis.seed)


def _params_block(cfg: ExperimentConfig) -> dict:
    return {"kernel": cfg.make_kernel().to_config(), "p": cfg.problem.p, "a": cfg.problem.a,
            "source": cfg.problem.source, "ell": cfg.grid.ell, "n": cfg.grid.n, "dt": cfg.dt,
            "T": cfg.time.T, "record_every": cfg.time.record_every, "adaptive": cfg.time.adaptive,
            "init": {"family": cfg.init.family, "amplitude": cfg.init.amplitude,
                     "velocity_scale": cfg.init.velocity_scale}, "seed": _seed(cfg)}


# --------------------------------------------------------------------------
# subcommands (each returns a report dict and an exit code)


def cmd_constants(cfg: ExperimentConfig) -> tuple[dict, int]:
    grid, kernel, p = cfg.make_grid(), cfg.make_kernel(), cfg.problem.p
    const = well_constants(grid, kernel, p, seed=_seed(cfg))
    delta = cfg.delta if cfg.delta is not None else 0.0
    report = {"l": const.l, "C_p": const.C_p, "C_star": const.C_star, "d1": const.d1, "p": p,
              "delta": delta, "mass": kernel.mass(), "mass_threshold": mass_threshold(p, delta),
              "seed": _seed(cfg)}
    dump_json(report, _outdir(cfg) / "constants.json")
    return report, EXIT_OK


def _assess(cfg, grid, u0, u1):
    return assess_initial_data(grid, u0, u1, cfg.problem.p, cfg.problem.a, cfg.make_kernel(),
                               delta=cfg.delta, seed=_seed(cfg), source_enabled=cfg.problem.source)


def cmd_classify(cfg: ExperimentConfig) -> tuple[dict, int]:
    grid = cfg.make_grid()
    u0, u1 = _initial_data(cfg, grid)
    report = {"params": _params_block(cfg), "well": _assess(cfg, grid, u0, u1).as_dict()}
    dump_json(report, _outdir(cfg) / "classify.json")
    return report, EXIT_OK


def write_trajectory_csv(path, traj) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for rec in traj.records:
            w.writerow([repr(float(getattr(rec, f))) for f in RECORD_FIELDS])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """(t, E) columns of a trajectory CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    try:
        t = np.array([float(r["t"]) for r in rows])
        E = np.array([float(r["E"]) for r in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: missing or malformed t/E columns ({exc})") from None
    return t, E


_EXIT_FOR = {Termination.COMPLETED: EXIT_OK, Termination.BLOWUP: EXIT_BLOWUP,
             Termination.INSTABILITY: EXIT_INSTABILITY}


def _simulate(cfg: ExperimentConfig, amplitude=None):
    params = _problem(cfg)
    u0, u1 = _initial_data(cfg, params.grid, amplitude)
    well = _assess(cfg, params.grid, u0, u1)
    traj = run(params, u0, u1, cfg.time.T, cfg.dt, record_every=cfg.time.record_every,
               blowup_ratio=cfg.analysis.blowup_threshold_ratio, adaptive=cfg.time.adaptive)
    return params, u0, u1, well, traj


def cmd_simulate(cfg: ExperimentConfig) -> tuple[dict, int]:
    params, u0, u1, well, traj = _simulate(cfg)
    out = _outdir(cfg)
    write_trajectory_csv(out / "trajectory.csv", traj)
    summary = {"params": _params_block(cfg), "termination": traj.termination.value,
               "blowup_time": traj.blowup_time, "constraint_residual_max": traj.constraint_residual_max,
               "steps": traj.steps, "final_time": float(traj.times[-1]), "well": well.as_dict()}
    if traj.termination is Termination.BLOWUP:
        cert = certify_blowup(params, u0, u1, cfg.time.T, cfg.dt, cfg.analysis.blowup_threshold_ratio,
                              adaptive=cfg.time.adaptive)
        summary["blowup_refinement"] = {"time": cert.time, "time_half_dt": cert.time_refined,
                                        "relative_change": cert.relative_change,
                                        "certified": cert.certified}
        if well.certificate is not None:
            summary["blowup_within_bound"] = traj.blowup_time <= well.certificate.Tstar_bound
    dump_json(summary, out / "summary.json")
    return summary, _EXIT_FOR[traj.termination]


def _sweep_row(args) -> dict:
    cfg, A = args
    row = dict.fromkeys(PHASE_COLUMNS, "")
    row["A"] = A
    try:
        _, _, _, well, traj = _simulate(cfg, A)
        c = well.classification
        row.update(E0=c.E0, I0=c.I0, classification=c.tag.value, outcome=traj.termination.value)
        if traj.blowup_time is not None:
            row["detected_time"] = traj.blowup_time
        if well.certificate is not None:
            row["Tstar_bound"] = well.certificate.Tstar_bound
    except Exception as exc:  # a failing row is reported, the sweep goes on
        row["outcome"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def cmd_sweep(cfg: ExperimentConfig, amplitudes, jobs: int = 1) -> tuple[list[dict], int]:
    if not amplitudes:
        raise ConfigError("sweep needs a non-empty amplitude list")
    tasks = [(cfg, float(A)) for A in amplitudes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))  # map keeps input order
    else:
        rows = [_sweep_row(t) for t in tasks]
    with open(_outdir(cfg) / "phase.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in PHASE_COLUMNS])
    return rows, EXIT_OK


def _xi_and_r(cfg: ExperimentConfig):
    an = cfg.analysis
    r = None if math.isnan(an.fit_r) else an.fit_r
    if an.xi == "auto":
        try:
            r_k, xi = xi_for_kernel(cfg.make_kernel())
        except KernelError:
            r_k, xi = None, ConstantXi(an.xi_value)
        return xi, (r_k if r is None else r)
    if an.xi == "constant":
        xi = ConstantXi(an.xi_value)
    elif an.xi == "powerlaw":
        xi = PowerLawXi(an.xi_m, an.xi_scale)
    else:
        xi = LogMixedXi(cfg.kernel.r)
    return xi, r


def cmd_fit(cfg: ExperimentConfig, trajectory_path) -> tuple[dict, int]:
    try:
        t, E = read_trajectory_csv(trajectory_path)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {trajectory_path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    xi, r = _xi_and_r(cfg)
    try:
        best, fits = select_fit((t, E), xi, r, cfg.analysis.fit_t0)
    except FitError as exc:
        return {"error": str(exc)}, EXIT_FIT
    out = _outdir(cfg)
    report = {"selected": best.as_dict(), "fits": [f.as_dict() for f in fits],
              "xi": {"kind": xi.kind, **{k: v for k, v in vars(xi).items()}}, "r": r,
              "trajectory": str(trajectory_path)}
    dump_json(report, out / "fit.json")
    write_envelope_csv(out / "envelope.csv", (t, E), best, xi)
    return report, EXIT_OK


# --------------------------------------------------------------------------


def _parse_amplitudes(text):
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse amplitude list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscowell", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("constants", "simulate", "classify", "sweep", "fit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file (defaults if omitted)")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        if name == "sweep":
            sp.add_argument("--amplitudes", required=True, help="comma-separated amplitudes")
            sp.add_argument("--jobs", type=int, default=1)
        if name == "fit":
            sp.add_argument("trajectory", help="trajectory CSV written by simulate")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.out:
            cfg = replace(cfg, output=replace(cfg.output, dir=args.out))
        _outdir(cfg)
        (Path(cfg.output.dir) / "config.txt").write_text(cfg.to_text())
        if args.command == "constants":
            report, code = cmd_constants(cfg)
        elif args.command == "classify":
            report, code = cmd_classify(cfg)
        elif args.command == "simulate":
            report, code = cmd_simulate(cfg)
        elif args.command == "sweep":
            report, code = cmd_sweep(cfg, _parse_amplitudes(args.amplitudes), args.jobs)
        else:
            report, code = cmd_fit(cfg, args.trajectory)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "sweep":
        for row in report:
            print(",".join(_cell(row[c]) for c in PHASE_COLUMNS))
    else:
        sys.stdout.write(dump_json(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
