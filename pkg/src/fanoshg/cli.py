"""Command-line front end: ``fanoshg run | search | sweep | validate``."""

import argparse
import csv
import dataclasses
import logging
import math
import sys
from pathlib import Path

from . import oracles
from .analytics import (FIXED_POINT, TIME_EVOLUTION, EnhancementReport, Shorthands,
                        calibrate_drive_report, solve_fixed_point)
from .config import dump_json, load_config, load_preset, params_table, preset_names
from .dynamics import integrate, verify_ansatz
from .errors import (ConfigError, FanoSHGError, NoBracketError, NonFiniteError,
                     NotConvergedError, ParameterError, StiffnessError)
from .explore import run_search, sweep
from .model import injected_fault

log = logging.getLogger("fanoshg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_BLOWUP = 4
EXIT_ORACLE = 5


def _fmt(digits):
    return lambda v: format(v, f".{digits}g")


def _load(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError(f"need --config <path> or --preset <name> (presets: {preset_names()})")
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if getattr(args, "dump_trajectory", False):
        changes["dump_trajectory"] = True
    if getattr(args, "csv_digits", None):
        changes["csv_digits"] = args.csv_digits
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _out_dir(cfg):
    path = Path(cfg.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "output.dir") from exc
    return path


def _steady_payload(st):
    return {
        "alpha1_t": st.alpha1_t, "alpha2_t": st.alpha2_t,
        "rho_ge1_t": st.rho_ge1_t, "rho_ge2_t": st.rho_ge2_t,
        "rho_ee1": st.rho_ee1, "rho_ee2": st.rho_ee2,
        "abs_rho_ge1": abs(st.rho_ge1_t), "abs_rho_ge2": abs(st.rho_ge2_t),
        "y1": st.inversions.y1, "y2": st.inversions.y2,
        "residual": st.residual, "converged": st.converged,
        "t_elapsed": st.t_elapsed, "method": st.method, "iterations": st.iterations,
    }


def _fixed_point_section(params, steady=None):
    """Algebraic steady state and ratio, reported alongside the dynamics for context."""
    try:
        coupled = steady or solve_fixed_point(params)
        bare = solve_fixed_point(params.decoupled())
    except FanoSHGError as exc:
        return {"error": str(exc)}
    ratio = abs(coupled.alpha2_t) ** 2 / abs(bare.alpha2_t) ** 2
    return {"steady_state": _steady_payload(coupled), "alpha2_bare": bare.alpha2_t,
            "intensity_ratio": ratio}


def cmd_run(args):
    cfg = _load(args)
    out = _out_dir(cfg)
    params = cfg.params
    report = {"command": "run", "source": cfg.source}
    fp_steady = None
    if cfg.calibrate is not None:
        c = cfg.calibrate
        try:
            cal = calibrate_drive_report(params, c.target_y2, c.bracket, method=c.method,
                                         tol=c.tol, config=cfg.integrator)
        except (NoBracketError, NotConvergedError) as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        params = cal.params
        fp_steady = cal.steady if c.method == FIXED_POINT else None
        report["calibration"] = {"target_y2": c.target_y2, "method": c.method,
                                 "abs_eps_p": abs(params.eps_p), "y2": cal.y2,
                                 "monotone_prescan": cal.monotone,
                                 "prescan": [list(row) for row in cal.scan]}
        print(f"calibrated |eps_p| = {abs(params.eps_p):.6g} (y2 = {cal.y2:.6g})")
    report["params"] = params_table(params)
    report["integrator"] = dataclasses.asdict(cfg.integrator)
    report["undepleted_alpha1"] = params.eps_p / Shorthands.of(params).xi1
    dump = out / "trajectory.csv" if cfg.dump_trajectory else None
    path = out / "report.json"
    try:
        st = integrate(params, cfg.integrator, dump_path=dump, csv_digits=cfg.csv_digits)
    except (NonFiniteError, StiffnessError) as exc:
        report["status"] = "blowup"
        report["error"] = {"type": type(exc).__name__, "message": str(exc), "t": exc.t}
        report["fixed_point"] = _fixed_point_section(params, fp_steady)
        dump_json(report, path)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    report["steady_state"] = _steady_payload(st)
    report["fixed_point"] = _fixed_point_section(params, fp_steady)
    if not st.converged:
        report["status"] = "not_converged"
        dump_json(report, path)
        print(f"not converged by t = {st.t_elapsed:.4g} (derivative norm {st.residual:.3g}); "
              f"report: {path}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    report["ansatz_deviation"] = verify_ansatz(params, st)
    try:
        bare = integrate(params.decoupled(), cfg.integrator)
    except (NonFiniteError, StiffnessError) as exc:
        report["status"] = "blowup"
        report["error"] = {"type": type(exc).__name__, "message": str(exc), "t": exc.t}
        dump_json(report, path)
        return EXIT_BLOWUP
    if not bare.converged:
        report["status"] = "not_converged"
        dump_json(report, path)
        return EXIT_NOT_CONVERGED
    ratio = abs(st.alpha2_t) ** 2 / abs(bare.alpha2_t) ** 2 if bare.alpha2_t else math.nan
    enh = EnhancementReport(st.alpha2_t, bare.alpha2_t, ratio, params.chi2, params.eps_p,
                            TIME_EVOLUTION)
    report["enhancement"] = {"alpha2_coupled": enh.alpha2_coupled,
                             "alpha2_bare": enh.alpha2_bare,
                             "intensity_ratio": enh.intensity_ratio,
                             "chi2": enh.chi2, "eps_p": enh.eps_p, "method": enh.method}
    report["status"] = "ok"
    dump_json(report, path)
    y = st.inversions
    print(f"y1 = {y.y1:.6g}  y2 = {y.y2:.6g}  |rho_ge1| = {abs(st.rho_ge1_t):.6g}  "
          f"|rho_ge2| = {abs(st.rho_ge2_t):.6g}")
    print(f"intensity ratio = {ratio:.6g}  ansatz deviation = {report['ansatz_deviation']:.3g}")
    print(f"report: {path}")
    return EXIT_OK


def write_trace(path, result, names, digits=12):
    fmt = _fmt(digits)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *names, "digest", "objective", "pole", "failed"])
        for e in result.trace:
            w.writerow([e.index, *map(fmt, e.x), e.digest, fmt(e.objective), int(e.pole),
                        int(e.failed)])


def cmd_search(args):
    cfg = _load(args)
    if cfg.search is None:
        raise ConfigError("config has no [search] section", "search")
    spec = cfg.search
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threads is not None:
        changes["threads"] = args.threads
    if changes:
        spec = dataclasses.replace(spec, **changes)
    out = _out_dir(cfg)
    result = run_search(spec)
    write_trace(out / "trace.csv", result, spec.names, cfg.csv_digits)
    dump_json({"command": "search", "source": cfg.source, "strategy": spec.strategy,
               "objective": spec.objective, "seed": spec.seed,
               "variables": [list(v) for v in spec.variables],
               "best_x": dict(zip(spec.names, result.best_x)),
               "best_objective": result.best_objective,
               "best_params": params_table(result.best_params),
               "eval_count": result.eval_count, "failures": result.failures,
               "poles": result.poles}, out / "summary.json")
    print(f"best objective {result.best_objective:.6g} after {result.eval_count} evaluations "
          f"({result.failures} failed, {result.poles} poles)")
    for name, value in zip(spec.names, result.best_x):
        print(f"  {name} = {value:.10g}")
    return EXIT_OK


SWEEP_COLUMNS = ("value", "objective_crude", "objective_full", "pole", "denominator_re",
                 "denominator_im")


def write_sweep(path, rows, digits=12):
    fmt = _fmt(digits)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.value), fmt(r.crude), fmt(r.full), int(r.pole),
                        fmt(r.denominator.real), fmt(r.denominator.imag)])


def cmd_sweep(args):
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section", "sweep")
    sw = cfg.sweep
    out = _out_dir(cfg)
    try:
        rows = sweep(cfg.params, sw.variable, sw.values, full=sw.full, config=cfg.integrator)
    except ParameterError as exc:
        raise ConfigError(str(exc), "sweep.variable") from exc
    write_sweep(out / "sweep.csv", rows, cfg.csv_digits)
    finite = [r for r in rows if math.isfinite(r.crude)]
    best = max(finite, key=lambda r: r.crude) if finite else None
    dump_json({"command": "sweep", "source": cfg.source, "variable": sw.variable,
               "points": len(rows), "poles": sum(r.pole for r in rows),
               "peak_value": best.value if best else None,
               "peak_objective_crude": best.crude if best else None}, out / "summary.json")
    if best:
        print(f"{len(rows)} points; crude objective peaks at {sw.variable} = {best.value:.10g} "
              f"({best.crude:.6g})")
    return EXIT_OK


def cmd_validate(args):
    if args.inject_fault:
        with injected_fault(args.inject_fault):
            results = oracles.run_all(quick=args.quick)
    else:
        results = oracles.run_all(quick=args.quick)
    print(oracles.format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


def build_parser():
    parser = argparse.ArgumentParser(prog="fanoshg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--preset", help=f"bundled preset ({', '.join(preset_names())})")
        p.add_argument("--out", help="output directory (overrides [output].dir)")
        p.add_argument("--csv-digits", type=int, help="significant digits in CSV output")

    p = sub.add_parser("run", help="integrate to steady state and report the enhancement")
    common(p)
    p.add_argument("--dump-trajectory", action="store_true", help="write trajectory.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("search", help="maximise an objective over parameter space")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="evaluate objectives along one parameter axis")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    p.add_argument("--inject-fault", choices=["flip-emitter-source"],
                   help="test hook: corrupt the equations and expect failures")
    p.add_argument("--quick", action="store_true", help="smaller samples")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
