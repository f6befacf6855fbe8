"""
Command-line interface.

Subcommands: ``solve`` (single point, JSON on stdout), ``sweep`` (config
file to CSV), ``figure`` (preset to CSV), ``validate`` (oracle suite) and
``calibrate-abar1``.  Exit codes: 0 success, 1 validation failure,
2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import fields

from . import __version__
from .config import ConfigError, MODEL_KEYS, NUMERICS_KEYS, merge, model_from, numerics_from, read_config, sweep_from
from .params import ModelParams, NumericsParams, validate

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _add_overrides(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    g = p.add_argument_group("model / numerics overrides (same names as the config keys)")
    for f in fields(ModelParams):
        g.add_argument(f"--{f.name}", default=None, metavar="V")
    for f in fields(NumericsParams):
        g.add_argument(f"--{f.name}", default=None, metavar="V")
    if sweep:
        s = p.add_argument_group("sweep overrides")
        s.add_argument("--axis1", default=None, metavar="AXIS", help='e.g. "s linear -6 6 241"')
        s.add_argument("--axis2", default=None, metavar="AXIS", help='e.g. "a_d list 0 0.32 0.73"')
        s.add_argument("--output", "-o", default=None, help="CSV path (stdout if omitted)")
        s.add_argument("--json", default=None, help="optional JSON mirror with metadata")
        s.add_argument("--workers", "-j", default=None, help="worker processes (env Q2DSCAT_WORKERS)")
        s.add_argument("--name", default=None)


def _overrides(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="q2dscat", description="Quasi-2D polar-molecule scattering with QDT boundary conditions.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single parameter point, JSON on stdout")
    p.add_argument("--config", "-c", default=None)
    p.add_argument("--abar1", type=float, default=None, help="override the calibrated abar1 in the universal-rate output")
    _add_overrides(p)

    p = sub.add_parser("sweep", help="run a sweep described by a config file")
    p.add_argument("config")
    _add_overrides(p, sweep=True)

    p = sub.add_parser("figure", help="run a figure preset")
    p.add_argument("name")
    p.add_argument("--print-config", action="store_true", help="print the preset as a config file and exit")
    _add_overrides(p, sweep=True)

    sub.add_parser("validate", help="run the oracle suite")

    p = sub.add_parser("calibrate-abar1", help="fit and store abar1 from the free-space p-wave solver")
    p.add_argument("--path", default=None, help="cache file (default ~/.cache/q2dscat/abar1.json)")
    return ap


def _solve(args) -> int:
    from .smatrix import CalibrationMissing, load_abar1, universal_rates
    from .solver import QuasiTwoD
    from .sweep import beta_3d_equivalent

    raw = merge(read_config(args.config), _overrides(args, MODEL_KEYS + NUMERICS_KEYS))
    params = model_from(raw)
    numerics = numerics_from(raw)
    bad = validate(params, numerics)
    if bad:
        raise ConfigError("; ".join(str(v) for v in bad))
    t = time.perf_counter()
    solver = QuasiTwoD(params, numerics)
    obs = solver.solve(params.s, params.y)
    out = {
        "params": params.to_dict(),
        "numerics": solver.numerics.to_dict(),
        "alpha": obs.alpha,
        "beta": obs.beta,
        "S00": [obs.S00.real, obs.S00.imag],
        "f": obs.f,
        "K_el": obs.K_el,
        "K_re": obs.K_re,
        "loss": obs.loss,
        "residual": obs.residual,
        "l_max": obs.l_max,
        "n_open": obs.n_open,
        "populations": [float(v) for v in obs.populations],
        "converged": obs.converged,
        "pole": obs.pole,
        "beta_eff": beta_3d_equivalent(obs.beta, params.q, params.a_h, int(params.m)),
        "elapsed_s": time.perf_counter() - t,
    }
    try:
        abar1 = args.abar1 if args.abar1 is not None else load_abar1()
        u = universal_rates(params.q, 2, params.ell_parity, g=params.g, abar1=abar1)
        out["universal"] = {"abar1": abar1, "K": u.K, "beta": u.beta}
    except CalibrationMissing:
        out["universal"] = None
    json.dump(out, sys.stdout, indent=2, default=lambda o: None if isinstance(o, float) and not math.isfinite(o) else str(o))
    sys.stdout.write("\n")
    return EXIT_OK


def _run_spec(spec, args) -> int:
    from .smatrix import CalibrationMissing, load_abar1
    from .sweep import run_sweep, to_csv, write_json

    t = time.perf_counter()
    records = run_sweep(spec)
    elapsed = time.perf_counter() - t
    text = to_csv(records)
    try:
        if spec.output:
            with open(spec.output, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if spec.json_output:
            try:
                abar1 = load_abar1()
            except CalibrationMissing:
                abar1 = None
            write_json(records, spec, spec.json_output, elapsed, abar1)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    n_err = sum(1 for r in records if r.error)
    logging.getLogger(__name__).info("%d rows, %d flagged with errors, %.1f s", len(records), n_err, elapsed)
    return EXIT_OK


def _sweep_overrides(args) -> dict:
    keys = MODEL_KEYS + NUMERICS_KEYS + ("axis1", "axis2", "output", "workers", "name")
    ov = _overrides(args, keys)
    if getattr(args, "json", None) is not None:
        ov["json"] = args.json
    return ov


def _sweep(args) -> int:
    raw = merge(read_config(args.config), _sweep_overrides(args))
    return _run_spec(sweep_from(raw), args)


def _figure(args) -> int:
    from .config import spec_to_ini
    from .sweep import figure_preset

    try:
        base = figure_preset(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    raw = merge({"model": {}, "numerics": {}, "sweep": {}}, _sweep_overrides(args))
    spec = sweep_from(raw, base)
    if args.print_config:
        sys.stdout.write(spec_to_ini(spec))
        return EXIT_OK
    return _run_spec(spec, args)


def _validate(args) -> int:
    from .validation import validate_suite

    checks = validate_suite(progress=lambda c: print(c.line(), flush=True))
    n_fail = sum(not c.passed for c in checks)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_VALIDATION


def _calibrate(args) -> int:
    from .smatrix import calibrate_abar1, save_abar1

    fit = calibrate_abar1()
    try:
        path = save_abar1(fit, args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"abar1": fit.value, "residual": fit.residual, "path": str(path)}))
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    handlers = {"solve": _solve, "sweep": _sweep, "figure": _figure, "validate": _validate, "calibrate-abar1": _calibrate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PermissionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
