"""Command line front end: ``demontape <command> [flags]``.

Exit codes: 0 success, 1 validation failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__, performance, ssa, sweep
from .params import ParameterError, Params

log = logging.getLogger("demontape")

COMMANDS = ("point", "curve", "phase", "pareto", "emp", "relax", "validate", "mc")


class UsageError(Exception):
    pass


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("machine")
    g.add_argument("--sigma", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--omega", type=float, default=0.5)
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--delta", type=float)
    g.add_argument("--p0", type=float)
    t = p.add_argument_group("durations")
    t.add_argument("--tau", type=float)
    t.add_argument("--tau-min", type=float, default=0.01)
    t.add_argument("--tau-max", type=float, default=100.0)
    t.add_argument("--tau-steps", type=int, default=200)
    t.add_argument("--tau-scale", choices=("linear", "log"), default="log")
    o = p.add_argument_group("output")
    o.add_argument("--out", help="output file (stdout when omitted)")
    o.add_argument("--format", choices=("csv", "json"), default=None)
    o.add_argument("--plot-script", action="store_true",
                   help="also write a matplotlib script next to --out")
    o.add_argument("--jobs", type=int, default=1)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--grid", default=None, help="N or NxM grid size")
    o.add_argument("--n-bits", type=int, default=10 ** 6)
    o.add_argument("--burn-in", type=int, default=1000)
    o.add_argument("--count", type=int, default=10 ** 4)
    o.add_argument("--config", help="key=value file; flags override it")
    o.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demontape", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"demontape {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "point": "all observables and bounds at one (params, tau)",
        "curve": "observables along a tau grid",
        "phase": "mode / optimal-time map over the (delta, epsilon) plane",
        "pareto": "parametric erasure power-efficiency trace",
        "emp": "efficiency at maximum power against Carnot efficiency",
        "relax": "exponential relaxation fit of the dissipation deficit",
        "validate": "random-draw audit of every bound",
        "mc": "Monte Carlo cross-check of the periodic steady state",
    }
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=helps[name]))
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            conf = read_config(args.config)
        except OSError as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
    return args


def _params(args) -> Params:
    return Params.resolve(omega=args.omega, sigma=args.sigma, epsilon=args.epsilon,
                          gamma=args.gamma, delta=args.delta, p0=args.p0)


def _tau_grid(args) -> np.ndarray:
    if args.tau_steps < 1:
        raise UsageError("--tau-steps must be at least 1")
    if args.tau_steps == 1:
        return np.array([args.tau if args.tau is not None else args.tau_min])
    if args.tau_scale == "log":
        return np.geomspace(args.tau_min, args.tau_max, args.tau_steps)
    return np.linspace(args.tau_min, args.tau_max, args.tau_steps)


def _grid(args, default):
    if args.grid is None:
        return default
    try:
        parts = [int(x) for x in args.grid.lower().split("x")]
    except ValueError:
        raise UsageError(f"bad --grid {args.grid!r}") from None
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or min(parts) < 1:
        raise UsageError(f"bad --grid {args.grid!r}")
    return tuple(parts)


def _emit(args, payload, columns, default_fmt, parameters):
    fmt = args.format or default_fmt
    text = sweep.render(payload, columns, fmt)
    if args.out:
        mpath = sweep.write_output(args.out, text, args.command, parameters)
        log.info("wrote %s (manifest %s)", args.out, mpath)
        if args.plot_script:
            script = sweep.plot_script(args.command, args.out)
            if script is not None:
                sweep._atomic_write(args.out + ".plot.py", script)
    else:
        sys.stdout.write(text)


def _resolved(args, params=None, **extra) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    if params is not None:
        d["resolved"] = sweep.params_record(params)
    d.update(extra)
    return d


def cmd_point(args) -> int:
    if args.tau is None:
        raise UsageError("point needs --tau")
    params = _params(args)
    rec = sweep.point_record(params, args.tau)
    _emit(args, rec, None, "json", _resolved(args, params))
    return 0


def cmd_curve(args) -> int:
    params = _params(args)
    rows = sweep.curve_rows(params, _tau_grid(args))
    _emit(args, rows, sweep.CURVE_COLUMNS, "csv", _resolved(args, params))
    return 0


def cmd_phase(args) -> int:
    n_delta, n_eps = _grid(args, (101, 101))
    tau_ref = args.tau if args.tau is not None else 100.0
    rows = sweep.phase_rows(args.omega, n_delta, n_eps, gamma=args.gamma,
                            tau_ref=tau_ref, jobs=args.jobs)
    _emit(args, rows, sweep.PHASE_COLUMNS, "csv", _resolved(args))
    return 0


def cmd_pareto(args) -> int:
    params = _params(args)
    rows = sweep.pareto_rows(params, _tau_grid(args))
    _emit(args, rows, sweep.PARETO_COLUMNS, "csv", _resolved(args, params))
    return 0


def cmd_emp(args) -> int:
    delta = args.delta if args.delta is not None else (
        2 * args.p0 - 1 if args.p0 is not None else 0.0)
    n = _grid(args, (40, 40))[0]
    eps_grid = args.omega * np.arange(1, n + 1) / n
    rows = sweep.emp_rows(delta, args.omega, eps_grid, gamma=args.gamma)
    _emit(args, rows, sweep.EMP_COLUMNS, "csv",
          _resolved(args, eta_carnot_min=performance.eta_carnot_min(delta, args.omega)))
    return 0


def cmd_relax(args) -> int:
    if args.sigma is None and args.epsilon is None:
        sets = [Params.resolve(**s) for s in sweep.RELAX_PRESETS]
    else:
        sets = [_params(args)]
    rows = sweep.relax_rows(sets)
    _emit(args, rows, sweep.RELAX_COLUMNS, "csv", _resolved(args))
    return 0 if all(r["rel_error"] < 0.01 for r in rows) else 1


def cmd_validate(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    n = _grid(args, (20, 20))[0]
    report = sweep.validate_report(args.count, args.seed, audit_n=n)
    _emit(args, report, None, "json", _resolved(args))
    return 1 if report["violations"] else 0


def cmd_mc(args) -> int:
    if args.tau is None:
        raise UsageError("mc needs --tau")
    params = _params(args)
    cfg = ssa.McConfig(params, args.tau, args.n_bits, seed=args.seed, burn_in=args.burn_in)
    report = ssa.compare_with_analytic(cfg)
    _emit(args, report, None, "json", _resolved(args, params))
    return 0 if report["passed"] else 1


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (ParameterError, UsageError) as exc:
        print(f"demontape: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, performance.RegionError) as exc:
        print(f"demontape: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
