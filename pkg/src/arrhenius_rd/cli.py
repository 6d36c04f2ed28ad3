"""Command-line front end.

    arrhenius-rd construct-reaction --row arrhenius
    arrhenius-rd build-diffusivity --R0 1
    arrhenius-rd solve --preset 3
    arrhenius-rd verify --preset 7 --grid 400,64
    arrhenius-rd stability --R0 1 --experiment

Every command writes one CSV (plus a JSON build for build-diffusivity) into
--out.  Numbers are printed with 17 significant digits and headers carry the
scenario hash instead of timestamps, so reruns are byte-identical.

Exit codes: 0 success, 2 invalid input, 3 splice failure, 4 incompatible
scenario, 5 tolerance breach, 6 inconclusive stability fit.
"""
import argparse
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import __version__
from . import construct as cs
from . import dsolve, scenario as scn, spatial, specfun, verify

EXIT_OK, EXIT_INVALID, EXIT_SPLICE, EXIT_INCOMPATIBLE, EXIT_TOLERANCE, EXIT_INCONCLUSIVE = 0, 2, 3, 4, 5, 6
RUN_SCHEMA = "arrhenius-rd/run"


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------ output

def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path, text):
    """Write through a temporary file in the same directory and rename into place."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(meta, columns, rows):
    lines = [f"# arrhenius-rd {__version__}"]
    lines += [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, meta, columns, rows):
    write_atomic(path, csv_text(meta, columns, rows))
    return path


def _pair(text, name):
    try:
        a, b = (x.strip() for x in text.split(","))
        return a, b
    except ValueError:
        raise CliError(f"{name} must look like A,B (got {text!r})")


def _grid(args, default):
    if args.grid is None:
        return default
    a, b = _pair(args.grid, "--grid")
    try:
        nr, nt = int(a), int(b)
    except ValueError:
        raise CliError(f"--grid needs two integers (got {args.grid!r})")
    if nr < 4 or nt < 1:
        raise CliError("--grid needs NR >= 4 and NT >= 1")
    return nr, nt


def _tol(args, default):
    tol = default if args.tol is None else args.tol
    if not tol > 0:
        raise CliError("--tol must be positive")
    return tol


def _run_options(args, command, keys):
    """Fill unset options from a run file {"schema": "arrhenius-rd/run", "version": 1, ...}."""
    if args.config is None:
        return
    doc = _read_json(args.config)
    if doc.get("schema") != RUN_SCHEMA or doc.get("version") != 1:
        raise CliError(f"run file must have schema {RUN_SCHEMA!r} and version 1")
    if doc.get("command", command) != command:
        raise CliError(f"run file is for {doc['command']!r}, not {command!r}")
    opts = doc.get("options", {})
    bad = set(opts) - set(keys) - {"tol", "grid"}
    if bad:
        raise CliError(f"unknown options {sorted(bad)} for {command}")
    for k, v in opts.items():
        if getattr(args, k, None) is None:
            setattr(args, k, v)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _default(args, key, value):
    if getattr(args, key, None) is None:
        setattr(args, key, value)
    return getattr(args, key)


def _out(args, name):
    return os.path.join(args.out, name)


# ------------------------------------------------------------ scenarios

def _scenario(args):
    """Scenario from --config (scenario file) or --preset/--variant."""
    if args.config is not None:
        if args.preset is not None:
            raise CliError("give --config or --preset, not both")
        s, doc, h = scn.load_scenario(_read_json(args.config))
        return s, doc, h
    if args.preset is None:
        raise CliError("a scenario is needed: --preset N or --config FILE")
    doc = {"schema": scn.SCENARIO_SCHEMA, "version": scn.SCENARIO_VERSION, "preset": args.preset}
    if args.variant:
        doc["variant"] = args.variant
    s, doc, h = scn.load_scenario(doc)
    return s, doc, h


def _doc_grid(doc, default):
    g = doc.get("grid", {})
    return int(g.get("nr", default[0])), int(g.get("nt", default[1]))


# ------------------------------------------------------------ commands

def cmd_construct_reaction(args):
    keys = ["row", "A", "kappa", "m", "R0", "B", "c1", "theta", "n"]
    _run_options(args, "construct-reaction", keys)
    row = _default(args, "row", "arrhenius")
    A = float(_default(args, "A", 1.0))
    kappa = float(_default(args, "kappa", 0.0))
    R0 = float(_default(args, "R0", 1.0))
    B = float(_default(args, "B", 1.0))
    n = int(_default(args, "n", 201))
    lo, hi = (float(x) for x in _pair(str(_default(args, "theta", "0,5")), "--theta"))
    if not 0 <= lo < hi or n < 2:
        raise CliError("--theta needs 0 <= LO < HI and --n >= 2")
    tol = _tol(args, 1e-9)
    theta = np.linspace(lo, hi, n)
    if row == "arrhenius":
        c1 = float(_default(args, "c1", 1.0))
        p = cs.SymmetryParams(A=A, kappa=0.0, c1=c1)
        d = cs.ArrheniusKappa0(R0, B, A, c1)
        r = cs.Arrhenius(R0, B)
        sample = np.linspace(max(lo, 0.15 * B), hi, 32)
    elif row in cs.CATALOGUE_ROWS:
        p = cs.SymmetryParams(A=A, kappa=kappa)
        params = {"m": float(_default(args, "m", 0.0)), "R0": R0, "B": B}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", cs.TableSignWarning)
            d, r = cs.catalogue_pair(row, params, p, form="printed")
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        sample = np.linspace(max(lo, 0.05), hi, 32)
    else:
        raise CliError(f"unknown row {row!r}; choose a, b, c, d or arrhenius")
    D = np.asarray(d(theta), dtype=float)
    R = np.asarray(r(theta), dtype=float)
    u = np.asarray(cs.kirchhoff_u(d, theta), dtype=float)
    res = cs.compatibility_residual(d, r, p, sample)
    worst = float(np.max(np.abs(res)))
    meta = {"command": "construct-reaction", "row": row, "params": json.dumps(p.to_dict(), sort_keys=True),
            "R0": _fmt(R0), "B": _fmt(B), "compatibility_max": _fmt(worst)}
    path = write_csv(_out(args, f"reaction_{row}.csv"), meta, ["theta", "D", "R", "u"], zip(theta, D, R, u))
    print(f"wrote {path}; max compatibility residual {worst:.3e}")
    if worst > tol and row != "c":
        print(f"compatibility residual {worst:.3e} exceeds {tol:g}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_build_diffusivity(args):
    keys = ["R0", "theta_max", "n"]
    _run_options(args, "build-diffusivity", keys)
    R0 = float(_default(args, "R0", 1.0))
    theta_max = float(_default(args, "theta_max", 19.5))
    n = int(_default(args, "n", 400))
    tol = _tol(args, 1e-10)
    build = dsolve.build_diffusivity(R0=R0, theta_max=theta_max, tol=tol)
    theta = np.geomspace(0.05, theta_max, n)
    u = build.integral(theta)
    D = build(theta)
    u_or = dsolve.oracle_from_series(R0, theta, 0.05, -1, build.series)
    R = R0 * np.exp(-1.0 / theta)
    D_or = -u_or / (R - u_or)
    D1 = dsolve.d1_closed(R0, theta)
    D2 = dsolve.d2_closed(R0, theta) if 0 < R0 < math.e else np.full(theta.shape, np.nan)
    gap = float(np.max(np.abs(D - D_or)))
    meta = {"command": "build-diffusivity", "R0": _fmt(R0), "theta_max": _fmt(theta_max), "build_tol": _fmt(tol),
            "build": json.dumps(scn._meta_of(build), sort_keys=True), "oracle_max_gap_D": _fmt(gap)}
    write_atomic(_out(args, "diffusivity.json"), build.to_json())
    path = write_csv(_out(args, "diffusivity.csv"), meta, ["theta", "u", "D", "D_oracle", "D1", "D2"],
                     zip(theta, u, D, D_or, D1, D2))
    print(f"wrote {path}; peak D {np.max(D):.6f} (bound {dsolve.dm_bound(R0):.6f}); oracle gap {gap:.2e}")
    if gap > 1e-9:
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_solve(args):
    s, doc, h = _scenario(args)
    sol = scn.assemble(s)
    nr, nt = _grid(args, _doc_grid(doc, (201, 5)))
    lo, hi = s.domain
    r = np.linspace(lo, hi, nr)
    if lo == 0.0 and s.profile.family not in ("cos", "J0", "j0"):
        raise CliError("this profile is singular at r = 0; give a domain that excludes it")
    times = s.times or tuple(np.linspace(s.t_range[0], s.t_range[1], nt))
    outputs = doc.get("outputs", list(scn.OUTPUTS))
    fields = {"theta": sol.theta, "u": sol.u, "flux": sol.flux}
    cols, data = ["r"], [r]
    for name in outputs:
        for t in times:
            cols.append(f"{name}(t={_fmt(t)})")
            data.append(np.asarray(fields[name](r, t), dtype=float) * np.ones_like(r))
    meta = {"command": "solve", "scenario_hash": h, "solution_hash": sol.meta["scenario_hash"],
            "preset": s.preset_id, "variant": s.variant, "A": _fmt(s.params.A), "kappa": _fmt(s.params.kappa),
            "compatibility_max": _fmt(sol.meta["compatibility"])}
    stem = f"solve_p{s.preset_id}" if s.preset_id else "solve"
    stem += f"_{s.variant}" if s.variant else ""
    path = write_csv(_out(args, stem + ".csv"), meta, cols, zip(*data))
    print(f"wrote {path} ({nr} radii x {len(times)} times)")
    return EXIT_OK


def cmd_verify(args):
    s, doc, h = _scenario(args)
    if args.corrupt is not None:
        if not args.corrupt > 0:
            raise CliError("--corrupt needs a positive factor")
        s.diffusivity = cs.ScaledDiffusivity(s.diffusivity, args.corrupt)
    sol = scn.assemble(s, check=args.corrupt is None)
    nr, nt = _grid(args, _doc_grid(doc, (400, 64)))
    tol = _tol(args, 1e-5)
    g = verify.grid_for(s, nr, nt)
    rep = verify.pde_residual(sol, s, g)
    rows = list(rep.as_rows())
    ok = rep.passed(tol)
    if args.evolve:
        err, _ = verify.oracle_agreement(s, sol)
        rows.append(("evolve_relative_error", err))
        ok = ok and err <= tol
    rows.append(("tolerance", tol))
    rows.append(("passed", int(ok)))
    meta = {"command": "verify", "scenario_hash": h, "solution_hash": sol.meta["scenario_hash"],
            "preset": s.preset_id, "variant": s.variant, "grid": f"{g.kind},{nr},{nt}",
            "window": f"{_fmt(g.r[0])},{_fmt(g.r[-1])}", "corrupt": _fmt(args.corrupt or 1.0)}
    stem = f"verify_p{s.preset_id}" if s.preset_id else "verify"
    stem += f"_{s.variant}" if s.variant else ""
    stem += "_corrupt" if args.corrupt is not None else ""
    path = write_csv(_out(args, stem + ".csv"), meta, ["quantity", "value"], rows)
    print(f"wrote {path}; relative residual {rep.relative:.3e}, order {rep.order:.3f}")
    if not ok:
        print(f"tolerance breach: residual {rep.max_abs_residual:.3e} at r = {rep.r_at_max:.6g}, "
              f"t = {rep.t_at_max:.6g}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def _modes(text):
    out = []
    for part in str(text).split(";"):
        a, b = _pair(part, "--modes")
        out.append((int(a), int(b)))
    return tuple(out)


def cmd_stability(args):
    keys = ["R0", "r1", "B", "D0", "eps", "modes", "t_end", "experiment"]
    _run_options(args, "stability", keys)
    lam01 = specfun.bessel_zero(0, 1).value
    R0 = float(_default(args, "R0", 1.0))
    r1 = float(_default(args, "r1", lam01))
    B = float(_default(args, "B", 1.0))
    D0 = float(_default(args, "D0", 1.0))
    crit = verify.stability_criterion(R0, r1, B, D0)
    print(f"group {crit.group:.10g}  threshold {crit.threshold:.10g}  margin {crit.margin:.6g}  "
          f"verdict {'pass' if crit.passed else 'fail'}")
    code = EXIT_OK if crit.passed else EXIT_TOLERANCE
    if not args.experiment:
        return code
    eps = float(_default(args, "eps", 1e-3))
    modes = _modes(_default(args, "modes", "1,1;2,1"))
    t_end = float(_default(args, "t_end", 3.0))
    nr, nphi = _grid(args, (128, 64))
    tol = _tol(args, verify.EVOLVE_TOL)
    tab = verify.stability_experiment(crit.group, eps, modes, nr, nphi, t_end, tol=tol)
    meta = {"command": "stability", "group": _fmt(crit.group), "threshold": _fmt(crit.threshold),
            "criterion": "pass" if crit.passed else "fail", "grid": f"{nr},{nphi}", "eps": _fmt(eps),
            "t_end": _fmt(t_end), "rate_slack": _fmt(verify.RATE_SLACK),
            "comparison_slack": _fmt(verify.COMPARISON_SLACK)}
    path = write_csv(_out(args, "stability.csv"), meta, tab.header(), tab.as_rows())
    for row in tab.rows:
        print(f"mode ({row.n},{row.m}): rate {row.rate:.6f} bound {row.bound_rate:.6f} "
              f"R2 {row.r2:.5f} excess {row.comparison_excess:.2e} -> {row.verdict}")
    print(f"wrote {path}")
    verdicts = {row.verdict for row in tab.rows}
    if "fail" in verdicts:
        return EXIT_TOLERANCE
    if "inconclusive" in verdicts:
        return EXIT_INCONCLUSIVE
    return code


# ------------------------------------------------------------ parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario file (solve, verify) or run file (others)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--tol", type=float, help="tolerance for the command's pass/fail check")
    common.add_argument("--preset", type=int, metavar="N", help="preset scenario 1..7")
    common.add_argument("--variant", help="preset variant (presets 6 and 7)")
    common.add_argument("--grid", metavar="NR,NT", help="radial and time nodes (NR,NPHI for stability)")

    parser = argparse.ArgumentParser(prog="arrhenius-rd", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct-reaction", parents=[common], help="tabulate D, R and u for a compatible pair")
    p.add_argument("--row", help="a, b, c, d or arrhenius (kappa = 0)")
    p.add_argument("--A", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=float, help="power for row a")
    p.add_argument("--R0", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--theta", metavar="LO,HI")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_construct_reaction)

    p = sub.add_parser("build-diffusivity", parents=[common], help="series and Taylor chain for D(theta)")
    p.add_argument("--R0", type=float)
    p.add_argument("--theta-max", dest="theta_max", type=float)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_build_diffusivity)

    p = sub.add_parser("solve", parents=[common], help="theta, u and flux profiles of a scenario")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="finite-difference residual of the full PDE")
    p.add_argument("--evolve", action="store_true", help="also run the method-of-lines oracle")
    p.add_argument("--corrupt", type=float, metavar="FACTOR", help="scale D to check that breaches are caught")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stability", parents=[common], help="stability criterion and perturbation experiment")
    p.add_argument("--R0", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--D0", type=float)
    p.add_argument("--experiment", action="store_true", default=None)
    p.add_argument("--eps", type=float)
    p.add_argument("--modes", metavar="N,M;N,M")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except dsolve.SpliceError as exc:
        print(f"splice failure: {exc}", file=sys.stderr)
        return EXIT_SPLICE
    except (cs.CompatibilityError, spatial.ProfileError) as exc:
        print(f"incompatible scenario: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except verify.EvolveError as exc:
        print(f"evolution failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (scn.ScenarioError, ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
