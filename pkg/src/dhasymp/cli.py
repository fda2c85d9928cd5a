"""``dhasymp`` command line.

Subcommands::

    constants      constant table, arithmetic and quadrature values
    verify         kernel/quadrature/profile self-checks
    simulate       run the solver from a config file, write snapshots
    compare        residuals of snapshots against expansion truncations
    profile-table  tabulate profile terms at chosen (t, x)

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, profiles
from .analysis import LqExponent, gamma, moments_of_grid, residual_report
from .io import (RunConfig, fmt_float, fnv1a64, load_config, read_snapshot, write_csv, write_json,
                 write_snapshot)
from .kernels import FIELD_PREFACTOR
from .profiles import ExpansionSpec, Moments
from .quadrature import QuadratureError, QuadratureSpec, integrate_finite
from .solver import BlowUpError, ConfigurationError, init_density, run, valid_window_end
from .verify import run_suite

log = logging.getLogger("dhasymp")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _parse_q_list(text):
    if text is None or not text.strip():
        return [LqExponent(1), LqExponent(2), LqExponent(math.inf)]
    try:
        return [LqExponent.parse(p) for p in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad --q list {text!r}: {exc}") from None


def _parse_window(text):
    if text is None:
        return None
    try:
        a, b = text.split(":")
        lo = float(a) if a.strip() else -math.inf
        hi = float(b) if b.strip() else math.inf
    except ValueError:
        raise UsageError(f"--window must look like T0:T1, got {text!r}") from None
    if hi < lo:
        raise UsageError("--window end precedes its start")
    return lo, hi


def _floats(text, name):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"bad number list for {name}: {text!r}") from None


def _out_dir(args):
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _args_hash(args, keys):
    text = "\n".join(f"{k} = {getattr(args, k)}" for k in sorted(keys)) + "\n"
    return fnv1a64(f"[{args.command}]\n{text}")


def _gnuplot(path, data_file, title, xcol, ycols, logscale=True):
    lines = [
        f"# generated by dhasymp {__version__}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
    ]
    if logscale:
        lines.append("set logscale xy")
    plots = [f"'{data_file}' using {xcol}:{c} with linespoints" for c in ycols]
    lines.append("plot " + ", \\\n     ".join(plots))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- constants

def constants_table(mode_list=("paper", "oracle")):
    """Rows of (name, value, source). Quadrature rows are recomputed each call."""
    rows = []
    for q in (1.0, 2.0, math.inf):
        rows.append((f"gamma_{'inf' if math.isinf(q) else int(q)}", gamma(q), "arithmetic"))
    rows.append(("kappa", profiles.KAPPA, "arithmetic"))
    rows.append(("moment_coefficient", profiles.MOMENT_COEFFICIENT, "arithmetic"))
    rows.append(("dimensionless_integral", profiles.LOG_INTEGRAL, "arithmetic"))
    rows.append(("dimensionless_integral", profiles.dimensionless_log_integral(), "quadrature"))
    rows.append(("dimensionless_integral_collapsed", _collapsed_log_integral(), "quadrature"))
    mc = {}
    for mode in mode_list:
        mc[mode] = profiles.moment_coefficient(Moments(1.0), mode=mode, method="collapsed")
        rows.append((f"moment_coefficient_{mode}", mc[mode], "quadrature"))
        rows.append((f"kappa_{mode}", mc[mode] / 3.0, "quadrature"))
    if "paper" in mc and "oracle" in mc:
        rows.append(("moment_coefficient_paper_over_oracle", mc["paper"] / mc["oracle"], "quadrature"))
    rows.append(("field_prefactor_paper_over_oracle", FIELD_PREFACTOR["paper"] / FIELD_PREFACTOR["oracle"],
                 "arithmetic"))
    rows.append(("u1rad_prefactor_paper_over_oracle",
                 profiles.U1RAD_PREFACTOR["paper"] / profiles.U1RAD_PREFACTOR["oracle"], "arithmetic"))
    return rows


def _collapsed_log_integral():
    """Second code path for the dimensionless integral.

    With ``a = s/(2+sig)`` the integrand becomes ``s^-2 a^(1/2) (2-a)^(-3/2)``
    on ``0 < a < s/2``; swapping the order, the s-integral over ``(2a, 1)``
    is ``1/(2a) - 1``, leaving one integral in ``a`` over ``(0, 1/2)``.
    """
    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13, singularity="inverse_sqrt_left")
    f = lambda a: a ** 0.5 * (2.0 - a) ** -1.5 * (0.5 / a - 1.0)
    return float(integrate_finite(f, 0.0, 0.5, spec).value)


def cmd_constants(args):
    modes = ("paper", "oracle")
    rows = constants_table(modes)
    h = _args_hash(args, ["mode"])
    width = max(len(r[0]) for r in rows)
    print(f"# dhasymp {__version__} constants (config_hash={h})")
    for name, value, src in rows:
        print(f"{name:<{width}}  {value:.10e}  {src}")
    a = dict((r[0], r[1]) for r in rows if r[2] == "quadrature")
    arith = profiles.LOG_INTEGRAL
    ok = (abs(a["dimensionless_integral"] - arith) <= 1e-8
          and abs(a["dimensionless_integral_collapsed"] - a["dimensionless_integral"]) <= 1e-8
          and abs(a["kappa_oracle"] / profiles.KAPPA - 1.0) <= 1e-6)
    if args.out:
        d = _out_dir(args)
        write_csv(d / f"constants_{h}.csv", ["name", "value", "source"], rows, h)
        write_json(d / f"constants_{h}.json", {
            "version": __version__, "config_hash": h,
            "rows": [{"name": n, "value": v, "source": s} for n, v, s in rows], "consistent": ok})
    if not ok:
        print("constant cross-check FAILED", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------- verify

def cmd_verify(args):
    h = _args_hash(args, ["profile", "seed"])
    checks = run_suite(args.profile, seed=args.seed)
    failed = [c["name"] for c in checks if not c["passed"]]
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']:<32} achieved={c['achieved']:.6e} target={c['target']:.6e} "
              f"tol={c['tolerance']:.1e} ({c['kind']})")
    d = _out_dir(args)
    write_json(d / f"verify_{h}.json", {
        "version": __version__, "config_hash": h, "profile": args.profile,
        "checks": checks, "failed": failed, "passed": not failed})
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def _load(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config PATH is required")
    p = Path(args.config)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        return load_config(p)
    except Exception as exc:  # configparser raises several unrelated types
        raise UsageError(f"cannot parse {p}: {exc}") from None


def cmd_simulate(args):
    cfg = _load(args)
    h = cfg.hash
    try:
        solver_cfg = cfg.solver_config()
        init = cfg.initial_params()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value in {args.config}: {exc}") from None
    state = init_density(solver_cfg.grid, **init)
    end = valid_window_end(solver_cfg.grid, state.clock_offset)
    if solver_cfg.t_end > end:
        log.warning("t_end %.3g is past the valid window end %.3g", solver_cfg.t_end, end)
    d = _out_dir(args)
    (d / "config.ini").write_text(cfg.to_text())
    try:
        result = run(solver_cfg, state, provenance=h)
        code = EXIT_OK
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        if exc.partial is None:
            return EXIT_BLOWUP
        result, code = exc.partial, EXIT_BLOWUP
    files = []
    for i, s in enumerate(result.snapshots):
        files.append(write_snapshot(d, i, s).with_suffix(".json").name)
    manifest = dict(result.manifest)
    manifest.update({"version": __version__, "config_hash": h, "snapshots": files,
                     "initial": {k: list(v) if isinstance(v, tuple) else v for k, v in init.items()},
                     "valid_window_end": end, "complete": code == EXIT_OK})
    write_json(d / "manifest.json", manifest)
    mt = manifest["mass_trace"]
    print(f"{len(files)} snapshots in {d}; steps={manifest['steps']} dt={manifest['dt']:.6g} "
          f"mass drift={abs(mt[-1] - mt[0]) / abs(mt[0]):.3e} config_hash={h}")
    return code


# ---------------------------------------------------------------- compare

_EXPANSIONS = {
    "u0": lambda mode: ExpansionSpec(prefactor_mode=mode),
    "first": lambda mode: ExpansionSpec.first_order(prefactor_mode=mode),
    "full": lambda mode: ExpansionSpec.full(prefactor_mode=mode),
}


def cmd_compare(args):
    d = Path(args.snapshots)
    mpath = d / "manifest.json"
    if not mpath.is_file():
        raise UsageError(f"no manifest.json in {d}")
    manifest = json.loads(mpath.read_text())
    q_list = _parse_q_list(args.q)
    window = _parse_window(args.window)
    states = [read_snapshot(d / f) for f in manifest["snapshots"]]
    if not states:
        raise UsageError(f"manifest in {d} lists no snapshots")
    m = moments_of_grid(states[0])
    if window is not None:
        states = [s for s in states if window[0] <= s.time <= window[1]]
    names = [n.strip() for n in args.expansions.split(",") if n.strip()]
    for n in names:
        if n not in _EXPANSIONS:
            raise UsageError(f"unknown expansion {n!r}; choose from {sorted(_EXPANSIONS)}")
    h = fnv1a64(f"{manifest['config_hash']}|{','.join(names)}|{[q.label for q in q_list]}|{window}|{args.mode}")
    reports = {}
    for n in names:
        try:
            reports[n] = residual_report(states, m, _EXPANSIONS[n](args.mode), q_list)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = _out_dir(args) if args.out else d
    header = ["expansion", "t", "clock", "q", "residual"]
    rows = []
    summary = {"version": __version__, "config_hash": h, "run_config_hash": manifest["config_hash"],
               "moments": {"m0": m.m0, "m1": list(m.m1)}, "mode": args.mode, "expansions": {}}
    for n, rep in reports.items():
        for row in rep.rows():
            rows.append([n, row["t"], row["clock"], row["q"], row["residual"]])
        fits = {}
        for qi in q_list:
            lab = qi.label
            entry = rep.fits[lab]
            fits[lab] = {k: (None if v is None else {"slope": v.slope, "r_squared": v.r_squared,
                                                       "window": list(v.window)}) for k, v in entry.items()}
            fits[lab]["target_first_claim"] = -gamma(qi.q) - 0.5
            fits[lab]["target_second_claim"] = -gamma(qi.q) - 1.0
        summary["expansions"][n] = {"label": rep.expansion.label(), "times": rep.times, "clocks": rep.clocks,
                                    "residuals": rep.residual_norms, "fits": fits}
    write_csv(out / f"residuals_{h}.csv", header, rows, h)
    ok = True
    checks = []
    if "u0" in reports and len(reports) > 1:
        base = reports["u0"].residual_norms
        for n, rep in reports.items():
            if n == "u0":
                continue
            for lab in rep.residual_norms:
                better = all(a < b for a, b in zip(rep.residual_norms[lab], base[lab]))
                checks.append({"name": f"{n}_below_u0_q{lab}", "passed": better})
                ok &= better
    summary["checks"] = checks
    write_json(out / f"residuals_{h}.json", summary)
    # Wide layout for plotting: one column per (expansion, q).
    wide_cols = [(n, lab) for n, rep in reports.items() for lab in rep.residual_norms]
    first = next(iter(reports.values()))
    wide = [[t, c] + [reports[n].residual_norms[lab][k] for n, lab in wide_cols]
            for k, (t, c) in enumerate(zip(first.times, first.clocks))]
    write_csv(out / f"residuals_{h}_wide.csv", ["t", "clock"] + [f"{n}_q{lab}" for n, lab in wide_cols], wide, h)
    _gnuplot(out / f"residuals_{h}.gp", f"residuals_{h}_wide.csv", "residual vs clock", 2,
             list(range(3, 3 + len(wide_cols))), True)
    print(f"# residual report config_hash={h}; moments m0={m.m0:.6g} m1=({', '.join(f'{v:.4g}' for v in m.m1)})")
    for n, info in summary["expansions"].items():
        for lab, f in info["fits"].items():
            slope = f["plain"]["slope"] if f["plain"] else float("nan")
            print(f"{n:<6} q={lab:<4} slope={slope:+.4f}  targets {f['target_first_claim']:+.2f} (first claim) "
                  f"{f['target_second_claim']:+.2f} (second claim)")
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------- profile table

def cmd_profile_table(args):
    ts = _floats(args.t, "--t")
    if any(t <= 0 for t in ts):
        raise UsageError("profile times must be positive")
    if args.x:
        pts = np.array(_floats(args.x, "--x"))
        if pts.size % 3:
            raise UsageError("--x needs a multiple of three numbers")
        pts = pts.reshape(-1, 3)
    else:
        pts = np.array([[r, 0.0, 0.0] for r in _floats(args.r, "--r")])
    m1 = _floats(args.m1, "--m1")
    if len(m1) != 3:
        raise UsageError("--m1 needs three numbers")
    m = Moments(args.m0, tuple(m1))
    h = _args_hash(args, ["t", "x", "r", "m0", "m1", "log_mode"])
    header = ["t", "x", "y", "z", "r", "U0", "U1odd", "U1rad_oracle", "U1rad_paper", "K2log", "J",
              "J_minus_U1rad", "flags"]
    rows = []
    bad = 0
    for t in ts:
        for p in pts:
            cells = {"U0": profiles.eval_U0(m, t, p), "U1odd": profiles.eval_U1odd(m, t, p),
                     "K2log": profiles.eval_K2_log_term(m, t, p, args.log_mode)}
            flags = []
            for name, fn in (("U1rad_oracle", lambda: profiles.eval_U1rad(m, t, p, mode="oracle", method="collapsed")),
                             ("U1rad_paper", lambda: profiles.eval_U1rad(m, t, p, mode="paper", method="collapsed")),
                             ("J", lambda: m.m0 ** 2 * profiles.eval_J(t, p))):
                try:
                    cells[name] = fn()
                except QuadratureError as exc:
                    cells[name] = float("nan")
                    flags.append(f"{name}:{exc.error_estimate:.1e}")
                    bad += 1
            diff = float(cells["J"]) - float(cells["U1rad_oracle"])
            rows.append([t, *map(float, p), float(np.linalg.norm(p))]
                        + [float(cells[k]) for k in ("U0", "U1odd", "U1rad_oracle", "U1rad_paper", "K2log", "J")]
                        + [diff, ";".join(flags)])
    d = _out_dir(args)
    write_csv(d / f"profiles_{h}.csv", header, rows, h)
    _gnuplot(d / f"profiles_{h}.gp", f"profiles_{h}.csv", "profile terms", 5, [6, 8, 11], False)
    print(f"# profile table config_hash={h}")
    print(",".join(header[:5] + header[5:12]))
    for r in rows:
        print(",".join(fmt_float(v) for v in r[:12]))
    if bad:
        print(f"{bad} cells failed to reach tolerance (marked nan)", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="dhasymp", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"dhasymp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="print the constant table")
    c.add_argument("--mode", choices=("paper", "oracle"), default="oracle",
                   help="kept for symmetry; both modes are always reported")
    c.add_argument("--out")

    v = sub.add_parser("verify", help="run self-check suites")
    v.add_argument("--profile", choices=("fast", "full"), default="fast")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")

    s = sub.add_parser("simulate", help="run the solver from a config file")
    s.add_argument("--config")
    s.add_argument("--out")

    m = sub.add_parser("compare", help="residuals of snapshots against the expansion")
    m.add_argument("snapshots", help="directory written by simulate")
    m.add_argument("--q", help="comma list of exponents, 'inf' allowed; default 1,2,inf")
    m.add_argument("--window", help="solver-time window T0:T1")
    m.add_argument("--mode", choices=("paper", "oracle"), default="oracle")
    m.add_argument("--expansions", default="u0,first,full", help="subset of u0,first,full")
    m.add_argument("--out")

    t = sub.add_parser("profile-table", help="tabulate profile terms")
    t.add_argument("--t", default="1, 4, 16")
    t.add_argument("--r", default="0, 1, 2, 4")
    t.add_argument("--x", help="flat list of x y z triples; overrides --r")
    t.add_argument("--m0", type=float, default=1.0)
    t.add_argument("--m1", default="0, 0, 0")
    t.add_argument("--log-mode", choices=("log_t", "log1p_t"), default="log_t")
    t.add_argument("--out")
    return p


_COMMANDS = {
    "constants": cmd_constants,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "profile-table": cmd_profile_table,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dhasymp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"dhasymp {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"dhasymp {args.command}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
