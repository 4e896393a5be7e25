"""Command-line front end: ``hippm <subcommand> ...``.

Exit codes: 0 success, 2 criterion or bound failure (including an
aborted inner solve), 3 instance parse error, 4 trace/instance mismatch.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .alm import ALMConfig, CertificateUnavailable, InnerSolverError, run_alm, thm42_bounds
from .instances import InstanceFormatError, read_instance
from .operators import ResolventError
from .rates import (
    ConvergedBeforeWindow,
    EnvelopeParams,
    bound_report,
    predicted_slope,
    exact_envelope,
    fit_rate,
    theta_envelope,
)
from .solver import (
    CriterionBUnattainable,
    ProxParamSchedule,
    SolveConfig,
    ToleranceSchedule,
    run_hippm,
)
from .tracecsv import alm_rows, inclusion_rows, read_trace, write_trace

EXIT_OK, EXIT_CRITERION, EXIT_PARSE, EXIT_MISMATCH = 0, 2, 3, 4
BAND_WIDTH = 0.05
RATE_SLACK = 0.1


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(path, kind):
    inst = read_instance(path)
    if inst.kind != kind:
        raise InstanceFormatError(f"{path}: expected a {kind} instance, got {inst.kind}")
    return inst


# -- solve-inclusion -------------------------------------------------------

def inclusion_config(inst, method="halpern", criterion="A", delta=1.0, schedule="constant:1",
                     max_iter=1000, exact=False, error_mode="natural", seed=0, stride=1):
    tol = ToleranceSchedule.exact(max_iter) if exact else ToleranceSchedule(criterion, delta)
    return SolveConfig(
        anchor=inst.anchor, max_iter=max_iter, method=method,
        prox_schedule=ProxParamSchedule.parse(schedule), tolerance=tol,
        error_mode=error_mode, seed=seed, residual_stride=stride, zstar=inst.zstar)


def inclusion_envelope(trace):
    """Envelope column: NaN where no envelope applies (row 0, unknown zero, ...)."""
    env = np.full(len(trace), np.nan)
    rep = bound_report(trace)
    if rep is not None:
        env[1:] = rep.envelope_value
    return env


def solve_inclusion_one(path, out, method, criterion, delta, schedule, max_iter, exact,
                        error_mode, seed, stride):
    """Solve one instance file; returns ``(exit_code, message)``."""
    try:
        inst = _load(path, "inclusion")
        op = inst.operator()
        cfg = inclusion_config(inst, method, criterion, delta, schedule, max_iter, exact,
                               error_mode, seed, stride)
    except (InstanceFormatError, ValueError) as exc:
        return EXIT_PARSE, f"{path}: {exc}"
    try:
        trace = run_hippm(op, cfg)
    except (CriterionBUnattainable, ResolventError, ValueError) as exc:
        return EXIT_CRITERION, f"{path}: {exc}"
    meta = {
        "kind": "inclusion", "instance": inst.name, "seed": seed, "method": method,
        "criterion": "exact" if exact else criterion, "delta": repr(float(delta)),
        "schedule": str(cfg.prox_schedule), "error_mode": error_mode, "stride": stride,
    }
    write_trace(out, meta, inclusion_rows(trace, inclusion_envelope(trace)))
    bad = np.nonzero(~trace.criterion_ok)[0]
    if bad.size:
        return EXIT_CRITERION, f"{path}: criterion {criterion} violated first at k={bad[0]}"
    last = trace.residual[~np.isnan(trace.residual)]
    return EXIT_OK, f"{inst.name}: {len(trace)} iterations, last sampled residual {last[-1]:.3e}"


def cmd_solve_inclusion(args):
    paths = args.instance
    if len(paths) > 1:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        outs = [outdir / (Path(p).stem + ".csv") for p in paths]
    else:
        outs = [Path(args.out)]
    common = (args.method, args.criterion, args.delta, args.c_schedule, args.max_iter,
              args.exact, args.error_mode, args.seed, args.stride)
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(solve_inclusion_one, paths, outs,
                                    *[[c] * len(paths) for c in common]))
    else:
        results = [solve_inclusion_one(p, o, *common) for p, o in zip(paths, outs)]
    code = EXIT_OK
    for rc, msg in results:
        (print if rc == EXIT_OK else _err)(msg)
        code = max(code, rc)
    return code


# -- solve-alm -------------------------------------------------------------

def cmd_solve_alm(args):
    try:
        inst = _load(args.instance, "qp")
        prog = inst.program()
        sched = ProxParamSchedule(args.schedule, args.c0)
        cfg = ALMConfig(y0=inst.anchor, prox_schedule=sched, delta=args.delta,
                        max_outer=args.max_outer)
    except (InstanceFormatError, ValueError) as exc:
        _err(exc)
        return EXIT_PARSE
    code = EXIT_OK
    try:
        trace = run_alm(prog, cfg)
    except CertificateUnavailable as exc:
        _err(exc)
        return EXIT_CRITERION
    except InnerSolverError as exc:
        _err(exc)
        trace, code = exc.trace, EXIT_CRITERION
        if trace is None or len(trace) == 0:
            return code
    meta = {
        "kind": "alm", "instance": inst.name, "seed": 0, "method": "alm", "criterion": "C",
        "delta": repr(float(args.delta)), "schedule": str(sched),
        "delta0": repr(trace.delta0),
    }
    write_trace(args.out, meta, alm_rows(trace))
    if code == EXIT_OK:
        print(f"{inst.name}: {len(trace)} outer steps, |y - y*| "
              + (f"{np.linalg.norm(trace.y[-1] - prog.y_star):.3e}" if prog.y_star is not None else "n/a")
              + f", ergodic feasibility {trace.feas_max[-1]:.3e}")
    return code


# -- verify-bounds ---------------------------------------------------------

class TraceMismatch(ValueError):
    pass


def _inclusion_checks(table, inst):
    meta = table.meta
    zstar = inst.zstar
    if zstar is None:
        zstar = inst.operator().zero_point()
    if zstar is None:
        raise TraceMismatch("instance has no known zero; envelopes need one")
    dist0 = float(np.linalg.norm(inst.anchor - zstar))
    d0 = table["dist_to_star"][0]
    if not np.isnan(d0) and abs(d0 - dist0) > 1e-9 * (1.0 + dist0):
        raise TraceMismatch(f"trace starts at distance {d0:.6g} from the zero, instance gives {dist0:.6g}")
    k = table["k"]
    res = table["residual"]
    checks = []
    crit = meta.get("criterion")
    constant = ProxParamSchedule.parse(meta.get("schedule", "constant:1")).is_constant
    halpern = meta.get("method") == "halpern"
    ks = k[k >= 1]
    if halpern and constant and crit in ("A", "exact"):
        if crit == "exact":
            env, name = exact_envelope(dist0, ks), "exact_envelope"
        else:
            params = EnvelopeParams.from_run(float(meta["delta"]), dist0)
            env, name = theta_envelope(params, ks), "theta_envelope"
        checks.append((name, ks, res[k >= 1], env * (1.0 + 1e-9)))
    if crit in ("A", "exact"):
        eps = np.nan_to_num(table["eps_k"])
        lim = dist0 + np.concatenate([[0.0], np.cumsum(eps)[:-1]])
        checks.append(("distance_envelope", k, table["dist_to_star"], lim * (1.0 + 1e-9) + 1e-12))
    return checks


def _alm_checks(table, inst):
    meta = table.meta
    prog = inst.program()
    if prog.y_star is not None:
        d0 = table["dist_to_star"][0]
        want = float(np.linalg.norm(inst.anchor - prog.y_star))
        if not np.isnan(d0) and abs(d0 - want) > 1e-9 * (1.0 + want):
            raise TraceMismatch("initial multiplier distance does not match the instance")
    sched = ProxParamSchedule.parse(meta["schedule"])
    delta, D0 = float(meta["delta"]), float(meta["delta0"])
    rows = table["k"][table["k"] >= 1]
    fb = np.empty(rows.shape)
    ob = np.empty(rows.shape)
    for i, r in enumerate(rows):
        fb[i], ob[i] = thm42_bounds(D0, delta, sched.c0, sched.mode, r + 1)
    sel = table["k"] >= 1
    checks = [("ergodic_feasibility", rows, table["feas_max"][sel], fb)]
    if prog.optimum is not None:
        checks.append(("ergodic_objective", rows, table["obj_gap"][sel], ob))
    return checks


def verify_bounds(trace_path, instance_path):
    """Run every applicable bound; returns ``(report_lines, first_failure)``.

    ``first_failure`` is None when everything passed.
    """
    table = read_trace(trace_path)
    kind = table.meta.get("kind", "inclusion")
    inst = read_instance(instance_path)
    if inst.kind != ("qp" if kind == "alm" else "inclusion"):
        raise TraceMismatch(f"trace of kind {kind} does not fit a {inst.kind} instance")
    if table.meta.get("instance") not in (None, inst.name):
        raise TraceMismatch(f"trace was produced on {table.meta['instance']!r}, not {inst.name!r}")
    checks = _alm_checks(table, inst) if kind == "alm" else _inclusion_checks(table, inst)
    lines = ["k,bound,observed,limit,status"]
    first = None
    for name, ks, obs, lim in checks:
        for kk, o, l in zip(ks, obs, lim):
            if np.isnan(o):
                continue
            ok = o <= l
            lines.append(f"{kk},{name},{o:.16e},{l:.16e},{'pass' if ok else 'FAIL'}")
            if not ok and (first is None or kk < first[0]):
                first = (int(kk), name)
    return lines, first


def cmd_verify_bounds(args):
    try:
        lines, first = verify_bounds(args.trace, args.instance)
    except InstanceFormatError as exc:
        _err(exc)
        return EXIT_PARSE
    except (TraceMismatch, ValueError, KeyError, OSError) as exc:
        _err(f"trace/instance mismatch: {exc}")
        return EXIT_MISMATCH
    if len(lines) == 1:
        summary = "NO-APPLICABLE-BOUNDS"
    elif first is None:
        summary = "ALL-PASS"
    else:
        summary = f"FAIL first at k={first[0]} ({first[1]})"
    lines.append(f"# {summary}")
    text = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    print(summary)
    return EXIT_OK if first is None else EXIT_CRITERION


# -- rates -----------------------------------------------------------------

def band_label(slope):
    """Name the rate band a fitted slope falls into."""
    if abs(slope + 1.0) <= BAND_WIDTH:
        return "delta>=2 band (slope -1)"
    if -1.0 < slope < 0.0:
        return f"delta~{-2.0 * slope:.2f} band (slope -delta/2)"
    return "outside all bands"


def cmd_rates(args):
    try:
        table = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        _err(exc)
        return EXIT_PARSE
    try:
        slope = fit_rate(table["residual"], args.k_min, args.k_max)
    except ConvergedBeforeWindow:
        print("converged before window: residuals reach zero inside the fitting window")
        return EXIT_OK
    except ValueError as exc:
        _err(exc)
        return EXIT_CRITERION
    print(f"slope {slope:.4f}  matches {band_label(slope)}")
    crit = table.meta.get("criterion")
    if crit in ("A", "exact"):
        pred = -1.0 if crit == "exact" else predicted_slope(float(table.meta["delta"]))
        fast = slope <= pred + RATE_SLACK
        print(f"predicted {pred:.4f}  verdict: "
              + ("at least as fast as predicted" if fast else "slower than predicted"))
        return EXIT_OK if fast else EXIT_CRITERION
    return EXIT_OK


# -- compare ---------------------------------------------------------------

def compare_runs(inst, max_iter=10000, schedule="constant:1", k_from=500, stride=1):
    """Paired Halpern/classical runs with exact resolvents.

    Returns ``(halpern_trace, classical_trace, wins)`` where ``wins`` is a
    boolean array over ``k >= k_from`` (sampled rows only).
    """
    op = inst.operator()
    traces = [run_hippm(op, inclusion_config(inst, m, schedule=schedule, max_iter=max_iter,
                                             exact=op.exact, stride=stride))
              for m in ("halpern", "classical")]
    # a run that hit an exactly zero residual stopped early; it stays at zero
    h, c = (np.pad(t.residual, (0, max_iter - len(t)))[k_from:] for t in traces)
    keep = ~np.isnan(h) & ~np.isnan(c)
    return traces[0], traces[1], h[keep] < c[keep]


def cmd_compare(args):
    try:
        inst = _load(args.instance, "inclusion")
        ht, ct, wins = compare_runs(inst, args.max_iter, args.c_schedule, args.k_from, args.stride)
    except (InstanceFormatError, ValueError) as exc:
        _err(exc)
        return EXIT_PARSE
    if args.out_prefix:
        for tr, m in ((ht, "halpern"), (ct, "classical")):
            meta = {"kind": "inclusion", "instance": inst.name, "seed": 0, "method": m,
                    "criterion": "exact" if inst.operator().exact else "A", "delta": "1.0",
                    "schedule": args.c_schedule, "error_mode": "natural", "stride": args.stride}
            write_trace(f"{args.out_prefix}_{m}.csv", meta, inclusion_rows(tr, inclusion_envelope(tr)))
    for tr, m in ((ht, "halpern"), (ct, "classical")):
        r = tr.residual[~np.isnan(tr.residual)]
        print(f"{m}: {len(tr)} iterations, last sampled residual {r[-1]:.3e}")
    if wins.size == 0:
        print(f"no sampled iterations at k >= {args.k_from}")
        return EXIT_CRITERION
    if wins.all():
        print(f"halpern below classical for every k >= {args.k_from}")
        return EXIT_OK
    print(f"classical at or below halpern at {int((~wins).sum())} sampled k >= {args.k_from}")
    return EXIT_CRITERION


# -- entry point -----------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hippm", description="Halpern inexact proximal point toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-inclusion", help="solve 0 in T(z) and write a trace CSV")
    s.add_argument("instance", nargs="+", help="instance file(s); several make --out a directory")
    s.add_argument("--method", choices=["halpern", "classical"], default="halpern")
    s.add_argument("--criterion", choices=["A", "B"], default="A")
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--c-schedule", default="constant:1",
                   help="constant:C, linear:C0 or geometric:C0,GROWTH[,CAP]")
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--out", required=True)
    s.add_argument("--exact", action="store_true", help="use exact resolvents")
    s.add_argument("--error-mode", choices=["natural", "adversarial"], default="natural")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stride", type=int, default=1, help="residual sampling stride")
    s.add_argument("--jobs", type=int, default=1, help="parallel workers for several instances")
    s.set_defaults(func=cmd_solve_inclusion)

    s = sub.add_parser("solve-alm", help="run the augmented Lagrangian method on a QP")
    s.add_argument("instance")
    s.add_argument("--c0", type=float, default=1.0)
    s.add_argument("--schedule", choices=["constant", "linear"], default="constant")
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--max-outer", type=int, default=1000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve_alm)

    s = sub.add_parser("verify-bounds", help="check a trace against its convergence bounds")
    s.add_argument("trace")
    s.add_argument("instance")
    s.add_argument("--report", help="per-k report file")
    s.set_defaults(func=cmd_verify_bounds)

    s = sub.add_parser("rates", help="fit the log-log residual slope of a trace")
    s.add_argument("trace")
    s.add_argument("--k-min", type=int)
    s.add_argument("--k-max", type=int)
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("compare", help="paired halpern/classical run")
    s.add_argument("instance")
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--c-schedule", default="constant:1")
    s.add_argument("--k-from", type=int, default=500)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
