"""Command-line entry point.

Exit codes: 0 the analysis ran and passed (embeddable, local, flat, ...);
1 it ran and found something (non-embeddable, nonlocal, order effect, ...);
2 usage or input error; 3 the result is marginal (within tolerance of a
decision boundary).  Reports go to standard output unless ``--out`` is given,
in which case they are written atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import bookkeeping, embedding, holonomy, intervention, nonlocality, projection, tradeoff
from ._io import atomic_write_text, to_jsonable
from .scenario import (
    DEFAULT_TOL, SCENARIO_SCHEMA, ScenarioError, check_no_disturbance, load_scenario, read_json,
    scenario_from_dict, validate_behavior,
)

EXIT_PASS, EXIT_FINDING, EXIT_USAGE, EXIT_MARGINAL = 0, 1, 2, 3
CSV_SUBCOMMANDS = ("holonomy", "tradeoff", "bell")


class UsageError(Exception):
    pass


class Outcome:
    """A report document, its exit code and (optionally) a CSV projection."""

    def __init__(self, doc: dict, code: int, rows: list | None = None, header: tuple | None = None):
        self.doc, self.code, self.rows, self.header = doc, code, rows, header


def _status_code(status: str) -> int:
    if status in (embedding.EMBEDDABLE, nonlocality.LOCAL):
        return EXIT_PASS
    if status == embedding.MARGINAL:
        return EXIT_MARGINAL
    return EXIT_FINDING


# --------------------------------------------------------------------------
# subcommands

def cmd_validate(args) -> Outcome:
    doc = read_json(args.file, SCENARIO_SCHEMA)
    _, b = scenario_from_dict(doc)
    report = validate_behavior(b, args.tol)
    out = report.to_dict()
    if report.ok:
        dist = check_no_disturbance(b, args.tol)
        out["residuals"]["disturbance"] = dist.residual
        out["details"] = {"violations": [], "no_disturbance": dist.to_dict()["details"]}
    else:
        out["details"] = {"violations": out["details"]}
    return Outcome(out, EXIT_PASS if report.ok else EXIT_FINDING)


def cmd_embed(args) -> Outcome:
    _, b = load_scenario(args.file, args.tol)
    cert = embedding.check_boolean_embedding(b, args.tol)
    return Outcome(cert.to_dict(), _status_code(cert.status))


def _event(spec: str) -> tuple[str, int]:
    try:
        oid, val = spec.split("=")
        return oid, int(val)
    except ValueError:
        raise UsageError(f"event {spec!r} must look like OBSERVABLE=OUTCOME") from None


def _branch_data(args) -> projection.BranchData:
    if args.behavior is None:
        if None in (args.pA, args.pB_given_A, args.pB_given_notA):
            raise UsageError("give --pA, --pB-given-A and --pB-given-notA, or --behavior with --A and --B")
        return projection.BranchData.from_partition(args.pA, args.pB_given_A, args.pB_given_notA)
    if args.A is None or args.B is None:
        raise UsageError("--behavior needs --A and --B events")
    s, b = load_scenario(args.behavior, args.tol)
    (oa, va), (ob, vb) = _event(args.A), _event(args.B)
    ctxs = [c for c in s.contexts if oa in c.observables and ob in c.observables]
    if args.context:
        ctxs = [c for c in ctxs if c.id == args.context]
    if not ctxs:
        raise UsageError(f"no context measures both {oa} and {ob}")
    ctx = ctxs[0]
    t = b.tensor(ctx.id)
    ia, ib = ctx.observables.index(oa), ctx.observables.index(ob)
    drop = tuple(i for i in range(t.ndim) if i not in (ia, ib))
    j = t.sum(axis=drop)
    if ia > ib:
        j = j.T
    pA = float(j[va].sum())
    pB_A = float(j[va, vb] / pA) if pA > 0 else 0.0
    rest = j.sum(axis=0) - j[va]
    pB_notA = float(rest[vb] / (1 - pA)) if pA < 1 else 0.0
    return projection.BranchData.from_partition(pA, pB_A, pB_notA)


def _branch_dict(d):
    return {"pA": d.pA, "pB_given_A": d.pB_given_A, "pBarA": d.pBarA, "pB_given_BarA": d.pB_given_BarA}


def cmd_interfere(args) -> Outcome:
    d = _branch_data(args)
    theta = projection.GluingPhase(args.theta)
    proj = projection.glued_projection(d, theta)
    rA, rBarA = projection.realization_weights(d)
    doc = {
        "kind": "interfere",
        "pass": proj.in_range,
        "probability": proj.probability,
        "ltp": projection.ltp_predict(d),
        "interference": projection.interference_term(d, theta),
        "residuals": {"out_of_range": 0.0 if proj.in_range else min(abs(proj.probability), abs(proj.probability - 1))},
        "details": {"theta": theta.theta, "r_A": rA, "r_notA": rBarA, "branch": _branch_dict(d)},
    }
    return Outcome(doc, EXIT_PASS if proj.in_range else EXIT_FINDING)


def cmd_phase(args) -> Outcome:
    d = _branch_data(args)
    if args.observed is None:
        raise UsageError("--observed P(B) is required")
    try:
        fit = projection.extract_phase(args.observed, d, args.tol)
    except projection.DegenerateBranchError as e:
        raise UsageError(str(e)) from None
    doc = {
        "kind": "phase",
        "pass": fit.feasible,
        "theta": fit.theta,
        "interference": args.observed - projection.ltp_predict(d),
        "residuals": {"excess": fit.excess},
        "details": {"cos_theta": fit.cos_theta, "ltp": projection.ltp_predict(d), "branch": _branch_dict(d)},
    }
    return Outcome(doc, EXIT_PASS if fit.feasible else EXIT_FINDING)


def cmd_order_effect(args) -> Outcome:
    model = intervention.model_from_dict(read_json(args.file))
    a, b = args.a, args.b
    if a is None or b is None:
        ids = list(model.ops)
        if len(ids) < 2:
            raise UsageError("model needs two interventions, or pass -a/-b")
        a, b = ids[0], ids[1]
    rep = intervention.order_effect_report(model, a, b)
    doc = rep.to_dict()
    doc["pass"] = rep.tv <= args.tol
    return Outcome(doc, EXIT_PASS if rep.tv <= args.tol else EXIT_FINDING)


def cmd_holonomy(args) -> Outcome:
    atlas = holonomy.atlas_from_dict(read_json(args.file, holonomy.ATLAS_SCHEMA))
    if args.loop:
        res = holonomy.loop_holonomy(atlas, args.loop.split(","), args.tol)
        doc = {"kind": "holonomy", "pass": res.flat, "residuals": {"max_abs_phase": res.max_abs_phase},
               "details": {"witness": None if res.flat else res.to_dict(), "loops": [res.to_dict()]}}
        rows = [("->".join(res.loop), a, p) for a, p in res.per_branch_phase.items()]
        return Outcome(doc, EXIT_PASS if res.flat else EXIT_FINDING, rows, ("loop", "branch", "phase"))
    rep = holonomy.flatness_check(atlas, args.max_loop_len, args.tol)
    return Outcome(rep.to_dict(), EXIT_PASS if rep.flat else EXIT_FINDING, list(rep.rows()),
                   ("loop", "branch", "phase"))


def cmd_bookkeeping(args) -> Outcome:
    _, b = load_scenario(args.file, args.tol)
    prior = read_json(args.context_prior) if args.context_prior else None
    try:
        rep = bookkeeping.min_bookkeeping(b, args.max_lambda, args.max_memory, args.tol, prior)
    except bookkeeping.BookkeepingCapError as e:
        raise UsageError(str(e)) from None
    doc = rep.to_dict()
    return Outcome(doc, EXIT_PASS if doc["pass"] else EXIT_FINDING)


def _load_bipartite(path):
    return nonlocality.behavior_from_dict(read_json(path, nonlocality.BIPARTITE_SCHEMA))


def cmd_bell(args) -> Outcome:
    b = _load_bipartite(args.file)
    ns = nonlocality.check_no_signalling(b, args.tol)
    res = nonlocality.local_decomposition(b, args.tol)
    doc = res.to_dict()
    S = nonlocality.chsh_value(b) if b.settings == (2, 2) and b.outcomes == (2, 2) else None
    doc["chsh"] = S
    doc["residuals"]["no_signalling"] = ns.residual
    return Outcome(doc, _status_code(res.status), [(S, ns.residual, res.status)],
                   ("S", "ns_residual", "local_status"))


def cmd_nosignal(args) -> Outcome:
    ns = nonlocality.check_no_signalling(_load_bipartite(args.file), args.tol)
    return Outcome(ns.to_dict(), EXIT_PASS if ns.passed else EXIT_FINDING)


def cmd_tradeoff(args) -> Outcome:
    doc = read_json(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = tradeoff.config_from_dict(doc)
    seeds = [cfg.seed + i for i in range(args.seeds)]
    reports = tradeoff.run_seeds(cfg, seeds)
    allowance = 3 / math.sqrt(cfg.trials)
    ok = [tradeoff.trend_ok(r.column("I_abs"), allowance) for r in reports]
    out = {
        "kind": "tradeoff",
        "pass": all(ok),
        "residuals": {"seeds_monotone": sum(ok), "seeds": len(reports)},
        "details": {"trials": cfg.trials, "noise": cfg.noise, "runs": [r.to_dict()["details"] for r in reports]},
    }
    rows = [row for r in reports for row in r.rows()]
    return Outcome(out, EXIT_PASS if all(ok) else EXIT_FINDING, rows, tradeoff.CSV_COLUMNS)


# --------------------------------------------------------------------------
# parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--tol", type=float, default=d, help=f"numeric tolerance (default {DEFAULT_TOL})")
    p.add_argument("--seed", type=int, default=d, help="random seed (default 0)")
    p.add_argument("--out", default=d, help="write the report here instead of standard output")
    p.add_argument("--format", choices=("json", "csv"), default=d, help="report format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxglue", description="Contextuality, gluing-phase and bookkeeping analyses.")
    _global_flags(parser, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    add("validate", cmd_validate, "check a scenario/behavior file").add_argument("file")
    add("embed", cmd_embed, "global Boolean embedding test").add_argument("file")

    for name, fn, help in (("interfere", cmd_interfere, "glued projection for a gluing phase"),
                           ("phase", cmd_phase, "fit the gluing phase to an observed P(B)")):
        p = add(name, fn, help)
        p.add_argument("--pA", type=float)
        p.add_argument("--pB-given-A", dest="pB_given_A", type=float)
        p.add_argument("--pB-given-notA", dest="pB_given_notA", type=float)
        p.add_argument("--behavior", help="scenario file to read branch data from")
        p.add_argument("--A", help="event OBSERVABLE=OUTCOME")
        p.add_argument("--B", help="event OBSERVABLE=OUTCOME")
        p.add_argument("--context", help="context to read A and B from (default: first that has both)")
        if name == "interfere":
            p.add_argument("--theta", type=float, required=True)
        else:
            p.add_argument("--observed", type=float, help="observed P(B)")

    p = add("order-effect", cmd_order_effect, "order effect between two interventions")
    p.add_argument("file")
    p.add_argument("-a")
    p.add_argument("-b")

    p = add("holonomy", cmd_holonomy, "loop holonomy / flatness of an atlas")
    p.add_argument("file")
    p.add_argument("--max-loop-len", type=int, default=6)
    p.add_argument("--loop", help="comma-separated closed loop, e.g. w0,w1,w0")

    p = add("bookkeeping", cmd_bookkeeping, "minimal classical bookkeeping cost")
    p.add_argument("file")
    p.add_argument("--max-lambda", type=int, default=4)
    p.add_argument("--max-memory", type=int, default=4)
    p.add_argument("--context-prior")

    add("bell", cmd_bell, "local decomposition and CHSH").add_argument("file")
    add("nosignal", cmd_nosignal, "no-signalling check").add_argument("file")

    p = add("tradeoff", cmd_tradeoff, "memory/interference trade-off simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    return parser


def _render(out: Outcome, fmt: str, command: str) -> str:
    if fmt == "csv":
        if out.rows is None:
            raise UsageError(f"{command} reports have no CSV form (supported: {', '.join(CSV_SUBCOMMANDS)})")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(out.header)
        for row in out.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()
    return json.dumps(to_jsonable(out.doc), indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    args.tol = getattr(args, "tol", DEFAULT_TOL)
    seed = getattr(args, "seed", None)
    args.seed = seed
    out_path = getattr(args, "out", None)
    fmt = getattr(args, "format", None) or ("csv" if out_path and out_path.endswith(".csv") else "json")
    try:
        out = args.func(args)
        text = _render(out, fmt, args.command)
    except (UsageError, ScenarioError, ValueError, KeyError, OSError) as e:
        print(f"ctxglue {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)
    return out.code


if __name__ == "__main__":
    sys.exit(main())
