"""Command-line surface.

Subcommands: prop, diff, mpair, refine, gauss, icp.  Exit codes: 0 on
success, 1 for usage errors, 2 for input-data errors, 3 when a refinement
hit its iteration cap without converging (output is still produced).
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Tuple

import numpy as np

from . import gauss, matched, proportion, refine, twoprop
from .engine import GridPolicy
from .errors import ExactCIError, InputError
from .limits import LimitsTable, read_limits, write_limits
from .report import RENDERERS, build_report

USAGE_EXIT = 1
INPUT_EXIT = 2
NONCONVERGED_EXIT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05, help="1 - confidence level")
    p.add_argument(
        "--grid",
        default=None,
        metavar="T,N[,polish]",
        help="theta points, nuisance points and optional polish flag (0/1)",
    )
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", default=None, help="write the resulting limits file here")


def _policy_from(args) -> GridPolicy:
    if args.grid is None:
        return GridPolicy()
    parts = args.grid.split(",")
    if len(parts) not in (2, 3):
        raise _UsageError("--grid expects T,N or T,N,polish")
    try:
        theta = int(parts[0])
        nuis = int(parts[1])
        polish = bool(int(parts[2])) if len(parts) == 3 else True
    except ValueError as exc:
        raise _UsageError(f"bad --grid value: {exc}") from exc
    return GridPolicy(theta_points=theta, nuisance_points=nuis, polish=polish)


def _parse_at(text: str, want: int) -> Tuple[int, ...]:
    parts = text.split(",")
    if len(parts) != want:
        raise _UsageError(f"--at expects {want} comma-separated integers")
    try:
        return tuple(int(v) for v in parts)
    except ValueError as exc:
        raise _UsageError(f"bad --at value: {exc}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="exactci", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prop", help="single-proportion intervals")
    p.add_argument("--n", type=int, required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=proportion.EXACT_METHODS + proportion.BASELINE_METHODS,
    )
    p.add_argument("--refine", choices=("none", "M", "Minf"), default="none")
    p.add_argument("--limits", default=None, help="custom point-estimator table file")
    p.add_argument("--at", default=None, help="report a single x")
    p.add_argument("--max-k", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("diff", help="difference of two proportions")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=twoprop.EXACT_METHODS + twoprop.BASELINE_METHODS,
    )
    p.add_argument("--refine", choices=("none", "M", "Minf"), default="none")
    p.add_argument("--at", default=None, help="report a single x,y")
    p.add_argument("--max-k", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("mpair", help="matched-pair difference from an ingested table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--limits", required=True, help="baseline limits file over (n10,t)")
    p.add_argument("--refine", choices=("M", "Minf"), default="Minf")
    p.add_argument("--at", default=None, help="report a single n10,t")
    p.add_argument("--null-value", type=float, default=0.0,
                   help="difference value for the reported p-value")
    p.add_argument("--max-k", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("refine", help="refine an arbitrary ingested limits table")
    p.add_argument("--limits", required=True)
    p.add_argument("--model", required=True,
                   help="prop:n | diff:n1,n2 | mpair:n")
    p.add_argument("--mode", choices=("two-sided", "lower", "upper"),
                   default="two-sided")
    p.add_argument("--max-k", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("gauss", help="closed-form normal-mean cases")
    p.add_argument("--case", required=True, choices=("zab", "box", "tmod"))
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--xbar", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("icp", help="coverage report for an ingested limits table")
    p.add_argument("--limits", required=True)
    p.add_argument("--model", required=True, help="prop:n | diff:n1,n2 | mpair:n")
    _add_common(p)

    return parser


def _model_from_tag(tag: str, alpha: float):
    kind, _, rest = tag.partition(":")
    try:
        if kind == "prop":
            n = int(rest)
            return proportion.binomial_model(n), ("prop", (n,))
        if kind == "diff":
            n1, n2 = (int(v) for v in rest.split(","))
            return twoprop.product_binomial_model(n1, n2), ("diff", (n1, n2))
        if kind == "mpair":
            n = int(rest)
            return matched.matched_pair_model(n), ("mpair", (n,))
    except ValueError as exc:
        raise _UsageError(f"bad --model value {tag!r}: {exc}") from exc
    raise _UsageError(f"bad --model value {tag!r}")


def _coverage_for(kind: str, params, table: LimitsTable, alpha: float):
    if kind == "prop":
        (n,) = params
        return proportion.icp_single_prop(table, n)
    if kind == "diff":
        n1, n2 = params
        return twoprop.icp_grid_d(table, twoprop.DiffDesign(n1, n2, alpha))
    (n,) = params
    return matched.icp_grid_m(table, matched.MPairDesign(n, alpha))


def _emit(report, args, table: Optional[LimitsTable]) -> None:
    sys.stdout.write(RENDERERS[args.format](report))
    if args.out and table is not None:
        write_limits(args.out, table)


def _cmd_prop(args) -> int:
    policy = _policy_from(args)
    design = proportion.PropDesign(args.n, args.alpha)
    if args.method in proportion.EXACT_METHODS:
        table = proportion.exact_limits(design, args.method, policy, args.threads)
    elif args.method == "custom_point":
        if not args.limits:
            raise InputError("custom_point needs --limits")
        ingested = read_limits(args.limits).reordered(np.arange(args.n + 1))
        table = proportion.baseline_limits(design, "custom_point", ingested.lower)
    else:
        table = proportion.baseline_limits(design, args.method)
    trace = None
    exit_code = 0
    if args.refine != "none":
        model = proportion.binomial_model(args.n)
        if args.refine == "M":
            table = refine.modify(model, table, args.alpha, policy, args.threads)
        else:
            trace = refine.refine_fixed_point(
                model, table, args.alpha, policy, args.max_k, args.threads
            )
            table = trace.final
            if not trace.converged:
                exit_code = NONCONVERGED_EXIT
    coverage = proportion.icp_single_prop(table, args.n)
    design_info = {"design": "prop", "n": args.n, "alpha": args.alpha,
                   "method": args.method, "refine": args.refine}
    if args.at is not None:
        (x,) = _parse_at(args.at, 1)
        lo, hi = table.interval(x)
        report = build_report(design_info, policy, coverage=coverage,
                              extras={"interval": [lo, hi], "at": [x],
                                      "til": table.til()})
    else:
        report = build_report(design_info, policy, table=table,
                              coverage=coverage, trace=trace)
    _emit(report, args, table)
    return exit_code


def _cmd_diff(args) -> int:
    policy = _policy_from(args)
    design = twoprop.DiffDesign(args.n1, args.n2, args.alpha)
    single = args.at is not None and args.refine == "none"
    if single and args.method in twoprop.EXACT_METHODS:
        x, y = _parse_at(args.at, 2)
        lo, hi = twoprop.invert_at(design, args.method, x, y, policy, args.threads)
        design_info = {"design": "diff", "n1": args.n1, "n2": args.n2,
                       "alpha": args.alpha, "method": args.method,
                       "refine": args.refine}
        report = build_report(design_info, policy,
                              extras={"interval": [lo, hi], "at": [x, y]})
        _emit(report, args, None)
        return 0
    if args.method in twoprop.EXACT_METHODS:
        table = twoprop.exact_limits(design, args.method, policy, args.threads)
    else:
        table = twoprop.baseline_limits(design, args.method)
    trace = None
    exit_code = 0
    if args.refine != "none":
        model = twoprop.product_binomial_model(args.n1, args.n2)
        if args.refine == "M":
            table = refine.modify(model, table, args.alpha, policy, args.threads)
        else:
            trace = refine.refine_fixed_point(
                model, table, args.alpha, policy, args.max_k, args.threads
            )
            table = trace.final
            if not trace.converged:
                exit_code = NONCONVERGED_EXIT
    coverage = twoprop.icp_grid_d(table, design)
    design_info = {"design": "diff", "n1": args.n1, "n2": args.n2,
                   "alpha": args.alpha, "method": args.method,
                   "refine": args.refine}
    if args.at is not None:
        x, y = _parse_at(args.at, 2)
        lo, hi = table.interval((x, y))
        report = build_report(design_info, policy, coverage=coverage,
                              extras={"interval": [lo, hi], "at": [x, y],
                                      "til": table.til()})
    else:
        report = build_report(design_info, policy, table=table,
                              coverage=coverage, trace=trace)
    _emit(report, args, table)
    return exit_code


def _cmd_mpair(args) -> int:
    policy = _policy_from(args)
    design = matched.MPairDesign(args.n, args.alpha)
    model = matched.matched_pair_model(args.n)
    baseline = read_limits(args.limits).reordered(model.points)
    exit_code = 0
    if args.refine == "M":
        table = refine.modify(model, baseline, args.alpha, policy, args.threads)
        trace = None
        pvalue_source = baseline
    else:
        trace = refine.refine_fixed_point(
            model, baseline, args.alpha, policy, args.max_k, args.threads
        )
        table = trace.final
        pvalue_source = trace.final
        if not trace.converged:
            exit_code = NONCONVERGED_EXIT
    coverage = matched.icp_grid_m(table, design)
    design_info = {"design": "mpair", "n": args.n, "alpha": args.alpha,
                   "refine": args.refine}
    extras = {}
    if args.at is not None:
        n10, t = _parse_at(args.at, 2)
        lo, hi = table.interval((n10, t))
        extras["interval"] = [lo, hi]
        extras["at"] = [n10, t]
        extras["p_value"] = matched.h_m(
            pvalue_source, n10, t, args.null_value, design, policy
        )
        extras["til"] = table.til()
        report = build_report(design_info, policy, coverage=coverage,
                              trace=trace, extras=extras)
    else:
        report = build_report(design_info, policy, table=table,
                              coverage=coverage, trace=trace)
    _emit(report, args, table)
    return exit_code


def _cmd_refine(args) -> int:
    policy = _policy_from(args)
    model, (kind, params) = _model_from_tag(args.model, args.alpha)
    ingested = read_limits(args.limits).reordered(model.points)
    exit_code = 0
    trace = None
    if args.mode == "two-sided":
        trace = refine.refine_fixed_point(
            model, ingested, args.alpha, policy, args.max_k, args.threads
        )
        table = trace.final
        if not trace.converged:
            exit_code = NONCONVERGED_EXIT
    elif args.mode == "lower":
        table = refine.modify_lower_one_sided(
            model, ingested, args.alpha, policy, args.threads
        )
    else:
        table = refine.modify_upper_one_sided(
            model, ingested, args.alpha, policy, args.threads
        )
    coverage = _coverage_for(kind, params, table, args.alpha)
    design_info = {"design": kind, "params": list(params), "alpha": args.alpha,
                   "mode": args.mode}
    report = build_report(design_info, policy, table=table,
                          coverage=coverage, trace=trace)
    _emit(report, args, table)
    return exit_code


def _cmd_gauss(args) -> int:
    policy = _policy_from(args)
    if args.case == "tmod":
        verdict = gauss.one_sided_t_modify(args.c, args.n, args.alpha)
        design_info = {"design": "gauss-tmod", "c": args.c, "n": args.n,
                       "alpha": args.alpha}
        report = build_report(design_info, policy, extras={"case": verdict})
    else:
        spec = gauss.GaussianSpec(args.n, args.sigma, args.alpha)
        if args.case == "zab":
            lo, hi, label = gauss.interval_point_scale(args.xbar, args.a, args.b, spec)
            extras = {"interval": [lo, hi], "case": label}
        else:
            lo, hi = gauss.refine_box(args.xbar, args.a, args.b, spec)
            extras = {"interval": [lo, hi], "case": "box"}
        design_info = {"design": f"gauss-{args.case}", "a": args.a, "b": args.b,
                       "xbar": args.xbar, "sigma": args.sigma, "n": args.n,
                       "alpha": args.alpha}
        report = build_report(design_info, policy, extras=extras)
    _emit(report, args, None)
    return 0


def _cmd_icp(args) -> int:
    policy = _policy_from(args)
    model, (kind, params) = _model_from_tag(args.model, args.alpha)
    table = read_limits(args.limits).reordered(model.points)
    coverage = _coverage_for(kind, params, table, args.alpha)
    design_info = {"design": kind, "params": list(params), "alpha": args.alpha}
    report = build_report(design_info, policy, table=table, coverage=coverage)
    _emit(report, args, table)
    return 0


_COMMANDS = {
    "prop": _cmd_prop,
    "diff": _cmd_diff,
    "mpair": _cmd_mpair,
    "refine": _cmd_refine,
    "gauss": _cmd_gauss,
    "icp": _cmd_icp,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except ExactCIError as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_EXIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
