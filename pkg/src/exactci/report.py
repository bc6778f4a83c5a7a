"""Report assembly and rendering (aligned text, CSV, JSON).

A report is a plain dict built once per command; every renderer reads the
same dict, so the three output formats agree on all numeric fields by
construction.
"""
from __future__ import annotations

import json
from typing import Dict, List, Optional

import numpy as np

from .engine import GridPolicy
from .limits import LimitsTable, round_down, round_up
from .refine import RefinementTrace


def build_report(
    design: Dict[str, object],
    policy: GridPolicy,
    table: Optional[LimitsTable] = None,
    coverage=None,
    trace: Optional[RefinementTrace] = None,
    extras: Optional[Dict[str, object]] = None,
) -> Dict[str, object]:
    report: Dict[str, object] = {
        "design": dict(design),
        "grid": {
            "theta_points": policy.theta_points,
            "nuisance_points": policy.nuisance_points,
            "bisection_tol": policy.bisection_tol,
            "polish": policy.polish,
        },
    }
    if table is not None:
        rounded_lo = round_down(table.lower)
        rounded_up_ = round_up(table.upper)
        pts = table.points if table.points.ndim == 2 else table.points[:, None]
        report["limits"] = [
            {
                "point": [int(v) for v in row],
                "lower": float(lo),
                "upper": float(up),
                "lower_reported": float(rl),
                "upper_reported": float(ru),
            }
            for row, lo, up, rl, ru in zip(
                pts, table.lower, table.upper, rounded_lo, rounded_up_
            )
        ]
        report["til"] = float(table.til())
    if coverage is not None:
        report["icp"] = float(coverage.icp)
        report["icp_at"] = coverage.icp_at
    if trace is not None:
        report["trace"] = {
            "k": trace.k,
            "converged": trace.converged,
            "til_sequence": [float(t) for t in trace.til_sequence],
            "ratio_sequence": [float(r) for r in trace.ratio_sequence],
            "max_subset_violation": float(trace.max_subset_violation),
        }
    if extras:
        report.update(extras)
    if "interval" in report and "interval_reported" not in report:
        lo, hi = report["interval"]  # type: ignore[misc]
        report["interval_reported"] = [
            float(round_down(lo)) if np.isfinite(lo) else float(lo),
            float(round_up(hi)) if np.isfinite(hi) else float(hi),
        ]
    return report


def _fmt(value: object) -> str:
    if isinstance(value, float):
        if value != value:  # NaN
            return "nan"
        return f"{value:.10g}"
    return str(value)


def render_text(report: Dict[str, object]) -> str:
    lines: List[str] = []
    design = report.get("design", {})
    lines.append("design: " + "  ".join(f"{k}={_fmt(v)}" for k, v in design.items()))
    grid = report.get("grid", {})
    lines.append("grid:   " + "  ".join(f"{k}={_fmt(v)}" for k, v in grid.items()))
    if "interval" in report:
        lo, hi = report["interval"]  # type: ignore[misc]
        rep_pair = report.get("interval_reported")
        if rep_pair is not None:
            lines.append(
                f"interval: [{rep_pair[0]:.4f}, {rep_pair[1]:.4f}]"
                f"  (stored [{_fmt(lo)}, {_fmt(hi)}])"
            )
        else:
            lines.append(f"interval: [{_fmt(lo)}, {_fmt(hi)}]")
    if "case" in report:
        lines.append(f"case: {report['case']}")
    if "p_value" in report:
        lines.append(f"p-value: {report['p_value']:.5f}")
    rows = report.get("limits")
    if rows:
        width = len(rows[0]["point"])
        head = {1: "x", 2: "x y"}.get(width, "point")
        lines.append(f"{head:>8}  {'lower':>10}  {'upper':>10}")
        for row in rows:
            key = " ".join(str(v) for v in row["point"])
            lines.append(
                f"{key:>8}  {row['lower_reported']:>10.4f}  {row['upper_reported']:>10.4f}"
            )
    if "icp" in report:
        at = report.get("icp_at")
        lines.append(f"ICP: {report['icp']:.4f} (at {at})")
    if "til" in report:
        lines.append(f"TIL: {report['til']:.4f}")
    trace = report.get("trace")
    if trace:
        lines.append(
            f"refinement: k={trace['k']} converged={trace['converged']} "
            f"final TIL={trace['til_sequence'][-1]:.4f}"
        )
        ratios = " ".join(f"{r:.7f}" for r in trace["ratio_sequence"])
        lines.append(f"TIL ratios: {ratios}")
    return "\n".join(lines) + "\n"


def render_csv(report: Dict[str, object]) -> str:
    lines: List[str] = []
    rows = report.get("limits")
    if rows:
        width = len(rows[0]["point"])
        head = {1: ["x"], 2: ["x", "y"]}.get(width, [f"k{i}" for i in range(width)])
        lines.append(
            ",".join(head + ["lower", "upper", "lower_reported", "upper_reported"])
        )
        for row in rows:
            lines.append(
                ",".join(
                    [str(v) for v in row["point"]]
                    + [
                        f"{row['lower']:.10g}",
                        f"{row['upper']:.10g}",
                        f"{row['lower_reported']:.4f}",
                        f"{row['upper_reported']:.4f}",
                    ]
                )
            )
    for key in ("interval", "case", "p_value", "icp", "til"):
        if key in report:
            value = report[key]
            if isinstance(value, (list, tuple)):
                lines.append(f"{key}," + ",".join(_fmt(v) for v in value))
            else:
                lines.append(f"{key},{_fmt(value)}")
    trace = report.get("trace")
    if trace:
        lines.append(f"trace_k,{trace['k']}")
        lines.append(f"trace_converged,{trace['converged']}")
        lines.append("trace_til," + ",".join(_fmt(t) for t in trace["til_sequence"]))
    return "\n".join(lines) + "\n"


def render_json(report: Dict[str, object]) -> str:
    def default(obj):
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError(f"not JSON serializable: {type(obj)!r}")

    return json.dumps(report, indent=2, sort_keys=True, default=default) + "\n"


RENDERERS = {"text": render_text, "csv": render_csv, "json": render_json}
