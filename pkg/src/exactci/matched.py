"""Matched-pair difference of proportions on the reduced sample space.

A 2x2 paired design reduces to the sufficient pair (N10, T) with T the
concordant count; the parameter of interest is the difference of marginal
probabilities d_m = p10 - p01 with the concordance probability p_t as
nuisance.  Baseline interval tables over (n10, t) are ingested from file
and refined with the generic modification operator; nothing here
constructs the externally defined baselines themselves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import dist
from .engine import FiniteModel, GridPolicy, h_at
from .errors import InputError
from .limits import LimitsTable
from .proportion import CoverageReport
from .refine import RefinementTrace, refine_fixed_point, t2_spec

__all__ = [
    "MPairDesign",
    "matched_pair_model",
    "sample_space",
    "h_m",
    "refine_baseline",
    "mle_point_limits",
    "icp_grid_m",
]


@dataclass(frozen=True)
class MPairDesign:
    n: int
    alpha: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha!r}")


def sample_space(n: int) -> np.ndarray:
    """All (n10, t) with n10 + t <= n, n10-major order; (n+1)(n+2)/2 rows."""
    rows = [(n10, t) for n10 in range(n + 1) for t in range(n - n10 + 1)]
    return np.asarray(rows, dtype=int)


def matched_pair_model(n: int) -> FiniteModel:
    pts = sample_space(n)
    n10 = pts[:, 0].astype(float)
    t = pts[:, 1].astype(float)
    n01 = n - n10 - t
    lf = dist._log_factorials(n)
    log_coef = lf[n] - lf[pts[:, 0]] - lf[pts[:, 1]] - lf[n - pts[:, 0] - pts[:, 1]]

    def mass(d_m: float, p_ts: np.ndarray) -> np.ndarray:
        p10 = np.clip((1.0 + d_m - p_ts) / 2.0, 0.0, 1.0)
        p01 = np.clip((1.0 - d_m - p_ts) / 2.0, 0.0, 1.0)
        pt = np.clip(p_ts, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                n10[None, :] == 0, 0.0, n10[None, :] * np.log(p10[:, None])
            )
            out += np.where(t[None, :] == 0, 0.0, t[None, :] * np.log(pt[:, None]))
            out += np.where(
                n01[None, :] == 0, 0.0, n01[None, :] * np.log(p01[:, None])
            )
        return np.exp(out + log_coef[None, :])

    def nuisance(d_m: float) -> Tuple[float, float]:
        return 0.0, 1.0 - abs(d_m)

    return FiniteModel(
        points=pts,
        theta_range=(-1.0, 1.0),
        mass_fn=mass,
        nuisance_fn=nuisance,
        monotone_in_theta=False,
        name=f"matched-pair(n={n})",
    )


def h_m(
    baseline: LimitsTable,
    n10: int,
    t: int,
    d_m: float,
    design: MPairDesign,
    policy: GridPolicy = GridPolicy(),
) -> float:
    """p-value of the null d = d_m from the baseline's interval ordering.

    This is the generic modification p-value: the statistic is the signed
    distance of d_m into the baseline interval, and the nuisance supremum
    runs over the concordance probabilities compatible with d_m.
    """
    model = matched_pair_model(design.n)
    aligned = baseline.reordered(model.points)
    index = model.point_index((n10, t))
    return h_at(model, t2_spec(aligned), index, d_m, policy)


def refine_baseline(
    baseline: LimitsTable,
    design: MPairDesign,
    policy: GridPolicy = GridPolicy(),
    max_k: int = 50,
    threads: int = 1,
) -> RefinementTrace:
    """Drive an ingested baseline table to its refinement fixed point."""
    model = matched_pair_model(design.n)
    return refine_fixed_point(
        model, baseline.reordered(model.points), design.alpha, policy,
        max_k=max_k, threads=threads,
    )


def mle_point_limits(design: MPairDesign) -> LimitsTable:
    """The difference estimate (2*n10 + t - n)/n as a zero-length table.

    Handy as a fully in-package exercise of the modification pipeline when
    no external baseline file is available.
    """
    pts = sample_space(design.n)
    est = (2.0 * pts[:, 0] + pts[:, 1] - design.n) / design.n
    return LimitsTable(
        pts, est.copy(), est.copy(),
        meta=dict(design="mpair", n=str(design.n), alpha=repr(design.alpha),
                  method="mle", rounding="raw"),
    )


def icp_grid_m(
    table: LimitsTable,
    design: MPairDesign,
    grid_step: float = 0.01,
    use_rounded: bool = True,
) -> CoverageReport:
    """Exact coverage minimized over the (d_m, p_t) grid of given step.

    d_m runs over multiples of the step in [-1, 1] plus two probe values
    just inside the boundary (one-sided coverage limits); for each, p_t
    runs over the multiples inside [0, 1 - |d_m|] including the endpoint.
    """
    model = matched_pair_model(design.n)
    work = (table.rounded() if use_rounded else table).reordered(model.points)
    lower, upper = work.lower, work.upper
    m = int(round(2.0 / grid_step))
    eps = 1e-12
    edge = 1e-9
    best = 2.0
    best_at = (None, None)
    d_values = np.concatenate(
        ([-1.0 + edge], -1.0 + np.arange(m + 1) * grid_step, [1.0 - edge])
    )
    for d_m in d_values:
        covered = (lower <= d_m + eps) & (d_m <= upper + eps)
        if not np.any(covered):
            return CoverageReport(icp=0.0, icp_at=(float(d_m), 0.0), til=table.til())
        top = 1.0 - abs(d_m)
        k = int(np.floor(top / grid_step + eps))
        p_ts = np.unique(np.append(np.arange(k + 1) * grid_step, top))
        mass = model.mass(d_m, p_ts)
        cov = mass[:, covered].sum(axis=1)
        j = int(np.argmin(cov))
        if cov[j] < best:
            best = float(cov[j])
            best_at = (float(d_m), float(p_ts[j]))
    return CoverageReport(icp=best, icp_at=best_at, til=table.til())
