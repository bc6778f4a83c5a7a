"""Intervals for a single binomial proportion.

Three exact constructions (doubled-tail, minimum-tail and likelihood-ratio
orderings of the binomial), closed-form approximate baselines (Wald,
Wilson score, the sample proportion as a zero-length interval, and
arbitrary point-estimator tables read from file), symmetry completion of
half tables, and exact infimum-coverage evaluation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import dist
from .engine import FiniteModel, GridPolicy, HFunctionSpec, invert_all
from .errors import InputError
from .limits import LimitsTable

__all__ = [
    "PropDesign",
    "CoverageReport",
    "binomial_model",
    "cp_h",
    "blaker_h",
    "lrt_h",
    "spec_for",
    "exact_limits",
    "baseline_limits",
    "complete_by_symmetry",
    "icp_single_prop",
    "til",
    "EXACT_METHODS",
    "BASELINE_METHODS",
]

EXACT_METHODS = ("cp", "blaker", "lrt")
BASELINE_METHODS = ("wald", "wilson", "sample_prop", "custom_point")


@dataclass(frozen=True)
class PropDesign:
    n: int
    alpha: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True)
class CoverageReport:
    """Infimum coverage probability, where it is attained, and TIL.

    ``icp_at`` is a parameter value for one-parameter designs and a
    parameter pair for two-parameter ones.
    """

    icp: float
    icp_at: object
    til: float


def binomial_model(n: int) -> FiniteModel:
    """Binomial sample space 0..n with success probability as parameter."""

    def mass(p: float, etas: np.ndarray) -> np.ndarray:
        table = dist.binom_pmf_table(n, min(max(p, 0.0), 1.0))
        return np.broadcast_to(table, (len(etas), n + 1)).copy()

    return FiniteModel(
        points=np.arange(n + 1),
        theta_range=(0.0, 1.0),
        mass_fn=mass,
        nuisance_fn=None,
        monotone_in_theta=True,
        name=f"binomial(n={n})",
    )


def _tail_probs(n: int, p0: float) -> Tuple[np.ndarray, np.ndarray]:
    """(P(X <= x), P(X >= x)) for all x, each by direct tail summation."""
    table = dist.binom_pmf_table(n, p0)
    cdf = np.minimum(np.cumsum(table), 1.0)
    sf = np.minimum(np.cumsum(table[::-1])[::-1], 1.0)
    return cdf, sf


def cp_h_profile(n: int, p0: float) -> np.ndarray:
    cdf, sf = _tail_probs(n, p0)
    return np.minimum(2.0 * np.minimum(cdf, sf), 1.0)


def cp_h(n: int, x: int, p0: float) -> float:
    """Doubled-tail h: min(2 min(P(X<=x), P(X>=x)), 1)."""
    _check_x(n, x)
    return float(cp_h_profile(n, _check_p0(p0))[x])


def blaker_statistic(n: int):
    def statistic(p0: float) -> np.ndarray:
        cdf, sf = _tail_probs(n, p0)
        return np.minimum(cdf, sf)

    return statistic


def blaker_h(n: int, x: int, p0: float) -> float:
    """Minimum-tail-ordering h: mass of {y : min-tail(y) <= min-tail(x)}."""
    _check_x(n, x)
    p0 = _check_p0(p0)
    t = blaker_statistic(n)(p0)
    table = dist.binom_pmf_table(n, p0)
    return float(min(table[t <= t[x] + 1e-12 + 1e-10 * abs(t[x])].sum(), 1.0))


def lrt_statistic(n: int):
    xs = np.arange(n + 1, dtype=float)
    p_hat = xs / n

    def statistic(p0: float) -> np.ndarray:
        # log likelihood ratio, 0*log(.) = 0 at the boundary counts
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(xs == 0, 0.0, xs * (np.log(p0) - np.log(p_hat)))
            t2 = np.where(
                xs == n, 0.0, (n - xs) * (np.log1p(-p0) - np.log1p(-p_hat))
            )
        return np.minimum(t1 + t2, 0.0)

    return statistic


def lrt_h(n: int, x: int, p0: float) -> float:
    """Likelihood-ratio-ordering h, with the ratio compared in log space."""
    _check_x(n, x)
    p0 = _check_p0(p0)
    t = lrt_statistic(n)(p0)
    table = dist.binom_pmf_table(n, p0)
    tx = t[x]
    if math.isinf(tx):
        mask = np.isinf(t) & (t < 0)
    else:
        mask = t <= tx + 1e-12 + 1e-10 * abs(tx)
    return float(min(table[mask].sum(), 1.0))


def spec_for(method: str, n: int) -> HFunctionSpec:
    """h-function recipe for one of the exact construction methods."""
    if method == "cp":
        return HFunctionSpec(h_values=lambda p0: cp_h_profile(n, p0))
    if method == "blaker":
        return HFunctionSpec(statistic=blaker_statistic(n))
    if method == "lrt":
        return HFunctionSpec(statistic=lrt_statistic(n))
    raise InputError(f"unknown exact method {method!r}; expected one of {EXACT_METHODS}")


def exact_limits(
    design: PropDesign,
    method: str,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> LimitsTable:
    """Exact interval table for every x by inverting the chosen h."""
    model = binomial_model(design.n)
    spec = spec_for(method, design.n)
    table, _ = invert_all(model, spec, design.alpha, policy, threads=threads)
    table.meta.update(design="prop", n=str(design.n), alpha=repr(design.alpha),
                      method=method, rounding="raw")
    return table


def baseline_limits(
    design: PropDesign,
    method: str,
    point_values: Optional[np.ndarray] = None,
) -> LimitsTable:
    """Closed-form approximate or point-estimator limits, kept unclipped.

    Wald limits may leave [0, 1]; they are stored raw because the
    modification statistic must see the original interval geometry.
    Clipping is a reporting concern.
    """
    n = design.n
    xs = np.arange(n + 1, dtype=float)
    p_hat = xs / n
    if method == "wald":
        z = dist.std_normal_quantile(1.0 - design.alpha / 2.0)
        half = z * np.sqrt(p_hat * (1.0 - p_hat) / n)
        lower, upper = p_hat - half, p_hat + half
    elif method == "wilson":
        z = dist.std_normal_quantile(1.0 - design.alpha / 2.0)
        denom = 1.0 + z * z / n
        center = (p_hat + z * z / (2.0 * n)) / denom
        half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
        lower, upper = center - half, center + half
    elif method == "sample_prop":
        lower = upper = p_hat.copy()
    elif method == "custom_point":
        if point_values is None:
            raise InputError("custom_point requires a per-x value table")
        vals = np.asarray(point_values, dtype=float)
        if vals.shape != (n + 1,):
            raise InputError(f"custom_point table must have {n + 1} entries")
        if np.any(np.diff(vals) < -1e-12):
            raise InputError("custom_point table must be nondecreasing in x")
        lower = upper = vals.copy()
    else:
        raise InputError(
            f"unknown baseline method {method!r}; expected one of {BASELINE_METHODS}"
        )
    return LimitsTable(
        np.arange(n + 1), lower, upper,
        meta=dict(design="prop", n=str(n), alpha=repr(design.alpha),
                  method=method, rounding="raw"),
    )


def complete_by_symmetry(lower: np.ndarray, n: Optional[int] = None) -> LimitsTable:
    """Build the upper limits from the lower half table: U(x) = 1 - L(n-x).

    Applies to any construction whose ordering is invariant under the joint
    reflection x -> n-x, p0 -> 1-p0; idempotent by construction.
    """
    if isinstance(lower, LimitsTable):
        lower_vals = lower.lower
        n = len(lower_vals) - 1
    else:
        lower_vals = np.asarray(lower, dtype=float)
        if n is None:
            n = len(lower_vals) - 1
    if len(lower_vals) != n + 1:
        raise InputError("lower limits must cover x = 0..n")
    upper = 1.0 - lower_vals[::-1]
    return LimitsTable(np.arange(n + 1), lower_vals.copy(), upper)


def _coverage_left_limit(lower, upper, n, a):
    covered = (lower < a) & (a <= upper)
    if not np.any(covered):
        return 0.0
    return float(dist.binom_pmf_table(n, a)[covered].sum())


def _coverage_right_limit(lower, upper, n, a):
    covered = (lower <= a) & (a < upper)
    if not np.any(covered):
        return 0.0
    return float(dist.binom_pmf_table(n, a)[covered].sum())


def icp_single_prop(
    table: LimitsTable, n: int, use_rounded: bool = True
) -> CoverageReport:
    """Exact infimum coverage probability of a proportion interval table.

    For a nondecreasing lower-limit table the infimum is attained at a
    one-sided limit of some confidence bound, so it suffices to evaluate
    the coverage left limit at each positive lower bound and the right
    limit at each sub-unit upper bound, plus the two boundary limits
    p -> 0+ and p -> 1-.  Non-monotone tables fall back to a dense-grid
    scan of the same candidate functionals, with a warning.
    """
    work = table.rounded() if use_rounded else table
    lower, upper = work.lower, work.upper
    if len(lower) != n + 1:
        raise InputError(f"table must cover x = 0..{n}")
    monotone = bool(
        np.all(np.diff(lower) >= -1e-12) and np.all(np.diff(upper) >= -1e-12)
    )
    # boundary limits: as p -> 0+ only x = 0 retains mass, and dually at 1
    best = 1.0 if (lower[0] <= 0.0 < upper[0]) else 0.0
    best_at: Optional[float] = 0.0 if best == 0.0 else None
    cov_one = 1.0 if (lower[n] < 1.0 <= upper[n]) else 0.0
    if cov_one < best:
        best, best_at = cov_one, 1.0
    candidates = [float(a) for a in lower if 0.0 < a < 1.0]
    candidates_u = [float(a) for a in upper if 0.0 < a < 1.0]
    if not monotone:
        warnings.warn(
            "lower limits are not monotone; falling back to a dense grid scan "
            "for the infimum coverage",
            stacklevel=2,
        )
        candidates.extend(np.linspace(1e-6, 1.0 - 1e-6, 2001))
    for a in candidates:
        cov = _coverage_left_limit(lower, upper, n, a)
        if cov < best:
            best, best_at = cov, a
    for a in candidates_u:
        cov = _coverage_right_limit(lower, upper, n, a)
        if cov < best:
            best, best_at = cov, a
    return CoverageReport(icp=best, icp_at=best_at, til=table.til())


def til(table: LimitsTable) -> float:
    """Total interval length over all sample points (stored precision)."""
    return table.til()


def _check_x(n: int, x: int) -> None:
    if int(x) != x or x < 0 or x > n:
        raise InputError(f"x must be an integer in [0, {n}], got {x!r}")


def _check_p0(p0: float) -> float:
    p0 = float(p0)
    if not 0.0 <= p0 <= 1.0:
        raise InputError(f"p0 must lie in [0, 1], got {p0!r}")
    return p0
