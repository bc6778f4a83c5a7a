"""Difference of two independent binomial proportions d = p1 - p2.

Constrained maximum likelihood under p1 = p2 + d0, likelihood-ratio and
score orderings with nuisance supremum over the compatible p2 domain,
closed-form Wald and point-estimator baselines, symmetry completion, and
exact coverage on the standard 201 x 201 probability grid.

The constrained likelihood maximizer and every nuisance supremum share one
optimizer configuration (the grid/polish knobs of `GridPolicy`), so table
reproduction has a single accuracy knob.  A per-design workspace caches
the log-likelihood matrix over the nuisance grid: the statistic reads its
column argmax and the model mass function exponentiates the same matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from . import dist
from .dist import _log_factorials
from .engine import (
    FiniteModel,
    GridPolicy,
    HFunctionSpec,
    h_at,
    invert_all,
    invert_interval,
)
from .errors import InputError
from .limits import LimitsTable
from .proportion import CoverageReport

__all__ = [
    "DiffDesign",
    "nuisance_domain",
    "product_binomial_model",
    "constrained_mle_p2",
    "lrt_stat_d",
    "score_stat_d",
    "spec_for",
    "h_d",
    "exact_limits",
    "invert_at",
    "wald_interval_d",
    "mle_point_d",
    "baseline_limits",
    "complete_by_symmetry_d",
    "icp_grid_d",
    "EXACT_METHODS",
    "BASELINE_METHODS",
]

EXACT_METHODS = ("lrt", "score")
BASELINE_METHODS = ("wald", "mle")


@dataclass(frozen=True)
class DiffDesign:
    n1: int
    n2: int
    alpha: float

    def __post_init__(self) -> None:
        for n in (self.n1, self.n2):
            if int(n) != n or n < 1:
                raise InputError(f"group sizes must be positive integers, got {n!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha!r}")


def nuisance_domain(d0: float) -> Tuple[float, float]:
    """Admissible p2 values under p1 = p2 + d0: [0, 1-d0] or [-d0, 1]."""
    if not -1.0 <= d0 <= 1.0:
        raise InputError(f"d0 must lie in [-1, 1], got {d0!r}")
    if d0 >= 0.0:
        return 0.0, 1.0 - d0
    return -d0, 1.0


def _points(n1: int, n2: int) -> np.ndarray:
    xv, yv = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), indexing="ij")
    return np.column_stack([xv.ravel(), yv.ravel()])


def _outer_zero(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Outer product with the 0 * (-inf) = 0 convention."""
    with np.errstate(invalid="ignore"):
        out = np.multiply.outer(v, w)
    if not np.all(np.isfinite(v)):
        np.nan_to_num(out, copy=False, nan=0.0, posinf=np.inf, neginf=-np.inf)
    return out


class _Workspace:
    """Shared arrays and the per-d0 log-likelihood cache for one design."""

    _CACHE_SLOTS = 8

    def __init__(self, design: DiffDesign, policy: GridPolicy) -> None:
        self.design = design
        self.policy = policy
        self.points = _points(design.n1, design.n2)
        self.xs = self.points[:, 0].astype(float)
        self.ys = self.points[:, 1].astype(float)
        self.n1_xs = design.n1 - self.xs
        self.n2_ys = design.n2 - self.ys
        self.xs_zero = self.points[:, 0] == 0
        self.xs_full = self.points[:, 0] == design.n1
        self.ys_zero = self.points[:, 1] == 0
        self.ys_full = self.points[:, 1] == design.n2
        lf1 = _log_factorials(design.n1)
        lf2 = _log_factorials(max(design.n1, design.n2))
        self.log_coef = (
            lf1[design.n1]
            - lf1[self.points[:, 0]]
            - lf1[design.n1 - self.points[:, 0]]
            + lf2[design.n2]
            - lf2[self.points[:, 1]]
            - lf2[design.n2 - self.points[:, 1]]
        )
        self.p1_hat = self.xs / design.n1
        self.p2_hat = self.ys / design.n2
        self._loglik_cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def nuisance_grid(self, d0: float) -> np.ndarray:
        lo, hi = nuisance_domain(d0)
        if hi <= lo:
            return np.array([lo])
        return np.linspace(lo, hi, self.policy.nuisance_points)

    def _loglik(self, d0: float, p2s: np.ndarray) -> np.ndarray:
        """(E, P) log joint mass, including the binomial coefficients."""
        p1s = np.clip(p2s + d0, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            lg1 = np.log(p1s)
            lg1c = np.log1p(-p1s)
            lg2 = np.log(p2s)
            lg2c = np.log1p(-p2s)
        out = _outer_zero(lg1, self.xs)
        out += _outer_zero(lg1c, self.n1_xs)
        out += _outer_zero(lg2, self.ys)
        out += _outer_zero(lg2c, self.n2_ys)
        out += self.log_coef[None, :]
        return out

    def loglik_grid(self, d0: float) -> Tuple[np.ndarray, np.ndarray]:
        hit = self._loglik_cache.get(d0)
        if hit is not None:
            return hit
        etas = self.nuisance_grid(d0)
        entry = (etas, self._loglik(d0, etas))
        if len(self._loglik_cache) >= self._CACHE_SLOTS:
            self._loglik_cache.pop(next(iter(self._loglik_cache)))
        self._loglik_cache[d0] = entry
        return entry

    def mass(self, d0: float, etas: np.ndarray) -> np.ndarray:
        hit = self._loglik_cache.get(d0)
        if (
            hit is not None
            and len(hit[0]) == len(etas)
            and hit[0][0] == etas[0]
            and hit[0][-1] == etas[-1]
        ):
            return np.exp(hit[1])
        return np.exp(self._loglik(d0, np.asarray(etas, dtype=float)))

    def mle(self, d0: float) -> np.ndarray:
        """Constrained likelihood maximizer p2 for every sample point.

        Grid argmax over the nuisance domain, then bisection on the sign of
        the likelihood derivative inside the bracketing cell.  The log
        likelihood is concave in p2, so the grid argmax's neighbors bracket
        the true maximizer, and sign bisection locates it to near machine
        precision.  That accuracy matters: mirror-symmetric sample points
        must produce exactly tied statistic values.
        """
        lo, hi = nuisance_domain(d0)
        if hi <= lo:
            return np.full(len(self.xs), lo)
        etas, ll = self.loglik_grid(d0)
        best = np.argmax(ll, axis=0)
        p2d = etas[best]
        if not self.policy.polish:
            return p2d
        a = etas[np.maximum(best - 1, 0)]
        b = etas[np.minimum(best + 1, len(etas) - 1)]
        xs, n1_xs, ys, n2_ys = self.xs, self.n1_xs, self.ys, self.n2_ys
        for _ in range(40):
            p2 = 0.5 * (a + b)
            p1 = p2 + d0
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(self.xs_zero, 0.0, xs / p1)
                g -= np.where(self.xs_full, 0.0, n1_xs / (1.0 - p1))
                g += np.where(self.ys_zero, 0.0, ys / p2)
                g -= np.where(self.ys_full, 0.0, n2_ys / (1.0 - p2))
            positive = g > 0.0
            a = np.where(positive, p2, a)
            b = np.where(positive, b, p2)
        return 0.5 * (a + b)

    def lrt_values(self, d0: float) -> np.ndarray:
        """Log likelihood ratio of the constrained to the unconstrained fit."""
        p2d = self.mle(d0)
        p1d = np.clip(p2d + d0, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(
                self.xs_zero, 0.0, self.xs * (np.log(p1d) - np.log(self.p1_hat))
            )
            t2 = np.where(
                self.xs_full,
                0.0,
                self.n1_xs * (np.log1p(-p1d) - np.log1p(-self.p1_hat)),
            )
            t3 = np.where(
                self.ys_zero, 0.0, self.ys * (np.log(p2d) - np.log(self.p2_hat))
            )
            t4 = np.where(
                self.ys_full,
                0.0,
                self.n2_ys * (np.log1p(-p2d) - np.log1p(-self.p2_hat)),
            )
        return np.minimum(t1 + t2 + t3 + t4, 0.0)

    def score_values(self, d0: float) -> np.ndarray:
        p2d = self.mle(d0)
        p1d = np.clip(p2d + d0, 0.0, 1.0)
        var = p1d * (1.0 - p1d) / self.design.n1 + p2d * (1.0 - p2d) / self.design.n2
        num = -np.abs(self.p1_hat - self.p2_hat - d0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                var > 0.0,
                num / np.sqrt(var),
                # 0/0 only at the two fully determined corners; any other
                # zero-variance point with a nonzero numerator carries the
                # strongest possible evidence against the null
                np.where(num == 0.0, 0.0, -np.inf),
            )


@lru_cache(maxsize=16)
def _workspace(design: DiffDesign, policy: GridPolicy) -> _Workspace:
    return _Workspace(design, policy)


def product_binomial_model(
    n1: int, n2: int, policy: GridPolicy = GridPolicy()
) -> FiniteModel:
    """Joint model of two independent binomials, parameterized by d = p1 - p2."""
    ws = _workspace(DiffDesign(n1, n2, 0.5), policy)
    return FiniteModel(
        points=ws.points,
        theta_range=(-1.0, 1.0),
        mass_fn=ws.mass,
        nuisance_fn=nuisance_domain,
        monotone_in_theta=False,
        name=f"two-binomial(n1={n1}, n2={n2})",
    )


def constrained_mle_p2(
    x: int, y: int, d0: float, design: DiffDesign, policy: GridPolicy = GridPolicy()
) -> float:
    """Maximizer of the constrained log likelihood over the p2 domain."""
    _check_point(design, x, y)
    ws = _workspace(design, policy)
    return float(ws.mle(d0)[x * (design.n2 + 1) + y])


def lrt_stat_d(
    x: int, y: int, d0: float, design: DiffDesign, policy: GridPolicy = GridPolicy()
) -> float:
    """Log of the likelihood ratio statistic at one sample point."""
    _check_point(design, x, y)
    ws = _workspace(design, policy)
    return float(ws.lrt_values(d0)[x * (design.n2 + 1) + y])


def score_stat_d(
    x: int, y: int, d0: float, design: DiffDesign, policy: GridPolicy = GridPolicy()
) -> float:
    """Score statistic with the variance built from constrained estimates."""
    _check_point(design, x, y)
    ws = _workspace(design, policy)
    return float(ws.score_values(d0)[x * (design.n2 + 1) + y])


def spec_for(
    method: str, design: DiffDesign, policy: GridPolicy = GridPolicy()
) -> HFunctionSpec:
    ws = _workspace(design, policy)
    if method == "lrt":
        return HFunctionSpec(statistic=ws.lrt_values)
    if method == "score":
        return HFunctionSpec(statistic=ws.score_values)
    raise InputError(
        f"unknown exact method {method!r}; expected one of {EXACT_METHODS}"
    )


def _model_for(design: DiffDesign, policy: GridPolicy) -> FiniteModel:
    ws = _workspace(design, policy)
    return FiniteModel(
        points=ws.points,
        theta_range=(-1.0, 1.0),
        mass_fn=ws.mass,
        nuisance_fn=nuisance_domain,
        monotone_in_theta=False,
        name=f"two-binomial(n1={design.n1}, n2={design.n2})",
    )


def h_d(
    method: str,
    x: int,
    y: int,
    d0: float,
    design: DiffDesign,
    policy: GridPolicy = GridPolicy(),
) -> float:
    """h for the chosen ordering at a single sample point and d0."""
    _check_point(design, x, y)
    model = _model_for(design, policy)
    spec = spec_for(method, design, policy)
    return h_at(model, spec, x * (design.n2 + 1) + y, d0, policy)


def exact_limits(
    design: DiffDesign,
    method: str,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> LimitsTable:
    """Full exact interval table over the (n1+1)(n2+1) sample points."""
    model = _model_for(design, policy)
    spec = spec_for(method, design, policy)
    table, _ = invert_all(model, spec, design.alpha, policy, threads=threads)
    table.meta.update(design="diff", n1=str(design.n1), n2=str(design.n2),
                      alpha=repr(design.alpha), method=method, rounding="raw")
    return table


def invert_at(
    design: DiffDesign,
    method: str,
    x: int,
    y: int,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> Tuple[float, float]:
    """Exact interval at a single observation without building the table."""
    _check_point(design, x, y)
    model = _model_for(design, policy)
    spec = spec_for(method, design, policy)
    lo, hi, _ = invert_interval(
        model, spec, x * (design.n2 + 1) + y, design.alpha, policy,
        threads=threads,
    )
    return lo, hi


def wald_interval_d(x: int, y: int, design: DiffDesign) -> Tuple[float, float]:
    """Large-sample difference interval; raw limits may leave [-1, 1]."""
    _check_point(design, x, y)
    p1h, p2h = x / design.n1, y / design.n2
    z = dist.std_normal_quantile(1.0 - design.alpha / 2.0)
    half = z * math.sqrt(
        p1h * (1.0 - p1h) / design.n1 + p2h * (1.0 - p2h) / design.n2
    )
    return p1h - p2h - half, p1h - p2h + half


def mle_point_d(x: int, y: int, design: DiffDesign) -> Tuple[float, float]:
    """The difference estimate treated as a zero-length interval."""
    _check_point(design, x, y)
    v = x / design.n1 - y / design.n2
    return v, v


def baseline_limits(design: DiffDesign, method: str) -> LimitsTable:
    pts = _points(design.n1, design.n2)
    if method == "wald":
        pairs = [wald_interval_d(x, y, design) for x, y in pts]
    elif method == "mle":
        pairs = [mle_point_d(x, y, design) for x, y in pts]
    else:
        raise InputError(
            f"unknown baseline method {method!r}; expected one of {BASELINE_METHODS}"
        )
    lower = np.array([p[0] for p in pairs])
    upper = np.array([p[1] for p in pairs])
    return LimitsTable(
        pts, lower, upper,
        meta=dict(design="diff", n1=str(design.n1), n2=str(design.n2),
                  alpha=repr(design.alpha), method=method, rounding="raw"),
    )


def complete_by_symmetry_d(lower: LimitsTable, n1: int, n2: int) -> LimitsTable:
    """Upper limits from the lower table: U(x, y) = -L(n1-x, n2-y)."""
    pts = _points(n1, n2)
    src = lower.reordered(pts)
    low = src.lower.reshape(n1 + 1, n2 + 1)
    upper = -low[::-1, ::-1]
    return LimitsTable(pts, low.ravel(), upper.ravel())


def icp_grid_d(
    table: LimitsTable,
    design: DiffDesign,
    grid_step: float = 0.005,
    use_rounded: bool = True,
    refine_local: bool = False,
) -> CoverageReport:
    """Exact coverage minimized over the (p1, p2) probability grid.

    Coverage at each grid pair is the exact sum of product-binomial masses
    of the sample points whose interval contains p1 - p2.  Boundary rows
    and columns use the exact degenerate masses; two probe lines just
    inside each probability boundary capture one-sided coverage limits,
    where degenerate intervals (zero-length at almost-sure observations)
    drive the infimum to zero.
    """
    pts = _points(design.n1, design.n2)
    work = (table.rounded() if use_rounded else table).reordered(pts)
    lower, upper = work.lower, work.upper
    m = int(round(1.0 / grid_step))
    edge = 1e-9
    p_grid = np.concatenate(([edge], np.arange(m + 1) * grid_step, [1.0 - edge]))
    pmf2 = dist.binom_pmf_grid(design.n2, p_grid)[:, pts[:, 1]]
    best = 2.0
    best_at = (None, None)
    eps = 1e-12
    for p1 in p_grid:
        mass1 = dist.binom_pmf_table(design.n1, p1)[pts[:, 0]]
        d = p1 - p_grid
        inside = (lower[None, :] <= d[:, None] + eps) & (
            d[:, None] <= upper[None, :] + eps
        )
        cov = np.sum(pmf2 * mass1[None, :] * inside, axis=1)
        j = int(np.argmin(cov))
        if cov[j] < best:
            best = float(cov[j])
            best_at = (float(p1), float(p_grid[j]))
    if refine_local and best_at[0] is not None:
        fine = grid_step / 10.0
        for p1 in np.clip(best_at[0] + np.arange(-10, 11) * fine, 0.0, 1.0):
            mass1 = dist.binom_pmf_table(design.n1, p1)[pts[:, 0]]
            for p2 in np.clip(best_at[1] + np.arange(-10, 11) * fine, 0.0, 1.0):
                mass2 = dist.binom_pmf_table(design.n2, p2)[pts[:, 1]]
                d = p1 - p2
                inside = (lower <= d + eps) & (d <= upper + eps)
                cov = float(np.sum(mass1[inside] * mass2[inside]))
                if cov < best:
                    best = cov
                    best_at = (float(p1), float(p2))
    return CoverageReport(icp=best, icp_at=best_at, til=table.til())


def _check_point(design: DiffDesign, x: int, y: int) -> None:
    if int(x) != x or x < 0 or x > design.n1:
        raise InputError(f"x must be an integer in [0, {design.n1}], got {x!r}")
    if int(y) != y or y < 0 or y > design.n2:
        raise InputError(f"y must be an integer in [0, {design.n2}], got {y!r}")
