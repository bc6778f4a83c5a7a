"""Modification of arbitrary interval tables into exact ones.

Given any per-sample-point interval table, the operator forms the statistic
T2(x, theta0) = min(theta0 - L(x), U(x) - theta0), whose sign says whether
theta0 lies inside the interval at x, builds its p-value function with the
nuisance supremum, and inverts.  The output is always an exact table; when
the input was already exact, the output is contained in it pointwise, so
iterating the operator drives the table to a smallest fixed point.

Iteration stops when consecutive tables agree at reporting precision and
the ratio of their total lengths equals one to seven decimal places; the
reported iteration count names the later table of the triggering pair
unless the pair is numerically indistinguishable (within the endpoint
solver's noise floor), in which case the earlier table was already fixed.

One-sided tables are handled by their own operators, which are idempotent:
a single application yields the smallest exact one-sided interval among
those ordered consistently with the input's limit function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .engine import FiniteModel, GridPolicy, HFunctionSpec, invert_all
from .errors import InputError
from .limits import LimitsTable

__all__ = [
    "RefinementTrace",
    "t2_stat",
    "t2_spec",
    "modify",
    "refine_fixed_point",
    "modify_lower_one_sided",
    "modify_upper_one_sided",
    "RATIO_TOL",
]

# |TIL ratio - 1| at or below this rounds to 1.0000000 at seven decimals.
RATIO_TOL = 5e-8


@dataclass
class RefinementTrace:
    """Record of one fixed-point iteration run.

    k : index of the iterate identified as the fixed point (0 = the input)
    til_sequence : total interval length of iterates 0..last computed
    ratio_sequence : consecutive TIL ratios, one per applied modification
    converged : whether the stopping rule fired before max_k
    final : the fixed-point table (last iterate when not converged)
    max_subset_violation : largest pointwise containment violation seen
        between consecutive iterates from the second modification onward
        (exact arithmetic would make this zero)
    """

    k: int
    til_sequence: List[float]
    ratio_sequence: List[float]
    converged: bool
    final: LimitsTable
    max_subset_violation: float = 0.0


def t2_stat(limits: LimitsTable, index: int, theta0: float) -> float:
    """Signed distance of theta0 into the interval at one sample point.

    Nonnegative exactly when theta0 lies in [L(x), U(x)]; maximal at the
    midpoint, where it equals half the length.
    """
    return float(
        min(theta0 - limits.lower[index], limits.upper[index] - theta0)
    )


def t2_spec(limits: LimitsTable) -> HFunctionSpec:
    lower = limits.lower
    upper = limits.upper

    def statistic(theta0: float) -> np.ndarray:
        return np.minimum(theta0 - lower, upper - theta0)

    return HFunctionSpec(statistic=statistic, null_kind="point")


def _check_two_sided_input(model: FiniteModel, limits: LimitsTable) -> LimitsTable:
    if not np.all(np.isfinite(limits.lower)) or not np.all(np.isfinite(limits.upper)):
        raise InputError(
            "two-sided modification needs finite limits; use the one-sided "
            "operators for half-infinite intervals"
        )
    return limits.reordered(model.points)


def modify(
    model: FiniteModel,
    limits: LimitsTable,
    alpha: float,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> LimitsTable:
    """One application of the interval modification operator.

    Input limits are used as stored, without clipping to the parameter
    range: an interval that overshoots the range carries real information
    about the ordering of sample points and clipping it would change the
    output.  The result is an exact table (and a subset of the input when
    the input was exact).
    """
    aligned = _check_two_sided_input(model, limits)
    table, _ = invert_all(model, t2_spec(aligned), alpha, policy, threads=threads)
    table.meta.update(aligned.meta)
    table.meta["rounding"] = "raw"
    return table


def refine_fixed_point(
    model: FiniteModel,
    limits: LimitsTable,
    alpha: float,
    policy: GridPolicy = GridPolicy(),
    max_k: int = 50,
    threads: int = 1,
    ratio_tol: float = RATIO_TOL,
) -> RefinementTrace:
    """Iterate the modification operator to its smallest fixed point.

    Nonconvergence at max_k is reported in the trace, not raised; the last
    iterate is still an exact table.
    """
    if max_k < 1:
        raise InputError(f"max_k must be at least 1, got {max_k!r}")
    current = _check_two_sided_input(model, limits)
    tils = [current.til()]
    ratios: List[float] = []
    noise_floor = 4.0 * model.n_points * policy.bisection_tol
    violation = 0.0
    for step in range(1, max_k + 1):
        nxt = modify(model, current, alpha, policy, threads=threads)
        tils.append(nxt.til())
        ratio = tils[-1] / tils[-2] if tils[-2] > 0 else float("inf")
        ratios.append(ratio)
        if step >= 2:
            violation = max(
                violation,
                float(np.max(current.lower - nxt.lower)),
                float(np.max(nxt.upper - current.upper)),
            )
        same_rounded = current.rounded().equals(nxt.rounded())
        ratio_one = abs(ratio - 1.0) <= ratio_tol
        if same_rounded and ratio_one:
            indistinguishable = abs(tils[-1] - tils[-2]) <= noise_floor
            if indistinguishable:
                return RefinementTrace(
                    k=step - 1,
                    til_sequence=tils,
                    ratio_sequence=ratios,
                    converged=True,
                    final=current,
                    max_subset_violation=max(violation, 0.0),
                )
            return RefinementTrace(
                k=step,
                til_sequence=tils,
                ratio_sequence=ratios,
                converged=True,
                final=nxt,
                max_subset_violation=max(violation, 0.0),
            )
        current = nxt
    return RefinementTrace(
        k=max_k,
        til_sequence=tils,
        ratio_sequence=ratios,
        converged=False,
        final=current,
        max_subset_violation=max(violation, 0.0),
    )


def _one_sided_values(limits, attr: str) -> np.ndarray:
    if isinstance(limits, LimitsTable):
        vals = getattr(limits, attr)
    else:
        vals = np.asarray(limits, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InputError("one-sided limit values must be finite")
    return vals


def modify_lower_one_sided(
    model: FiniteModel,
    lower_limits,
    alpha: float,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> LimitsTable:
    """Smallest exact lower one-sided table consistent with the input order.

    Only the ordering of sample points by their lower limit matters; the
    output lower limit at x is the smallest theta0 at which the null-side
    supremum of the mass of {y : L(y) >= L(x)} still exceeds alpha.  The
    operator is idempotent.
    """
    if isinstance(lower_limits, LimitsTable):
        lower_limits = lower_limits.reordered(model.points)
    values = _one_sided_values(lower_limits, "lower")
    if len(values) != model.n_points:
        raise InputError("one lower limit per sample point is required")

    spec = HFunctionSpec(statistic=lambda theta0: -values, null_kind="lower")
    table, _ = invert_all(model, spec, alpha, policy, threads=threads)
    return table


def modify_upper_one_sided(
    model: FiniteModel,
    upper_limits,
    alpha: float,
    policy: GridPolicy = GridPolicy(),
    threads: int = 1,
) -> LimitsTable:
    """Mirror image of :func:`modify_lower_one_sided` for upper intervals."""
    if isinstance(upper_limits, LimitsTable):
        upper_limits = upper_limits.reordered(model.points)
    values = _one_sided_values(upper_limits, "upper")
    if len(values) != model.n_points:
        raise InputError("one upper limit per sample point is required")

    spec = HFunctionSpec(statistic=lambda theta0: values, null_kind="upper")
    table, _ = invert_all(model, spec, alpha, policy, threads=threads)
    return table
