"""Shared fixtures.

The heavy table constructions (difference designs, refinement traces) are
session-scoped so the unit suites and the acceptance suite share one
computation.
"""
import numpy as np
import pytest

from exactci import proportion, refine, twoprop
from exactci.engine import GridPolicy

THREADS = 2


@pytest.fixture(scope="session")
def policy():
    return GridPolicy()


@pytest.fixture(scope="session")
def prop16(policy):
    """Exact tables and one-step refinements for n=16, alpha=0.05."""
    import time

    design = proportion.PropDesign(16, 0.05)
    model = proportion.binomial_model(16)
    out = {"design": design, "model": model}
    start = time.perf_counter()
    for method in ("cp", "blaker", "lrt"):
        table = proportion.exact_limits(design, method, policy, threads=THREADS)
        out[method] = table
        out[method + "_M"] = refine.modify(model, table, 0.05, policy,
                                           threads=THREADS)
    out["build_seconds"] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def wald16_trace(policy):
    design = proportion.PropDesign(16, 0.05)
    model = proportion.binomial_model(16)
    wald = proportion.baseline_limits(design, "wald")
    trace = refine.refine_fixed_point(model, wald, 0.05, policy, max_k=50,
                                      threads=THREADS)
    return {"wald": wald, "trace": trace}


@pytest.fixture(scope="session")
def diff810_tables(policy):
    """Exact and refined tables for the (8, 10) difference design."""
    design = twoprop.DiffDesign(8, 10, 0.05)
    model = twoprop.product_binomial_model(8, 10)
    lrt = twoprop.exact_limits(design, "lrt", policy, threads=THREADS)
    score = twoprop.exact_limits(design, "score", policy, threads=THREADS)
    return {"design": design, "model": model, "lrt": lrt, "score": score}


@pytest.fixture(scope="session")
def diff810_mle_trace(policy, diff810_tables):
    mle = twoprop.baseline_limits(diff810_tables["design"], "mle")
    trace = refine.refine_fixed_point(
        diff810_tables["model"], mle, 0.05, policy, max_k=50, threads=THREADS
    )
    return {"mle": mle, "trace": trace}
