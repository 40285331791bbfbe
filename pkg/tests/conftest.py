"""Shared fixtures: cached experiment runs and small instance builders.

The acceptance module reuses full-scale runs across several criteria, so
those are memoized at session scope rather than re-simulated per test.
"""

import functools
import sys

import numpy as np
import pytest

from allocsim import scenario_nonstationary, scenario_stationary
from allocsim.harness import run_experiment


@pytest.fixture(scope="session")
def stationary_report():
    """Memoized run_experiment over the stationary benchmark scenario."""

    @functools.lru_cache(maxsize=None)
    def _run(T: int, seed: int):
        return run_experiment(scenario_stationary(T, seed), "stationary")

    return _run


@pytest.fixture(scope="session")
def nonstationary_report():
    """Memoized run_experiment over the non-stationary scenarios."""

    @functools.lru_cache(maxsize=None)
    def _run(kind: str, T: int, hours: float, seed: int):
        config = scenario_nonstationary(kind, T, hours, seed)
        return run_experiment(config, "nonstationary")

    return _run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for num, name, ok, detail in sorted(mod.RESULTS):
        flag = "PASS" if ok else "FAIL"
        tw.write_line(f"criterion {num:>2}  {name:<38} {flag}  {detail}")


def random_dual_spec(rng: np.random.Generator, n=None, m=None, all_finite=True):
    """Small random weighted-dual problem for oracle comparisons."""
    from allocsim import WeightedDualSpec

    n = int(rng.integers(1, 11)) if n is None else n
    m = int(rng.integers(1, 11)) if m is None else m
    budgets = rng.uniform(0.1, 2.0, size=n)
    if not all_finite and n > 1 and rng.random() < 0.5:
        budgets[rng.integers(n)] = np.inf
    weights = rng.uniform(0.1, 1.0, size=m)
    return WeightedDualSpec(
        weights=weights / weights.sum(),
        budget_scale=float(rng.uniform(0.05, 1.0)),
        preferences=rng.uniform(0.05, 1.0, size=(m, n)),
        rewards=rng.uniform(0.1, 1.0, size=n),
        budgets=budgets,
        mu=float(rng.uniform(0.05, 1.0)),
    )
