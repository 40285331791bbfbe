"""Weighted dual objective, gradient, primal recovery, and the offline solver.

Oracles here are deliberately independent of the implementation: central
finite differences for the gradient and a dense grid scan for the 2x2
minimizer, both computed from scratch in this file.
"""

import csv

import numpy as np
import pytest

from allocsim import (
    DualState,
    WeightedDualSpec,
    dual_gradient,
    dual_objective,
    nonstationary_dual_objective,
    per_customer_dual,
    recover_primal,
    solve_offline,
)
from allocsim.errors import DimensionMismatch
from conftest import random_dual_spec


def one_cell_spec(mu=1.0, budget=1.0):
    return WeightedDualSpec(
        weights=np.array([1.0]),
        budget_scale=1.0,
        preferences=np.array([[1.0]]),
        rewards=np.array([1.0]),
        budgets=np.array([budget]),
        mu=mu,
    )


def fd_gradient(spec, lam, h=1e-6):
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    for i in range(lam.size):
        up, dn = lam.copy(), lam.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (dual_objective(spec, up) - dual_objective(spec, dn)) / (2 * h)
    return out


class TestObjective:
    def test_single_cell_at_zero(self):
        assert dual_objective(one_cell_spec(), np.array([0.0])) == pytest.approx(1.0)

    def test_single_cell_at_one(self):
        # log Z collapses to 0 and the budget term contributes the 1
        assert dual_objective(one_cell_spec(), np.array([1.0])) == pytest.approx(1.0)

    def test_two_identical_items_zero_budget(self):
        spec = WeightedDualSpec(
            weights=np.array([1.0]),
            budget_scale=1.0,
            preferences=np.array([[1.0, 1.0]]),
            rewards=np.array([1.0, 1.0]),
            budgets=np.array([0.0, 0.0]),
            mu=1.0,
        )
        value = dual_objective(spec, np.zeros(2))
        assert value == pytest.approx(np.log(2.0 * np.e), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            dual_objective(one_cell_spec(), np.zeros(3))

    def test_infinite_budget_item_excluded_from_price_term(self):
        spec = WeightedDualSpec(
            weights=np.array([1.0]),
            budget_scale=1.0,
            preferences=np.array([[0.6, 0.8]]),
            rewards=np.array([0.5, 1.0]),
            budgets=np.array([np.inf, 1.0]),
            mu=0.3,
        )
        base = dual_objective(spec, np.array([0.0, 0.2]))
        assert np.isfinite(base)
        # raising the uncapped item's price changes log Z but adds no inf
        moved = dual_objective(spec, np.array([0.4, 0.2]))
        assert np.isfinite(moved)

    def test_convex_along_random_chords(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            spec = random_dual_spec(rng)
            hi = spec.rewards.max()
            a = rng.uniform(0.0, hi, size=spec.n)
            b = rng.uniform(0.0, hi, size=spec.n)
            mid = 0.5 * (a + b)
            lhs = dual_objective(spec, mid)
            rhs = 0.5 * (dual_objective(spec, a) + dual_objective(spec, b))
            assert lhs <= rhs + 1e-9

    def test_log_z_bounded_on_box(self):
        # log Z_j <= log n + r*/mu whenever every price is nonnegative
        rng = np.random.default_rng(7)
        for _ in range(50):
            spec = random_dual_spec(rng)
            lam = rng.uniform(0.0, spec.rewards.max(), size=spec.n)
            expo = (spec.rewards - lam)[None, :] * spec.preferences
            expo = expo / (spec.p_bar[:, None] * spec.mu)
            log_z = np.log(np.exp(expo - expo.max(axis=1, keepdims=True)).sum(axis=1))
            log_z += expo.max(axis=1)
            cap = np.log(spec.n) + spec.rewards.max() / spec.mu
            assert np.all(log_z <= cap + 1e-9)


class TestGradient:
    def test_single_cell_balances(self):
        grad = dual_gradient(one_cell_spec(), np.array([0.0]))
        np.testing.assert_allclose(grad, [0.0], atol=1e-12)

    def test_symmetric_pair(self):
        spec = WeightedDualSpec(
            weights=np.array([1.0]),
            budget_scale=1.0,
            preferences=np.array([[1.0, 1.0]]),
            rewards=np.array([1.0, 1.0]),
            budgets=np.array([1.0, 1.0]),
            mu=1.0,
        )
        np.testing.assert_allclose(
            dual_gradient(spec, np.zeros(2)), [0.5, 0.5], atol=1e-12
        )

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        for _ in range(30):
            spec = random_dual_spec(rng)
            lam = rng.uniform(0.0, spec.rewards.max(), size=spec.n)
            analytic = dual_gradient(spec, lam)
            numeric = fd_gradient(spec, lam)
            scale = max(1.0, float(np.abs(numeric).max()))
            assert np.abs(analytic - numeric).max() / scale <= 1e-5

    def test_infinite_budget_coordinate_pinned(self):
        spec = WeightedDualSpec(
            weights=np.array([0.4, 0.6]),
            budget_scale=0.5,
            preferences=np.array([[0.3, 0.9], [0.7, 0.2]]),
            rewards=np.array([0.8, 1.0]),
            budgets=np.array([np.inf, 2.0]),
            mu=0.2,
        )
        grad = dual_gradient(spec, np.array([0.0, 0.3]))
        assert grad[0] == 0.0
        assert np.isfinite(grad[1])


class TestRecoverPrimal:
    def test_rows_are_distributions(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            spec = random_dual_spec(rng)
            lam = rng.uniform(0.0, spec.rewards.max(), size=spec.n)
            x = recover_primal(spec.preferences, spec.rewards, spec.mu, lam)
            np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(x > 0.0)

    def test_symmetry_gives_uniform(self):
        P = np.full((3, 4), 0.6)
        r = np.full(4, 0.9)
        x = recover_primal(P, r, 0.5, np.zeros(4))
        np.testing.assert_allclose(x, 0.25, atol=1e-12)

    def test_reward_gap_example(self):
        x = recover_primal(
            np.array([[1.0, 1.0]]), np.array([1.0, 0.0]), 1.0, np.zeros(2)
        )
        e = np.e
        np.testing.assert_allclose(
            x[0], [e / (e + 1.0), 1.0 / (e + 1.0)], atol=1e-9
        )

    def test_price_equal_to_reward_gives_uniform(self):
        r = np.array([0.4, 0.7, 1.0])
        x = recover_primal(np.array([[0.5, 0.5, 0.5]]), r, 0.3, r.copy())
        np.testing.assert_allclose(x[0], 1.0 / 3.0, atol=1e-12)


class TestPerCustomerDual:
    def test_empty_prefix(self):
        value = per_customer_dual(
            np.array([0.0]), np.array([[1.0]]), 0,
            np.array([1.0]), np.array([1.0]), 1.0,
        )
        assert value == pytest.approx(1.0)

    def test_prior_assignment_subtracts_expected_consumption(self):
        base = per_customer_dual(
            np.array([2.0]), np.array([[0.5]]), 0,
            np.array([1.0]), np.array([1.0]), 1.0,
        )
        with_prior = per_customer_dual(
            np.array([2.0]), np.array([[0.5]]), 0,
            np.array([1.0]), np.array([1.0]), 1.0,
            prior_assignments=[(0, 0)],
        )
        assert base - with_prior == pytest.approx(1.0)

    def test_zero_price_ignores_prior(self):
        a = per_customer_dual(
            np.zeros(2), np.array([[0.5, 0.5]]), 0,
            np.array([1.0, 0.5]), np.array([1.0, 1.0]), 0.5,
        )
        b = per_customer_dual(
            np.zeros(2), np.array([[0.5, 0.5]]), 0,
            np.array([1.0, 0.5]), np.array([1.0, 1.0]), 0.5,
            prior_assignments=[(0, 1), (0, 0)],
        )
        assert a == pytest.approx(b)


class TestNonstationaryObjective:
    def test_reduces_to_weighted_dual(self):
        rng = np.random.default_rng(12)
        spec = random_dual_spec(rng, n=4, m=3)
        horizon = 50
        phi = spec.weights
        f1 = nonstationary_dual_objective(
            np.zeros(4), spec.preferences, phi, spec.rewards, spec.budgets,
            spec.mu, horizon,
        )
        ref = WeightedDualSpec(
            weights=phi, budget_scale=1.0 / horizon,
            preferences=spec.preferences, rewards=spec.rewards,
            budgets=spec.budgets, mu=spec.mu,
        )
        assert f1 == pytest.approx(dual_objective(ref, np.zeros(4)))

    def test_single_type_weight_is_trivial(self):
        spec = one_cell_spec()
        value = nonstationary_dual_objective(
            np.array([0.0]), np.array([[1.0]]), np.array([1.0]),
            np.array([1.0]), np.array([1.0]), 1.0, 1,
        )
        assert value == pytest.approx(dual_objective(spec, np.array([0.0])))

    def test_mix_perturbation_bound(self):
        # |f(phi) - f(w)| <= m * (mu log n + r*) * max|phi - w|
        rng = np.random.default_rng(31)
        for _ in range(20):
            spec = random_dual_spec(rng)
            lam = rng.uniform(0.0, spec.rewards.max(), size=spec.n)
            w = spec.weights
            phi = w + rng.uniform(-0.05, 0.05, size=spec.m)
            phi = np.clip(phi, 1e-3, None)
            fw = nonstationary_dual_objective(
                lam, spec.preferences, w, spec.rewards, spec.budgets,
                spec.mu, 100,
            )
            fp = nonstationary_dual_objective(
                lam, spec.preferences, phi, spec.rewards, spec.budgets,
                spec.mu, 100,
            )
            bound = (
                spec.m
                * (spec.mu * np.log(spec.n) + spec.rewards.max())
                * float(np.abs(phi - w).max())
            )
            assert abs(fp - fw) <= bound + 1e-9


def grid_minimum_2x2(spec, box, step=0.01):
    """Dense scan oracle, vectorized from scratch for the n=2 case.

    The box's upper edge is appended explicitly: constrained minima sit
    there whenever the unregularized price would exceed the cap, and a
    half-open arange would miss them by up to one step.
    """
    axis = np.unique(np.append(np.arange(0.0, box, step), box))
    L1, L2 = np.meshgrid(axis, axis, indexing="ij")
    lam = np.stack([L1.ravel(), L2.ravel()], axis=1)                # (G, 2)
    expo = (spec.rewards[None, None, :] - lam[:, None, :]) * spec.preferences[None, :, :]
    expo /= spec.p_bar[None, :, None] * spec.mu
    peak = expo.max(axis=2, keepdims=True)
    log_z = np.log(np.exp(expo - peak).sum(axis=2)) + peak[:, :, 0]  # (G, m)
    mix = spec.mu * (log_z * (spec.weights * spec.p_bar)[None, :]).sum(axis=1)
    values = mix + spec.budget_scale * lam @ spec.budgets
    k = int(np.argmin(values))
    return float(values[k]), lam[k]


class TestSolveOffline:
    def test_flat_single_cell(self):
        sol = solve_offline(one_cell_spec())
        assert sol.value == pytest.approx(1.0)
        assert sol.converged

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            spec = random_dual_spec(rng, n=2, m=2)
            box = float(spec.rewards.max())
            sol = solve_offline(spec, box_upper=box)
            oracle, _ = grid_minimum_2x2(spec, box)
            assert sol.value <= oracle + 1e-9
            assert abs(sol.value - oracle) <= 1e-3

    def test_tighter_tolerance_never_worse(self):
        rng = np.random.default_rng(17)
        spec = random_dual_spec(rng, n=5, m=4)
        loose = solve_offline(spec, tol=1e-4)
        tight = solve_offline(spec, tol=1e-10)
        assert tight.value <= loose.value + 1e-12

    def test_iterate_stays_in_box(self):
        rng = np.random.default_rng(23)
        spec = random_dual_spec(rng)
        box = float(spec.rewards.max())
        sol = solve_offline(spec, box_upper=box)
        assert np.all(sol.lam >= 0.0)
        assert np.all(sol.lam <= box + 1e-12)
        assert np.all(sol.lam[spec.infinite] == 0.0)

    def test_iteration_log(self, tmp_path):
        rng = np.random.default_rng(3)
        spec = random_dual_spec(rng, n=4, m=4)
        path = tmp_path / "iters.csv"
        solve_offline(spec, log_path=path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "f", "grad_norm"]
        f_vals = np.array([float(r[1]) for r in rows[1:]])
        assert f_vals.size >= 1
        assert np.all(np.diff(f_vals) <= 1e-12)  # descent never backtracks


class TestDualState:
    def test_fixed_step_size(self):
        state = DualState(
            lam=np.zeros(4), box_upper=1.0, grad_bound=2.0, horizon=400,
        )
        # D = box * sqrt(n) = 2, eta = D / (G sqrt(T)) = 2 / (2 * 20)
        assert state.step_size(1) == pytest.approx(0.05)
        etas = state.eta_array(3)
        np.testing.assert_allclose(etas, 0.05)

    def test_decay_schedule_continues_across_batches(self):
        state = DualState(
            lam=np.zeros(1), box_upper=1.0, grad_bound=1.0, horizon=100,
            step_rule="decay",
        )
        first = state.eta_array(5)
        second = state.eta_array(5, offset=5)
        np.testing.assert_allclose(first, 1.0 / np.sqrt(np.arange(1, 6)))
        np.testing.assert_allclose(second, 1.0 / np.sqrt(np.arange(6, 11)))

    def test_rejects_bad_rule(self):
        with pytest.raises(ValueError):
            DualState(lam=np.zeros(1), box_upper=1.0, grad_bound=1.0,
                      horizon=10, step_rule="linear")
