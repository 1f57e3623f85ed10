"""Nested recursions, the flat-LP oracle, and the verification reports."""

import math

import numpy as np
import pytest

from conftest import height3_pair, path_tree, random_tree_pair, split_timing_pair
from nested_sinkhorn import (
    conditional_marginal_residuals,
    cost_matrix,
    flat_nested_lp,
    generate_random_tree,
    lambda_sweep,
    martingale_check,
    nested_bound_report,
    nested_exact,
    nested_sinkhorn,
    sinkhorn_auto,
    trajectories,
    verify_entropic_equivalence,
    wasserstein_distance,
)


class TestNestedExact:
    def test_split_timing_pair_hand_recursion(self):
        # conditional values at stage 1 are 1.1 and 1.0; the root couples
        # them with weights one half each
        early, late = split_timing_pair(0.1)
        res = nested_exact(early, late, 1.0)
        assert res.value == pytest.approx(1.05, abs=1e-10)
        stage1 = res.stage_tables[1]
        values = sorted(sol.value for sol in stage1.values())
        assert values == pytest.approx([1.0, 1.1], abs=1e-12)

    def test_identical_trees_diagonal_coupling(self):
        tree, _ = height3_pair()
        res = nested_exact(tree, tree, 1.0)
        assert res.value == pytest.approx(0.0, abs=1e-12)
        p = np.array([t.prob for t in trajectories(tree)])
        assert res.composed_plan.matrix == pytest.approx(np.diag(p), abs=1e-12)

    def test_height3_pair_matches_flat_lp(self):
        tree_a, tree_b = height3_pair()
        res = nested_exact(tree_a, tree_b, 1.0)
        flat_value, flat_plan = flat_nested_lp(tree_a, tree_b, 1.0)
        assert res.value == pytest.approx(flat_value, abs=1e-8)

    def test_composed_plan_properties(self):
        tree_a, tree_b = height3_pair()
        res = nested_exact(tree_a, tree_b, 1.0)
        plan = res.composed_plan
        plan.validate(atol=1e-8)
        # pricing the composed plan against the leaf costs reproduces the
        # recursion's root value
        cost = cost_matrix(tree_a, tree_b, 1.0)
        assert float((plan.matrix * cost).sum()) == pytest.approx(res.value_pow, abs=1e-10)
        # the composed plan is feasible for the flat conditional constraints
        assert conditional_marginal_residuals(tree_a, tree_b, plan.matrix) <= 1e-7

    def test_composed_plan_is_product_of_conditionals(self):
        tree_a, tree_b = height3_pair()
        res = nested_exact(tree_a, tree_b, 1.0)
        paths_a = tree_a.leaf_paths()
        paths_b = tree_b.leaf_paths()
        child_index_a = {c: k for n in tree_a.nodes for k, c in enumerate(tree_a.children(n.id))}
        child_index_b = {c: k for n in tree_b.nodes for k, c in enumerate(tree_b.children(n.id))}
        for ia, pa in enumerate(paths_a):
            for jb, pb in enumerate(paths_b):
                w = 1.0
                for t in range(tree_a.height):
                    sol = res.stage_tables[t][(pa[t], pb[t])]
                    w *= sol.plan[child_index_a[pa[t + 1]], child_index_b[pb[t + 1]]]
                assert res.composed_plan.matrix[ia, jb] == pytest.approx(w, abs=1e-10)

    def test_one_stage_degeneration(self):
        tree_a, tree_b = random_tree_pair(100, max_height=1)
        assert tree_a.height == 1
        nd = nested_exact(tree_a, tree_b, 1.0).value
        assert nd == pytest.approx(wasserstein_distance(tree_a, tree_b, 1.0), abs=1e-10)

    def test_filtration_sensitivity(self):
        early, late = split_timing_pair(0.1)
        flat = wasserstein_distance(early, late, 1.0)
        nested = nested_exact(early, late, 1.0).value
        assert flat == pytest.approx(0.05, abs=1e-12)
        assert nested == pytest.approx(1.05, abs=1e-10)
        assert nested - flat == pytest.approx(1.0, abs=1e-9)

    def test_order_two(self):
        tree_a, tree_b = height3_pair()
        res = nested_exact(tree_a, tree_b, 2.0)
        flat_value, _ = flat_nested_lp(tree_a, tree_b, 2.0)
        assert res.value == pytest.approx(flat_value, abs=1e-8)
        assert res.value == pytest.approx(res.value_pow**0.5, rel=1e-12)

    def test_height_mismatch(self):
        early, _ = split_timing_pair()
        tree_a, _ = height3_pair()
        with pytest.raises(ValueError, match="height"):
            nested_exact(early, tree_a, 1.0)

    def test_height_zero_rejected(self):
        single = path_tree([1.0])
        with pytest.raises(ValueError, match="height"):
            nested_exact(single, single, 1.0)

    def test_threads_do_not_change_results(self):
        tree_a, tree_b = height3_pair()
        serial = nested_exact(tree_a, tree_b, 1.0, threads=1)
        parallel = nested_exact(tree_a, tree_b, 1.0, threads=4)
        assert serial.value == parallel.value
        assert np.array_equal(serial.composed_plan.matrix, parallel.composed_plan.matrix)


class TestFlatNestedLp:
    def test_split_timing_pair(self):
        early, late = split_timing_pair(0.1)
        value, plan = flat_nested_lp(early, late, 1.0)
        assert value == pytest.approx(1.05, abs=1e-10)
        plan.validate(atol=1e-9)

    def test_identical_trees(self):
        tree, _ = height3_pair()
        value, _ = flat_nested_lp(tree, tree, 1.0)
        assert value == pytest.approx(0.0, abs=1e-10)

    def test_tower_property_on_random_pairs(self):
        for seed in range(15):
            tree_a, tree_b = random_tree_pair(seed)
            recursive = nested_exact(tree_a, tree_b, 1.0).value
            flat_value, flat_plan = flat_nested_lp(tree_a, tree_b, 1.0)
            assert recursive == pytest.approx(flat_value, abs=1e-8), f"seed {seed}"
            assert conditional_marginal_residuals(
                tree_a, tree_b, flat_plan.matrix
            ) <= 1e-8

    def test_size_cap(self):
        tree_a, tree_b = height3_pair()
        with pytest.raises(ValueError, match="too large"):
            flat_nested_lp(tree_a, tree_b, 1.0, max_cells=10)


class TestNestedSinkhorn:
    def test_path_trees_forced_plans(self):
        a = path_tree([0.0, 1.0, 3.0])
        b = path_tree([0.0, 2.0, 2.5])
        expected = abs(0.0 - 0.0) + abs(1.0 - 2.0) + abs(3.0 - 2.5)
        for lam in (0.5, 5.0, 50.0):
            res = nested_sinkhorn(a, b, 1.0, lam, tol=1e-12)
            assert res.converged
            assert res.value == pytest.approx(expected, abs=1e-12)
            assert res.value_with_entropy == pytest.approx(expected, abs=1e-12)
            assert res.total_entropy == pytest.approx(0.0, abs=1e-12)
            assert res.composed_plan.matrix == pytest.approx(np.array([[1.0]]), abs=1e-12)

    def test_height3_pair_gap_within_branching_bound(self):
        tree_a, tree_b = height3_pair()
        exact_value, _ = flat_nested_lp(tree_a, tree_b, 1.0)
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=30.0, tol=1e-12, max_iter=200_000)
        gap = res.value - exact_value
        assert -1e-8 <= gap <= 3.0 * (math.log(2) + math.log(3)) / 30.0

    def test_split_timing_pair_large_lambda(self):
        early, late = split_timing_pair(0.1)
        res = nested_sinkhorn(early, late, 1.0, lam=200.0, tol=1e-12)
        assert res.converged
        assert abs(res.value - 1.05) <= 1e-3

    def test_entropic_value_below_cost_value(self):
        tree_a, tree_b = height3_pair()
        for lam in (0.5, 2.0, 20.0):
            res = nested_sinkhorn(tree_a, tree_b, 1.0, lam, tol=1e-12)
            assert res.value_with_entropy <= res.value + 1e-10
            # root entropic value decomposes into composed cost minus the
            # composed entropy over lambda
            assert res.value_with_entropy_pow == pytest.approx(
                res.value_pow - res.total_entropy / lam, abs=1e-7
            )

    def test_composed_marginals(self):
        tree_a, tree_b = height3_pair()
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=5.0, tol=1e-9)
        res.composed_plan.validate(atol=1e-8)

    def test_one_stage_degeneration(self):
        tree_a, tree_b = random_tree_pair(200, max_height=1)
        p = np.array([t.prob for t in trajectories(tree_a)])
        q = np.array([t.prob for t in trajectories(tree_b)])
        flat = sinkhorn_auto(p, q, cost_matrix(tree_a, tree_b, 1.0), 3.0, tol=1e-9)
        res = nested_sinkhorn(tree_a, tree_b, 1.0, 3.0, tol=1e-9)
        assert res.value == pytest.approx(flat.d_s, abs=1e-10)
        assert res.value_with_entropy == pytest.approx(flat.de_s, abs=1e-10)

    def test_signed_root_for_negative_entropic_value(self):
        # identical trees at order 2 with weak regularization: the cost term
        # vanishes and the entropy drives the objective negative, so the
        # reported root keeps the sign
        tree, _ = height3_pair()
        res = nested_sinkhorn(tree, tree, 2.0, lam=1.0, tol=1e-11)
        assert res.value_with_entropy_pow < 0.0
        assert res.value_with_entropy == pytest.approx(
            -((-res.value_with_entropy_pow) ** 0.5), rel=1e-12
        )
        assert res.value_with_entropy < 0.0 <= res.value

    def test_unconverged_flagged(self):
        tree_a, tree_b = height3_pair()
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=30.0, tol=1e-12, max_iter=2)
        assert not res.converged

    def test_invalid_lambda(self):
        tree_a, tree_b = height3_pair()
        with pytest.raises(ValueError, match="positive"):
            nested_sinkhorn(tree_a, tree_b, 1.0, lam=0.0)


class TestEntropicEquivalence:
    def test_height3_pair(self):
        tree_a, tree_b = height3_pair()
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=5.0, tol=1e-12)
        report = verify_entropic_equivalence(tree_a, tree_b, 1.0, 5.0, res)
        assert report.passed
        assert report.max_marginal_residual <= 1e-7
        assert report.objective_gap <= 1e-7
        assert report.max_gibbs_residual <= 1e-6

    def test_path_trees_trivial(self):
        a = path_tree([0.0, 1.0])
        b = path_tree([0.5, 0.5])
        res = nested_sinkhorn(a, b, 1.0, lam=2.0, tol=1e-12)
        report = verify_entropic_equivalence(a, b, 1.0, 2.0, res)
        assert report.passed

    def test_split_timing_pair_small_lambda(self):
        # entropy dominates: the flat entropic objective may go negative
        early, late = split_timing_pair(0.1)
        res = nested_sinkhorn(early, late, 1.0, lam=1.0, tol=1e-12)
        report = verify_entropic_equivalence(early, late, 1.0, 1.0, res)
        assert report.passed

    def test_rejects_exact_result(self):
        tree_a, tree_b = height3_pair()
        res = nested_exact(tree_a, tree_b, 1.0)
        with pytest.raises(ValueError, match="regularized"):
            verify_entropic_equivalence(tree_a, tree_b, 1.0, 5.0, res)

    def test_rejects_unconverged(self):
        tree_a, tree_b = height3_pair()
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=30.0, tol=1e-12, max_iter=2)
        with pytest.raises(ValueError, match="converged"):
            verify_entropic_equivalence(tree_a, tree_b, 1.0, 30.0, res)


class TestBoundReport:
    def test_height3_pair_at_lambda_20(self):
        tree_a, tree_b = height3_pair()
        report = nested_bound_report(tree_a, tree_b, 1.0, 20.0)
        assert report.all_passed, [c for c in report.checks if not c.passed]
        assert report.max_branching_a == 2
        assert report.max_branching_b == 3
        assert report.gap_bound == pytest.approx(3.0 * math.log(6.0) / 20.0, rel=1e-12)
        assert report.gap_bound == pytest.approx(0.2687639204, abs=1e-9)
        assert report.nd_s_pow - report.nd_w_pow <= report.gap_bound + 1e-8
        assert report.nd_w_pow - report.nde_s_pow <= report.gap_bound + 1e-8

    def test_identical_path_trees(self):
        tree = path_tree([0.0, 1.0, 2.0])
        report = nested_bound_report(tree, tree, 1.0, 4.0)
        assert report.all_passed
        assert report.nd_s_pow == pytest.approx(0.0, abs=1e-12)
        assert report.nde_s_pow == pytest.approx(0.0, abs=1e-12)
        assert report.nd_w_pow == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("lam", [1.0, 10.0])
    def test_random_binary_pairs(self, lam):
        for seed in (301, 302, 303):
            tree_a = generate_random_tree([1, 2, 2], 2 * seed + 1)
            tree_b = generate_random_tree([1, 2, 2], 2 * seed + 2)
            # flat oracle confirms the exact value used inside the report
            flat_value, _ = flat_nested_lp(tree_a, tree_b, 1.0)
            report = nested_bound_report(tree_a, tree_b, 1.0, lam)
            assert report.nd_w == pytest.approx(flat_value, abs=1e-8)
            assert report.all_passed, [c for c in report.checks if not c.passed]


class TestMartingaleCheck:
    def test_path_trees_constant_process(self):
        a = path_tree([0.0, 1.0, 2.0])
        b = path_tree([0.0, 0.5, 1.5])
        res = nested_sinkhorn(a, b, 1.0, lam=3.0, tol=1e-12)
        report = martingale_check(res)
        assert report.passed
        assert report.max_martingale_residual <= 1e-12

    @pytest.mark.parametrize("lam", [2.0, 10.0])
    def test_canonical_pairs(self, lam):
        for pair in (split_timing_pair(0.1), height3_pair()):
            tree_a, tree_b = pair
            res = nested_sinkhorn(tree_a, tree_b, 1.0, lam, tol=1e-12)
            report = martingale_check(res)
            assert report.passed
            assert report.max_martingale_residual <= 1e-6
            assert report.max_projection_residual <= 1e-8

    def test_rejects_exact_result(self):
        tree_a, tree_b = height3_pair()
        with pytest.raises(ValueError, match="regularized"):
            martingale_check(nested_exact(tree_a, tree_b, 1.0))

    def test_rejects_unconverged(self):
        tree_a, tree_b = height3_pair()
        res = nested_sinkhorn(tree_a, tree_b, 1.0, lam=30.0, tol=1e-12, max_iter=2)
        with pytest.raises(ValueError, match="converged"):
            martingale_check(res)


class TestLambdaSweep:
    def test_height3_pair_grid_shape(self):
        tree_a, tree_b = height3_pair()
        grid = [0.5] + [float(k) for k in range(1, 31)]
        rows = lambda_sweep(tree_a, tree_b, 1.0, grid, tol=1e-11)
        assert len(rows) == 31
        assert all(row.converged for row in rows)
        nd_w = rows[0].nd_w
        assert all(row.nd_w == nd_w for row in rows)
        gaps_s = [abs(row.nd_s - nd_w) for row in rows]
        gaps_e = [abs(nd_w - row.nde_s) for row in rows]
        for earlier, later in zip(gaps_s, gaps_s[1:]):
            assert later <= earlier + 1e-8
        for earlier, later in zip(gaps_e, gaps_e[1:]):
            assert later <= earlier + 1e-8

    def test_single_lambda(self):
        early, late = split_timing_pair(0.1)
        rows = lambda_sweep(early, late, 1.0, [3.0], tol=1e-10)
        assert len(rows) == 1
        assert rows[0].lam == 3.0

    def test_invalid_grid(self):
        early, late = split_timing_pair(0.1)
        with pytest.raises(ValueError, match="positive"):
            lambda_sweep(early, late, 1.0, [1.0, -2.0])
        with pytest.raises(ValueError, match="non-empty"):
            lambda_sweep(early, late, 1.0, [])
