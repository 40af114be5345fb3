import math
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from microgrid.milp import (
    ModelBuilder,
    ModelError,
    Sense,
    SolverLimits,
    SolveStatus,
    VarKind,
    irreducible_rows,
    max_violation,
    solve_lp,
    solve_milp,
)
from microgrid.milp.branch_and_bound import _Search
from microgrid.milp.simplex import LpEngine

from .factories import enumerate_binaries, linprog_solve


def random_lp(rng, n_vars=6, n_rows=5, binaries=0):
    """A bounded, feasible model: the origin satisfies every row."""
    builder = ModelBuilder("random")
    columns = []
    for j in range(n_vars):
        if j < binaries:
            columns.append(builder.add_var(f"y{j}", 0, 1, kind=VarKind.BINARY, cost=rng.uniform(-3, 3)))
        else:
            columns.append(builder.add_var(f"x{j}", 0, rng.uniform(1, 10), cost=rng.uniform(-3, 3)))
    for i in range(n_rows):
        terms = [(j, rng.uniform(-2, 4)) for j in columns if rng.random() < 0.7]
        sense = rng.choice([Sense.LE, Sense.GE, Sense.EQ], p=[0.6, 0.2, 0.2])
        rhs = {Sense.LE: rng.uniform(1, 10), Sense.GE: -rng.uniform(0, 5), Sense.EQ: 0.0}[sense]
        builder.add_constraint(f"r{i}", terms, sense, rhs)
    return builder.build()


class ModelBuilderTests(SimpleTestCase):
    def test_duplicate_terms_are_merged_and_zeros_dropped(self):
        builder = ModelBuilder("m")
        x = builder.add_var("x")
        y = builder.add_var("y")
        builder.add_constraint("c", [(x, 1.0), (x, 2.0), (y, 1.0), (y, -1.0)], Sense.LE, 4)
        model = builder.build()
        self.assertEqual(model.constraints[0].terms, ((x, 3.0),))

    def test_duplicate_names_are_rejected(self):
        builder = ModelBuilder("m")
        builder.add_var("x")
        with self.assertRaises(ModelError):
            builder.add_var("x")
        builder.add_constraint("c", [], Sense.LE, 1)
        with self.assertRaises(ModelError):
            builder.add_constraint("c", [], Sense.LE, 1)

    def test_binary_bounds_must_stay_in_unit_interval(self):
        builder = ModelBuilder("m")
        builder.add_var("y", 0, 2, kind=VarKind.BINARY)
        with self.assertRaises(ModelError):
            builder.build()

    def test_inverted_bounds_are_rejected(self):
        builder = ModelBuilder("m")
        builder.add_var("x", 3, 1)
        with self.assertRaises(ModelError):
            builder.build()


class SimplexTests(SimpleTestCase):
    def test_small_lp(self):
        # max x + y  s.t. x + 2y <= 4, 3x + y <= 6  ->  x = 1.6, y = 1.2
        builder = ModelBuilder("small")
        x = builder.add_var("x", cost=-1)
        y = builder.add_var("y", cost=-1)
        builder.add_constraint("a", [(x, 1), (y, 2)], Sense.LE, 4)
        builder.add_constraint("b", [(x, 3), (y, 1)], Sense.LE, 6)
        model = builder.build()
        solution = solve_lp(model)
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, -2.8, places=9)
        self.assertAlmostEqual(solution.value_of(model, "x"), 1.6, places=9)
        self.assertAlmostEqual(solution.value_of(model, "y"), 1.2, places=9)

    def test_matches_highs_on_random_lps(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            model = random_lp(rng, n_vars=int(rng.integers(2, 9)), n_rows=int(rng.integers(1, 8)))
            solution = solve_lp(model)
            expected = linprog_solve(model)
            self.assertEqual(solution.status, SolveStatus.OPTIMAL)
            self.assertAlmostEqual(solution.objective, expected, delta=1e-6 * max(1.0, abs(expected)))
            self.assertLessEqual(max_violation(model, solution.values), 1e-6)

    def test_free_and_negative_bounds(self):
        builder = ModelBuilder("free")
        x = builder.add_var("x", -math.inf, math.inf, cost=1)
        y = builder.add_var("y", -5, -1, cost=1)
        builder.add_constraint("floor", [(x, 1), (y, -1)], Sense.GE, 2)
        model = builder.build()
        solution = solve_lp(model)
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(solution.value_of(model, "y"), -5.0)
        self.assertAlmostEqual(solution.value_of(model, "x"), -3.0)
        self.assertAlmostEqual(solution.objective, -8.0)

    def test_infeasible_lp_reports_farkas_multipliers(self):
        builder = ModelBuilder("infeasible")
        x = builder.add_var("x", 0, 10)
        builder.add_constraint("low", [(x, 1)], Sense.GE, 5)
        builder.add_constraint("high", [(x, 1)], Sense.LE, 3)
        builder.add_constraint("spare", [(x, 1)], Sense.LE, 100)
        solution = solve_lp(builder.build())
        self.assertEqual(solution.status, SolveStatus.INFEASIBLE)
        self.assertIsNotNone(solution.farkas)
        self.assertTrue(np.any(np.abs(solution.farkas) > 0))

    def test_unbounded_lp_returns_a_ray(self):
        builder = ModelBuilder("unbounded")
        x = builder.add_var("x", cost=-1)
        y = builder.add_var("y")
        builder.add_constraint("c", [(x, 1), (y, -1)], Sense.LE, 1)
        model = builder.build()
        solution = solve_lp(model)
        self.assertEqual(solution.status, SolveStatus.UNBOUNDED)
        ray = solution.ray
        self.assertIsNotNone(ray)
        self.assertLess(model.cost @ ray, 0)
        self.assertLessEqual(ray[x] - ray[y], 1e-9)

    def test_empty_row_with_violated_rhs_is_infeasible(self):
        builder = ModelBuilder("empty")
        builder.add_var("x", cost=1)
        builder.add_constraint("nothing", [], Sense.GE, 1)
        self.assertEqual(solve_lp(builder.build()).status, SolveStatus.INFEASIBLE)

    def test_model_without_rows(self):
        builder = ModelBuilder("box")
        builder.add_var("x", 1, 4, cost=2)
        builder.add_var("y", -3, 2, cost=-1)
        solution = solve_lp(builder.build())
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, 2 * 1 - 2)

    def test_warm_start_after_bound_change(self):
        rng = np.random.default_rng(11)
        model = random_lp(rng, n_vars=8, n_rows=6)
        engine = LpEngine(model)
        first = engine.solve()
        upper = model.upper.copy()
        upper[0] = 0.0
        warm = engine.solve(model.lower, upper, first.basis)
        cold = LpEngine(model).solve(model.lower, upper)
        self.assertEqual(warm.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-7)
        self.assertAlmostEqual(warm.objective, linprog_solve(model, model.lower, upper), delta=1e-6)

    @override_settings(MILP_SOLVER={**settings.MILP_SOLVER, "REFACTOR_EVERY": 2})
    def test_frequent_refactorisation_gives_the_same_optimum(self):
        rng = np.random.default_rng(3)
        model = random_lp(rng, n_vars=10, n_rows=8)
        self.assertAlmostEqual(solve_lp(model).objective, linprog_solve(model), delta=1e-6)


class BranchAndBoundTests(SimpleTestCase):
    def knapsack(self):
        builder = ModelBuilder("knapsack")
        values, weights = [10, 13, 7, 8], [5, 7, 4, 3]
        items = [builder.add_var(f"y{k}", 0, 1, kind=VarKind.BINARY, cost=-v) for k, v in enumerate(values)]
        builder.add_constraint("weight", list(zip(items, weights)), Sense.LE, 12)
        return builder.build()

    def test_knapsack(self):
        model = self.knapsack()
        solution = solve_milp(model)
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, -25.0)
        self.assertEqual(sorted(np.flatnonzero(solution.values > 0.5).tolist()), [0, 2, 3])

    def test_reported_binaries_are_exactly_integral(self):
        solution = solve_milp(self.knapsack())
        binaries = solution.values[self.knapsack().binaries]
        self.assertTrue(np.all((binaries == 0.0) | (binaries == 1.0)))

    def test_matches_enumeration_on_random_models(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            model = random_lp(rng, n_vars=6, n_rows=4, binaries=3)
            solution = solve_milp(model)
            expected = enumerate_binaries(model)
            self.assertEqual(solution.status, SolveStatus.OPTIMAL)
            self.assertAlmostEqual(solution.objective, expected, delta=1e-6 * max(1.0, abs(expected)))
            self.assertLessEqual(max_violation(model, solution.values), 1e-6)

    def test_integer_infeasible_model(self):
        builder = ModelBuilder("parity")
        a = builder.add_var("a", 0, 1, kind=VarKind.BINARY)
        b = builder.add_var("b", 0, 1, kind=VarKind.BINARY)
        builder.add_constraint("half", [(a, 1), (b, 1)], Sense.EQ, 1.5)
        self.assertEqual(solve_milp(builder.build()).status, SolveStatus.INFEASIBLE)

    def test_node_limit_returns_gap_limit(self):
        rng = np.random.default_rng(5)
        builder = ModelBuilder("hard")
        weights = rng.uniform(1, 10, 14)
        items = [builder.add_var(f"y{k}", 0, 1, kind=VarKind.BINARY, cost=-w - rng.uniform(0, 1)) for k, w in enumerate(weights)]
        builder.add_constraint("weight", list(zip(items, weights)), Sense.LE, weights.sum() / 2)
        solution = solve_milp(builder.build(), SolverLimits.from_settings(max_nodes=1))
        self.assertEqual(solution.status, SolveStatus.GAP_LIMIT)
        self.assertEqual(solution.nodes, 1)

    def test_limits_from_settings_take_overrides(self):
        limits = SolverLimits.from_settings(max_nodes=7, rel_gap=None)
        self.assertEqual(limits.max_nodes, 7)
        self.assertEqual(limits.rel_gap, 1e-6)

    def test_integral_relaxation_explores_one_node(self):
        builder = ModelBuilder("integral")
        x = builder.add_var("x", 0, 2, cost=-1)
        y = builder.add_var("y", 0, 1, kind=VarKind.BINARY, cost=-1)
        builder.add_constraint("cap", [(x, 1), (y, 1)], Sense.LE, 3)
        solution = solve_milp(builder.build())
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertEqual(solution.nodes, 1)
        self.assertAlmostEqual(solution.objective, -3.0)

    def test_scaled_objective_keeps_the_argmin(self):
        rng = np.random.default_rng(8)
        models = [self.knapsack()] + [random_lp(rng, n_vars=6, n_rows=4, binaries=3) for _ in range(10)]
        for model in models:
            base = solve_milp(model)
            scaled = solve_milp(model.scaled_objective(7.0))
            self.assertEqual(scaled.status, base.status)
            self.assertAlmostEqual(scaled.objective, 7.0 * base.objective, delta=1e-6 * max(1.0, abs(7.0 * base.objective)))
            np.testing.assert_allclose(scaled.values[model.binaries], base.values[model.binaries])
            np.testing.assert_allclose(scaled.values, base.values, atol=1e-6)

    def test_bound_never_exceeds_the_incumbent(self):
        rng = np.random.default_rng(13)
        for max_nodes in (1, 3, 100000):
            for _ in range(10):
                model = random_lp(rng, n_vars=7, n_rows=4, binaries=4)
                solution = solve_milp(model, SolverLimits.from_settings(max_nodes=max_nodes))
                self.assertLessEqual(solution.bound, solution.objective + 1e-9)

    def test_bound_under_gap_limit_stays_below_incumbent(self):
        rng = np.random.default_rng(5)
        builder = ModelBuilder("hard")
        weights = rng.uniform(1, 10, 14)
        items = [builder.add_var(f"y{k}", 0, 1, kind=VarKind.BINARY, cost=-w - rng.uniform(0, 1)) for k, w in enumerate(weights)]
        builder.add_constraint("weight", list(zip(items, weights)), Sense.LE, weights.sum() / 2)
        model = builder.build()
        for max_nodes in (1, 5, 20):
            solution = solve_milp(model, SolverLimits.from_settings(max_nodes=max_nodes))
            self.assertLessEqual(solution.bound, solution.objective + 1e-9)
            if solution.status == SolveStatus.GAP_LIMIT and solution.values is not None:
                self.assertGreaterEqual(solution.gap, 0.0)
                self.assertAlmostEqual(solution.objective, model.evaluate(solution.values))

    def test_repeated_solves_are_identical(self):
        rng = np.random.default_rng(34)
        for model in [self.knapsack()] + [random_lp(rng, n_vars=7, n_rows=5, binaries=4) for _ in range(5)]:
            first, second = solve_milp(model), solve_milp(model)
            self.assertEqual(first.status, second.status)
            self.assertEqual(first.objective, second.objective)
            self.assertEqual(first.nodes, second.nodes)
            self.assertTrue(np.array_equal(first.values, second.values))

    def rounding_search(self):
        builder = ModelBuilder("rounding")
        x = builder.add_var("x", 0, 1, cost=1)
        y = builder.add_var("y", 0, 1, kind=VarKind.BINARY, cost=2)
        builder.add_constraint("link", [(x, 1), (y, -1000)], Sense.LE, 0)
        model = builder.build()
        return model, _Search(model, SolverLimits.from_settings())

    def test_rounded_candidate_violating_rows_is_rejected(self):
        model, search = self.rounding_search()
        failed = SimpleNamespace(status=SolveStatus.INFEASIBLE, iterations=0)
        candidate = SimpleNamespace(values=np.array([5e-4, 5e-7]), objective=5e-4 + 1e-6, basis=None)
        with patch.object(search.engine, "solve", return_value=failed):
            search.accept(candidate, model.lower.copy(), model.upper.copy())
        self.assertIsNone(search.incumbent)
        self.assertEqual(search.incumbent_objective, np.inf)

    def test_rounded_candidate_objective_is_recomputed(self):
        model, search = self.rounding_search()
        failed = SimpleNamespace(status=SolveStatus.INFEASIBLE, iterations=0)
        candidate = SimpleNamespace(values=np.array([0.0, 5e-7]), objective=1e-6, basis=None)
        with patch.object(search.engine, "solve", return_value=failed):
            search.accept(candidate, model.lower.copy(), model.upper.copy())
        self.assertEqual(search.incumbent[1], 0.0)
        self.assertEqual(search.incumbent_objective, 0.0)
        self.assertLessEqual(max_violation(model, search.incumbent), 1e-7)


class IrreducibleRowsTests(SimpleTestCase):
    def test_lp_conflict_is_isolated(self):
        builder = ModelBuilder("conflict")
        x = builder.add_var("x", 0, 10)
        y = builder.add_var("y", 0, 10)
        builder.add_constraint("unrelated", [(y, 1)], Sense.LE, 8)
        builder.add_constraint("low", [(x, 1)], Sense.GE, 5)
        builder.add_constraint("sum", [(x, 1), (y, 1)], Sense.LE, 20)
        builder.add_constraint("high", [(x, 1)], Sense.LE, 3)
        self.assertEqual(irreducible_rows(builder.build()), ["low", "high"])

    def test_integer_conflict_uses_milp_tests(self):
        builder = ModelBuilder("parity")
        a = builder.add_var("a", 0, 1, kind=VarKind.BINARY)
        b = builder.add_var("b", 0, 1, kind=VarKind.BINARY)
        builder.add_constraint("free", [(a, 1)], Sense.LE, 1)
        builder.add_constraint("half", [(a, 1), (b, 1)], Sense.EQ, 1.5)
        self.assertEqual(irreducible_rows(builder.build()), ["half"])

    def test_feasible_model_has_no_conflict(self):
        builder = ModelBuilder("fine")
        x = builder.add_var("x", 0, 1)
        builder.add_constraint("c", [(x, 1)], Sense.LE, 1)
        self.assertEqual(irreducible_rows(builder.build()), [])
