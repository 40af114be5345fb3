import itertools
import os
import time
import unittest
from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase

from microgrid.catalog import catalog_collector, catalog_fluid
from microgrid.exceptions import InfeasibleModel
from microgrid.milp import SolveStatus, max_violation, solve_milp
from microgrid.models import DegradationMode
from microgrid.sorc import build_sorc_model, grid_only_cost, mass_flow_report, savings, solar_heat, solve_sorc
from microgrid.weather import demand_profile, weekly_weather

from .factories import linprog_solve, make_scenario, random_scenario, storage_scenario

TOL = 1e-6


def best_charging_pattern(model, variables):
    """Optimum over every charge/discharge pattern, each pattern an LP."""
    best = None
    for pattern in itertools.product((0.0, 1.0), repeat=len(variables.charging)):
        lower, upper = model.lower.copy(), model.upper.copy()
        for y_in, y_out, value in zip(variables.charging, variables.discharging, pattern):
            lower[y_in] = upper[y_in] = value
            lower[y_out] = upper[y_out] = 1.0 - value
        objective = linprog_solve(model, lower, upper)
        if objective is not None and (best is None or objective < best):
            best = objective
    return best


class SorcScheduleTests(SimpleTestCase):
    def test_no_sun_no_demand_costs_nothing(self):
        schedule = solve_sorc(make_scenario(demand=0.0, irradiation=0.0))
        self.assertAlmostEqual(schedule.total_cost, 0.0, delta=TOL)
        self.assertTrue(np.allclose(schedule.series("production_kw"), 0.0))
        self.assertTrue(np.allclose(schedule.e_in, 0.0))

    def test_demand_without_sun_is_bought(self):
        schedule = solve_sorc(make_scenario(horizon=1, demand=1.0, irradiation=0.0, price_buy=0.2, price_sell=0.0))
        self.assertAlmostEqual(schedule.total_cost, 0.2, delta=TOL)
        self.assertAlmostEqual(schedule.e_in[0], 1.0, delta=TOL)
        self.assertAlmostEqual(schedule.grid_cost, 0.2, delta=TOL)

    def test_solar_heat_follows_collector(self):
        scenario = make_scenario(horizon=1, irradiation=0.5)
        self.assertAlmostEqual(solar_heat(scenario)[0], 4.35)
        schedule = solve_sorc(scenario)
        self.assertAlmostEqual(schedule.steps[0].solar_thermal, 4.35, delta=TOL)

    def test_battery_shifts_solar_output(self):
        schedule = solve_sorc(storage_scenario())
        self.assertAlmostEqual(schedule.steps[0].charge, 1.0, delta=TOL)
        self.assertAlmostEqual(schedule.steps[1].discharge, 1.0, delta=TOL)
        self.assertAlmostEqual(float(schedule.e_in.sum()), 0.0, delta=TOL)
        self.assertAlmostEqual(schedule.total_cost, 0.03, delta=TOL)
        self.assertAlmostEqual(schedule.storage_cost, 0.02, delta=TOL)

    def test_literal_degradation_gives_the_same_storage_plan(self):
        schedule = solve_sorc(storage_scenario(), degradation=DegradationMode.LITERAL)
        self.assertEqual(schedule.degradation_mode, DegradationMode.LITERAL)
        self.assertAlmostEqual(schedule.total_cost, 0.03, delta=TOL)

    def test_capacity_fades_with_throughput(self):
        schedule = solve_sorc(storage_scenario())
        capacity = schedule.series("cap_available")
        self.assertAlmostEqual(capacity[0], 5.0 - 5.0 * 2e-4, delta=TOL)
        self.assertLess(capacity[1], capacity[0])

    def test_unreachable_minimum_production_is_infeasible(self):
        with self.assertRaises(InfeasibleModel) as caught:
            solve_sorc(make_scenario(horizon=2, irradiation=0.0, x_min=1.0))
        self.assertIn("heat_exchanger_1", caught.exception.rows)
        self.assertIn("x_1", caught.exception.rows)


class SorcInvariantTests(SimpleTestCase):
    def test_schedules_satisfy_the_model(self):
        rng = np.random.default_rng(2024)
        for k in range(50):
            scenario = random_scenario(rng, scenario_id=f"r{k}", horizon=int(rng.integers(2, 6)))
            model, variables = build_sorc_model(scenario)
            solution = solve_milp(model)
            self.assertEqual(solution.status, SolveStatus.OPTIMAL)
            self.assertLessEqual(max_violation(model, solution.values), TOL)

            schedule = solve_sorc(scenario)
            charge, discharge = schedule.series("charge"), schedule.series("discharge")
            self.assertTrue(np.all(charge * discharge == 0.0))
            self.assertTrue(np.all(schedule.e_in * schedule.e_out == 0.0))
            self.assertTrue(np.all(schedule.series("hx_thermal") <= scenario.orc.eta_hx * schedule.series("solar_thermal") + TOL))
            self.assertTrue(np.all(np.diff(schedule.series("cap_available")) <= TOL))
            self.assertAlmostEqual(schedule.total_cost, schedule.objective, delta=1e-5)

    def test_matches_enumeration_of_charging_patterns(self):
        rng = np.random.default_rng(99)
        for k in range(50):
            scenario = random_scenario(rng, scenario_id=f"o{k}", horizon=int(rng.integers(2, 5)))
            model, variables = build_sorc_model(scenario)
            solution = solve_milp(model)
            expected = best_charging_pattern(model, variables)
            self.assertAlmostEqual(solution.objective, expected, delta=1e-6 * max(1.0, abs(expected)))


class SorcReportTests(SimpleTestCase):
    def test_mass_flow_of_ethanol(self):
        schedule = SimpleNamespace(steps=[SimpleNamespace(section_area=0.1), SimpleNamespace(section_area=0.05)])
        report = mass_flow_report(schedule, catalog_fluid("Ethanol"))
        self.assertEqual(report.fluid, "Ethanol")
        self.assertAlmostEqual(report.peak, 0.0506200962, places=9)
        self.assertAlmostEqual(report.per_step[1], 0.0253100481, places=9)

    def test_grid_only_cost_and_savings(self):
        scenario = make_scenario(horizon=2, demand=[1.0, 3.0], price_buy=[0.5, 0.25])
        self.assertAlmostEqual(grid_only_cost(scenario), 1.25)
        self.assertAlmostEqual(savings(1.25, 1.0), 0.2)
        self.assertEqual(savings(0.0, 1.0), 0.0)


@unittest.skipUnless(os.environ.get("MICROGRID_SLOW_TESTS") == "1", "set MICROGRID_SLOW_TESTS=1 to run")
class WeeklyHorizonTests(SimpleTestCase):
    def test_july_week_in_bologna_solves_within_ten_seconds(self):
        sun = weekly_weather("Bologna", "July")
        scenario = make_scenario(
            scenario_id="week",
            horizon=168,
            demand=demand_profile("household", steps=168, peak_kw=1.5),
            irradiation=sun.values,
            collector=catalog_collector("ETC", 10.0),
        )
        model, variables = build_sorc_model(scenario)
        self.assertEqual(len(model.binaries), 336)

        started = time.perf_counter()
        solution = solve_milp(model)
        elapsed = time.perf_counter() - started
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertLessEqual(solution.gap, 1e-6)
        self.assertLessEqual(elapsed, 10.0)
        self.assertLessEqual(max_violation(model, solution.values), TOL)

        schedule = solve_sorc(scenario)
        self.assertAlmostEqual(schedule.objective, solution.objective, delta=1e-6 * max(1.0, abs(solution.objective)))
