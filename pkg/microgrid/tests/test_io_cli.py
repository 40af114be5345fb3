import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.conf import settings
from django.test import SimpleTestCase

from microgrid.cli import cli_main
from microgrid.exceptions import ExportError, InfeasibleModel, PipelineError, ScenarioFileError, SolverLimitReached
from microgrid.io import ResultBundle, export_results, export_sweep, load_scenario, load_sweep, write_scenario
from microgrid.management.base import exit_code
from microgrid.milp import read_mps
from microgrid.pipeline import run_pipeline
from microgrid.sorc import build_sorc_model, solve_sorc
from microgrid.sweeps import SweepAxis, SweepSpec, run_sweep

from .factories import make_scenario, storage_scenario, uniform_network


def scenario_payload(**changes):
    payload = {
        "id": "p1",
        "time": {"horizon": 1},
        "fluid": {"catalog": "R134a"},
        "collector": {"technology": "ETC", "area": 10},
        "orc": {"eta_cycle": 0.15, "eta_hx": 0.9, "x_max": 2, "z_max": 2},
        "battery": {"eta_round": 0.9, "b_max": 5, "fade": 0.2, "throughput": 1000, "cost_cycle": 0.001},
        "tariff": {"g_min": -10, "g_max": 10, "price_buy": 0.25, "price_sell": 0.05},
        "demand": [1.0],
        "irradiation": [0.5],
        "production_cost": 0.01,
    }
    payload.update(changes)
    return payload


class TempDirMixin:
    def setUp(self):
        super().setUp()
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def write(self, name, content):
        path = self.tmp / name
        path.write_text(content if isinstance(content, str) else json.dumps(content), encoding="utf-8")
        return path

    def document(self, name="scenario.json", **changes):
        return self.write(name, {"version": 1, "scenario": scenario_payload(**changes)})


class LoadScenarioTests(TempDirMixin, SimpleTestCase):
    def test_minimal_document(self):
        document = load_scenario(self.document())
        scenario = document.scenario
        self.assertEqual(scenario.id, "p1")
        self.assertEqual(scenario.tariff.price_buy, (0.25,))
        self.assertEqual(scenario.fluid.name, "R134a")
        self.assertEqual(scenario.collector.efficiency, 0.87)
        self.assertEqual(document.currency, settings.MICROGRID["CURRENCY_LABEL"])
        self.assertEqual(document.trade_network().participants, ("p1",))

    def test_series_from_csv_sidecar(self):
        self.write("profile.csv", "step,demand,sun\n1,0.5,0.2\n2,0.7,0.4\n")
        path = self.document(
            time={"horizon": 2},
            demand={"csv": "profile.csv", "column": "demand"},
            irradiation={"csv": "profile.csv", "column": "sun"},
        )
        scenario = load_scenario(path).scenario
        self.assertEqual(scenario.demand, (0.5, 0.7))
        self.assertEqual(scenario.irradiation, (0.2, 0.4))

    def test_missing_sidecar(self):
        path = self.document(demand={"csv": "missing.csv", "column": "demand"})
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(path)
        self.assertIn("file not found", caught.exception.errors["missing.csv"])

    def test_sidecar_steps_must_be_in_order(self):
        self.write("profile.csv", "step,demand\n1,0.5\n3,0.7\n")
        path = self.document(time={"horizon": 2}, demand={"csv": "profile.csv", "column": "demand"}, irradiation=0.0)
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(path)
        self.assertIn("profile.csv:3", caught.exception.errors)

    def test_sidecar_row_count_must_match_the_horizon(self):
        self.write("profile.csv", "step,demand\n1,0.5\n")
        path = self.document(time={"horizon": 2}, demand={"csv": "profile.csv", "column": "demand"}, irradiation=0.0)
        with self.assertRaisesRegex(ScenarioFileError, "has 1 rows, expected 2"):
            load_scenario(path)

    def test_unsupported_version(self):
        path = self.write("scenario.json", {"version": 2, "scenario": scenario_payload()})
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(path)
        self.assertIn("unsupported version", caught.exception.errors["/version"])

    def test_unknown_field_is_rejected(self):
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(self.document(colour="green"))
        self.assertIn("/scenario/colour", caught.exception.errors)

    def test_invariant_violations_point_into_the_document(self):
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(self.document(orc={"eta_cycle": 1.5, "eta_hx": 0.9, "x_max": 2, "z_max": 2}, demand=[1.0, 2.0]))
        self.assertIn("/scenario/orc/eta_cycle", caught.exception.errors)
        self.assertIn("/scenario/demand", caught.exception.errors)

    def test_broken_json(self):
        path = self.write("scenario.json", '{"version": 1,\n "scenario": ')
        with self.assertRaises(ScenarioFileError) as caught:
            load_scenario(path)
        self.assertIn("invalid JSON at line 2", caught.exception.errors["/"])

    def test_written_scenario_loads_back_equal(self):
        scenario = make_scenario(horizon=3, demand=[1.0, 0.5, 0.25])
        path = self.tmp / "out" / "scenario.json"
        write_scenario(path, [scenario])
        self.assertEqual(load_scenario(path).scenario, scenario)

    def test_community_document(self):
        payload = {
            "version": 1,
            "currency": "CHF",
            "scenarios": [scenario_payload(id="a"), scenario_payload(id="b", irradiation=[0.0])],
            "network": {"transmission_cost": 0.01, "f_max": None},
        }
        document = load_scenario(self.write("community.json", payload))
        network = document.trade_network()
        self.assertEqual(document.currency, "CHF")
        self.assertEqual(network.participants, ("a", "b"))
        self.assertEqual(network.arc_cost("a", "b", 1), 0.01)
        self.assertEqual(network.arc_cost("grid", "b", 1), 0.25)
        self.assertEqual(network.arc_cost("a", "grid", 1), -0.05)


class ExportTests(TempDirMixin, SimpleTestCase):
    def bundle(self, scenario):
        return ResultBundle.for_schedule(scenario, solve_sorc(scenario), currency="EUR", wall_time=0.5)

    def test_reruns_write_identical_bytes(self):
        scenario = storage_scenario()
        first = export_results(self.bundle(scenario), self.tmp / "a")
        second = export_results(ResultBundle.for_schedule(scenario, solve_sorc(scenario), currency="EUR", wall_time=9.0), self.tmp / "b")
        self.assertEqual([p.name for p in first], [p.name for p in second])
        for a, b in zip(first, second):
            self.assertEqual(a.read_bytes(), b.read_bytes(), a.name)

    def test_single_run_files(self):
        written = export_results(self.bundle(make_scenario(horizon=1)), self.tmp)
        names = [p.name for p in written]
        self.assertEqual(names[0], "schedule.csv")
        self.assertEqual(names[-2:], ["kpi.json", "manifest.json"])
        schedule = (self.tmp / "schedule.csv").read_text().splitlines()
        self.assertEqual(len(schedule), 2)
        self.assertTrue(schedule[0].startswith("step,x_kw,z_kw,g_kw"))
        self.assertEqual((self.tmp / "trades.csv").read_text(), "step,seller,buyer,kwh,cost\n")
        manifest = json.loads((self.tmp / "manifest.json").read_text())
        self.assertEqual(manifest["files"], names[:-1])
        self.assertEqual(manifest["participants"], ["p1"])
        self.assertNotIn("wall_time", json.dumps(manifest))
        kpi = json.loads((self.tmp / "kpi.json").read_text())
        self.assertEqual(kpi["currency"], "EUR")

    def test_community_files(self):
        scenarios = [make_scenario(scenario_id="sun", demand=0.0, irradiation=0.9), make_scenario(scenario_id="dark", irradiation=0.0)]
        network = uniform_network(["sun", "dark"], 3)
        result = run_pipeline(scenarios, network)
        written = export_results(ResultBundle.for_community(scenarios, network, result), self.tmp)
        names = {p.name for p in written}
        self.assertTrue({"schedule_sun.csv", "schedule_dark.csv", "community_exchange.csv", "trades.csv"} <= names)
        trades = (self.tmp / "trades.csv").read_text().splitlines()
        self.assertIn("1,sun,dark,1,0.01", trades)
        kpi = json.loads((self.tmp / "kpi.json").read_text())
        self.assertAlmostEqual(kpi["p2p_volume"], 3.0)

    def test_unwritable_target(self):
        blocker = self.write("blocker", "not a directory")
        with self.assertRaises(ExportError):
            export_results(self.bundle(make_scenario(horizon=1)), blocker / "out")

    def test_sweep_files(self):
        table = run_sweep(SweepSpec(base=make_scenario(horizon=2), axis=SweepAxis.SIZE, values=(1.0, 2.0)))
        written = export_sweep(table, self.tmp)
        self.assertEqual([p.name for p in written], ["sweep.csv", "objective_by_size.csv"])
        lines = (self.tmp / "objective_by_size.csv").read_text().splitlines()
        self.assertEqual(lines[0], "size,objective")
        self.assertTrue(lines[1].startswith("1 kW,"))

    def test_run_and_fluid_sweep_share_a_directory(self):
        scenario = make_scenario(horizon=2, irradiation=0.9)
        export_results(self.bundle(scenario), self.tmp)
        table = run_sweep(SweepSpec(base=scenario, axis=SweepAxis.FLUID, values=("Ethanol", "R134a")))
        written = export_sweep(table, self.tmp)
        self.assertEqual([p.name for p in written], ["sweep.csv", "peak_mass_flow_by_fluid.csv"])
        per_step = (self.tmp / "mass_flow_by_fluid.csv").read_text().splitlines()
        peaks = (self.tmp / "peak_mass_flow_by_fluid.csv").read_text().splitlines()
        self.assertEqual(per_step[0], "prosumer,fluid,step,m_kg_s")
        self.assertEqual(len(per_step), 3)
        self.assertEqual(peaks[0], "fluid,peak_mass_flow")
        self.assertEqual([line.split(",")[0] for line in peaks[1:]], ["Ethanol", "R134a"])


class CommandLineTests(TempDirMixin, SimpleTestCase):
    def run_cli(self, *argv):
        stdout, stderr = StringIO(), StringIO()
        code = cli_main(list(argv), stdout=stdout, stderr=stderr)
        return code, stdout.getvalue(), stderr.getvalue()

    def test_catalog(self):
        code, out, _ = self.run_cli("catalog")
        self.assertEqual(code, 0)
        self.assertIn("Cyclohexane", out)
        self.assertIn("87%", out)

    def test_usage_errors(self):
        self.assertEqual(self.run_cli()[0], 1)
        code, _, err = self.run_cli("optimise")
        self.assertEqual(code, 1)
        self.assertIn("unknown command 'optimise'", err)
        self.assertEqual(self.run_cli("solve-sorc", str(self.document()), "--colour")[0], 1)
        self.assertEqual(self.run_cli("--help")[0], 0)

    def test_missing_file_is_an_input_error(self):
        code, _, err = self.run_cli("solve-sorc", str(self.tmp / "nowhere.json"))
        self.assertEqual(code, 1)
        self.assertIn("error:", err)

    def test_solve_and_export(self):
        code, out, _ = self.run_cli("solve-sorc", str(self.document()), "--out", str(self.tmp / "result"))
        self.assertEqual(code, 0)
        self.assertIn("p1: total cost", out)
        self.assertTrue((self.tmp / "result" / "schedule.csv").exists())

    def test_infeasible_scenario(self):
        path = self.document(irradiation=[0.0], orc={"eta_cycle": 0.15, "eta_hx": 0.9, "x_min": 1, "x_max": 2, "z_max": 2})
        code, _, err = self.run_cli("solve-sorc", str(path))
        self.assertEqual(code, 2)
        self.assertIn("x_1", err)

    def test_solver_limit(self):
        with patch("microgrid.management.commands.solve_sorc.solve_sorc", side_effect=SolverLimitReached("limit reached")):
            code, _, err = self.run_cli("solve-sorc", str(self.document()), "--max-nodes", "1")
        self.assertEqual(code, 3)
        self.assertIn("limit reached", err)

    def test_exit_codes(self):
        self.assertEqual(exit_code(PipelineError("p1", InfeasibleModel(["x_1"]))), 2)
        self.assertEqual(exit_code(PipelineError("p1", SolverLimitReached("stop"))), 3)
        self.assertEqual(exit_code(ScenarioFileError({"/": "bad"})), 1)

    def test_export_mps(self):
        target = self.tmp / "model.mps"
        code, _, _ = self.run_cli("export-mps", str(self.document()), "--out", str(target))
        self.assertEqual(code, 0)
        model = read_mps(target.read_text())
        expected, _ = build_sorc_model(load_scenario(self.document()).scenario)
        self.assertEqual((model.n_vars, model.n_rows), (expected.n_vars, expected.n_rows))

    def test_export_mps_to_stdout_for_the_clearing_stage(self):
        payload = {"version": 1, "scenarios": [scenario_payload(id="a"), scenario_payload(id="b", irradiation=[0.0])]}
        code, out, _ = self.run_cli("export-mps", str(self.write("community.json", payload)), "--stage", "tet")
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("NAME tet"))

    def test_solve_community(self):
        payload = {"version": 1, "scenarios": [scenario_payload(id="a", demand=[0.0]), scenario_payload(id="b", irradiation=[0.0])]}
        code, out, _ = self.run_cli("solve-community", str(self.write("community.json", payload)), "--out", str(self.tmp / "community"))
        self.assertEqual(code, 0)
        self.assertTrue((self.tmp / "community" / "kpi.json").exists())

    def test_sweep(self):
        self.document("base.json", time={"horizon": 2}, demand=1.0, irradiation=[0.9, 0.0])
        sweep = {"version": 1, "base": "base.json", "axis": "weather", "compare_locations": True, "values": [
            {"label": "flat", "irradiation": [0.5, 0.5]},
            {"label": "dark", "irradiation": 0.0},
        ]}
        path = self.write("sweep.json", sweep)
        job = load_sweep(path)
        self.assertEqual(job.spec.values[1].values, (0.0, 0.0))
        code, out, _ = self.run_cli("sweep", str(path), "--out", str(self.tmp / "sweep"))
        self.assertEqual(code, 0)
        self.assertIn("flat\tok", out)
        self.assertTrue((self.tmp / "sweep" / "locations.csv").exists())

    def test_sweep_with_wrong_axis_values(self):
        self.document("base.json")
        path = self.write("sweep.json", {"version": 1, "base": "base.json", "axis": "fluid", "values": ["Water"]})
        code, _, err = self.run_cli("sweep", str(path))
        self.assertEqual(code, 1)
        self.assertIn("/values/0", err)
