import time

from ...io import ResultBundle, export_results
from ...models import DegradationMode
from ...sorc import solve_sorc
from ..base import MicrogridCommand, select_scenario


class Command(MicrogridCommand):
    help = "Solve the S-ORC schedule of one prosumer and optionally export the results."

    def add_arguments(self, parser):
        parser.add_argument("scenario", help="Scenario document (JSON).")
        parser.add_argument("--out", help="Directory for the result files.")
        parser.add_argument("--prosumer", help="Scenario id when the document holds several.")
        parser.add_argument(
            "--paper-literal-degradation",
            action="store_true",
            help="Cap the battery by d·b_max as printed instead of tracking the remaining capacity.",
        )
        self.add_solver_arguments(parser)

    def handle(self, *args, **options):
        document = self.load(options["scenario"])
        scenario = select_scenario(document, options["prosumer"])
        degradation = DegradationMode.LITERAL if options["paper_literal_degradation"] else DegradationMode.REMAINING_CAPACITY
        limits = self.limits(options)
        with self.exit_codes():
            started = time.perf_counter()
            schedule = solve_sorc(scenario, limits, degradation)
            wall_time = time.perf_counter() - started
            if options["out"]:
                bundle = ResultBundle.for_schedule(scenario, schedule, degradation, document.currency, wall_time, limits)
                export_results(bundle, options["out"])
        self.stdout.write(
            f"{scenario.id}: total cost {schedule.total_cost:.9g} {document.currency} "
            f"(production {schedule.production_cost:.9g}, storage {schedule.storage_cost:.9g}, grid {schedule.grid_cost:.9g})"
        )
        self.stdout.write(f"grid import {schedule.e_in.sum():.9g} kWh, export {schedule.e_out.sum():.9g} kWh, {schedule.nodes} nodes")
