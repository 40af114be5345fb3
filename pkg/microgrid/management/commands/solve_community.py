import time

from ...io import ResultBundle, export_results
from ...models import DegradationMode
from ...pipeline import run_pipeline
from ..base import MicrogridCommand


class Command(MicrogridCommand):
    help = "Schedule every prosumer of a community, clear their trades and report the KPIs."

    def add_arguments(self, parser):
        parser.add_argument("scenario", help="Scenario document with 'scenarios' and an optional 'network'.")
        parser.add_argument("--out", help="Directory for the result files.")
        parser.add_argument("--paper-literal-degradation", action="store_true", help="Use the degradation rows as printed.")
        self.add_solver_arguments(parser)

    def handle(self, *args, **options):
        document = self.load(options["scenario"])
        degradation = DegradationMode.LITERAL if options["paper_literal_degradation"] else DegradationMode.REMAINING_CAPACITY
        limits = self.limits(options)
        with self.exit_codes():
            network = document.trade_network()
            started = time.perf_counter()
            result = run_pipeline(list(document.scenarios), network, limits, degradation)
            wall_time = time.perf_counter() - started
            if options["out"]:
                bundle = ResultBundle.for_community(document.scenarios, network, result, degradation, document.currency, wall_time, limits)
                export_results(bundle, options["out"])
        kpi = result.kpi
        currency = document.currency
        for prosumer, cost in kpi.prosumer_costs.items():
            self.stdout.write(f"{prosumer}: local cost {cost:.9g} {currency}")
        self.stdout.write(f"trading cost {kpi.trading_cost:.9g} {currency}, peer-to-peer volume {kpi.p2p_volume:.9g} kWh")
        self.stdout.write(f"community cost {kpi.community_cost:.9g} {currency}")
        self.stdout.write(f"savings vs grid-only trading {kpi.savings_vs_grid_trading:.2%}, vs no ORC {kpi.savings_vs_no_orc:.2%}")
