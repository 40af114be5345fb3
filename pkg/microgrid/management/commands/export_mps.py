import logging
from pathlib import Path

from django.core.management.base import CommandError

from ...io import write_text
from ...milp import read_mps, write_mps
from ...models import DegradationMode
from ...pipeline import check_community, solve_schedules
from ...sorc import build_sorc_model
from ...tet import ImbalanceSet, build_tet_model
from ..base import EXIT_INPUT, MicrogridCommand, select_scenario

logger = logging.getLogger(__name__)


class Command(MicrogridCommand):
    help = "Write the S-ORC model of a prosumer, or the trade clearing model of a community, as free-format MPS."

    def add_arguments(self, parser):
        parser.add_argument("scenario", help="Scenario document (JSON).")
        parser.add_argument("--stage", choices=("sorc", "tet"), default="sorc")
        parser.add_argument("--out", help="Target file; standard output when omitted.")
        parser.add_argument("--prosumer", help="Scenario id for the sorc stage when the document holds several.")
        parser.add_argument("--paper-literal-degradation", action="store_true", help="Use the degradation rows as printed.")
        self.add_solver_arguments(parser)

    def handle(self, *args, **options):
        document = self.load(options["scenario"])
        degradation = DegradationMode.LITERAL if options["paper_literal_degradation"] else DegradationMode.REMAINING_CAPACITY
        with self.exit_codes():
            if options["stage"] == "sorc":
                model, _ = build_sorc_model(select_scenario(document, options["prosumer"]), degradation)
            else:
                network = document.trade_network()
                check_community(list(document.scenarios), network)
                by_id = {s.id: s for s in document.scenarios}
                schedules = solve_schedules([by_id[p] for p in network.participants], self.limits(options), degradation)
                model, _ = build_tet_model(ImbalanceSet.from_schedules(schedules, order=network.participants), network)
            text = write_mps(model)

            parsed = read_mps(text)
            if (parsed.n_vars, parsed.n_rows) != (model.n_vars, model.n_rows):
                raise CommandError(f"MPS self-check failed for {model.name}", returncode=EXIT_INPUT)

            if options["out"]:
                write_text(Path(options["out"]), text)
                logger.info(f"Wrote {model.name} ({model.n_vars} columns, {model.n_rows} rows) to {options['out']}")
            else:
                self.stdout.write(text, ending="")
