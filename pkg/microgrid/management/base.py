"""Shared plumbing of the solver commands: solver options, input loading and exit codes."""

import logging
from contextlib import contextmanager

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ExportError, InfeasibleModel, PipelineError, ScenarioFileError, SolverLimitReached
from ..io import load_scenario
from ..milp import MilpError, SolverLimits

logger = logging.getLogger(__name__)

EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3


def exit_code(exc):
    if isinstance(exc, PipelineError):
        return exit_code(exc.cause)
    if isinstance(exc, InfeasibleModel):
        return EXIT_INFEASIBLE
    if isinstance(exc, SolverLimitReached):
        return EXIT_LIMIT
    return EXIT_INPUT


class MicrogridCommand(BaseCommand):
    requires_system_checks = []

    def add_solver_arguments(self, parser):
        parser.add_argument("--max-nodes", type=int, help="Branch-and-bound node limit.")
        parser.add_argument("--gap", type=float, dest="rel_gap", help="Relative optimality gap at which the search stops.")
        parser.add_argument("--time-limit", type=float, help="Wall-clock limit per solve in seconds.")

    def limits(self, options):
        return SolverLimits.from_settings(max_nodes=options.get("max_nodes"), rel_gap=options.get("rel_gap"), time_limit=options.get("time_limit"))

    def load(self, path):
        with self.exit_codes():
            return load_scenario(path)

    @contextmanager
    def exit_codes(self):
        """Turn domain failures into ``CommandError`` with the matching exit code."""
        try:
            yield
        except (ScenarioFileError, ExportError, PipelineError, MilpError) as e:
            raise CommandError(str(e), returncode=exit_code(e)) from e
        except ValidationError as e:
            raise CommandError("; ".join(e.messages), returncode=EXIT_INPUT) from e


def select_scenario(document, prosumer=None):
    if prosumer is None:
        if len(document.scenarios) != 1:
            ids = ", ".join(s.id for s in document.scenarios)
            raise CommandError(f"The document holds {len(document.scenarios)} scenarios ({ids}); pick one with --prosumer.", returncode=EXIT_INPUT)
        return document.scenario
    for scenario in document.scenarios:
        if scenario.id == prosumer:
            return scenario
    raise CommandError(f"No scenario with id '{prosumer}'.", returncode=EXIT_INPUT)
