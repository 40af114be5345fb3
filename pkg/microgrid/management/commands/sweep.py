from ...io import export_sweep, load_sweep
from ...sweeps import check_weathers, location_rows, run_sweep
from ..base import MicrogridCommand


class Command(MicrogridCommand):
    help = "Run a sensitivity sweep over fluids, sizes, collectors or weather."

    def add_arguments(self, parser):
        parser.add_argument("sweepspec", help="Sweep document (JSON) naming its base scenario.")
        parser.add_argument("--out", help="Directory for the result files.")
        self.add_solver_arguments(parser)

    def handle(self, *args, **options):
        limits = self.limits(options)
        with self.exit_codes():
            job = load_sweep(options["sweepspec"])
            if job.compare_locations:
                check_weathers(job.spec.base, job.spec.values)
            table = run_sweep(job.spec, limits)
            locations = location_rows(table, job.spec.base) if job.compare_locations else None
            if options["out"]:
                export_sweep(table, options["out"], locations)

        self.stdout.write("\t".join(("label", "status", *table.outputs)))
        for row in table.rows:
            cells = ["" if row.metrics.get(m) is None else f"{row.metrics[m]:.9g}" for m in table.outputs]
            self.stdout.write("\t".join((row.label, row.status, *cells)))
            if row.error:
                self.stderr.write(f"{row.label}: {row.error}")
        for location in locations or ():
            shown = "" if location.savings is None else f"{location.savings:.2%}"
            self.stdout.write(f"{location.label}: savings {shown} against grid-only {location.baseline:.9g}")
