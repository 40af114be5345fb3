"""Batch sensitivity studies over one base scenario.

Each variant changes a single aspect of the base scenario: the working
fluid, the plant size, the collector technology or the weather. Variants
run as Celery tasks and the result table keeps the order of the axis list.
"""

import logging
from dataclasses import dataclass, field, replace

from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from .catalog import catalog_collector, catalog_fluid
from .exceptions import InfeasibleModel, SolverLimitReached, UnboundedModel
from .milp import MilpError
from .models import CollectorSpec, FluidProperties, validate_scenario
from .sorc import grid_only_cost, mass_flow_report, savings, solve_sorc
from .weather import LabeledSeries

logger = logging.getLogger(__name__)


class SweepAxis(models.TextChoices):
    FLUID = "fluid", _("Working fluid")
    SIZE = "size", _("Plant size")
    COLLECTOR = "collector", _("Collector technology")
    WEATHER = "weather", _("Weather")


class Metric(models.TextChoices):
    OBJECTIVE = "objective", _("Optimal total cost")
    PEAK_MASS_FLOW = "peak_mass_flow", _("Peak mass flow [kg/s]")
    GRID_IMPORT_TOTAL = "grid_import_total", _("Grid import [kWh]")
    BATTERY_THROUGHPUT = "battery_throughput", _("Battery discharge [kWh]")
    REQUIRED_COLLECTOR_AREA = "required_collector_area", _("Collector area for rated output [m²]")
    PEAK_SECTION_AREA = "peak_section_area", _("Peak pipe section [m²]")
    GRID_ONLY_COST = "grid_only_cost", _("Grid-only supply cost")
    SAVINGS = "savings", _("Savings against grid-only supply")


DEFAULT_METRICS = (Metric.OBJECTIVE, Metric.PEAK_MASS_FLOW, Metric.GRID_IMPORT_TOTAL, Metric.BATTERY_THROUGHPUT)


@dataclass(frozen=True)
class SweepSpec:
    base: object
    axis: str
    values: tuple
    outputs: tuple[str, ...] = DEFAULT_METRICS

    def check(self):
        errors = {}
        if self.axis not in SweepAxis.values:
            errors["axis"] = [ValidationError("must be one of %(choices)s", code="invalid_choice", params={"value": self.axis, "choices": ", ".join(SweepAxis.values)})]
        if not self.values:
            errors["values"] = [ValidationError("must not be empty", code="empty", params={"value": []})]
        unknown = [m for m in self.outputs if m not in Metric.values]
        if unknown:
            errors["outputs"] = [ValidationError("unknown metrics %(value)s", code="invalid_choice", params={"value": unknown})]
        if errors:
            raise ValidationError(errors)
        return self


@dataclass(frozen=True)
class SweepRow:
    label: str
    status: str
    metrics: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self):
        return self.status == "ok"


@dataclass(frozen=True)
class SweepTable:
    axis: str
    outputs: tuple[str, ...]
    rows: tuple[SweepRow, ...]

    def column(self, metric):
        return [row.metrics.get(metric) for row in self.rows]


def resize(scenario, size_kw):
    """Plant rated at ``size_kw``: z_max scales with x_max and the pipe section is re-derived."""
    orc = scenario.orc
    z_max = orc.z_max * size_kw / orc.x_max if orc.x_max > 0 else orc.z_max
    return scenario.with_changes(orc=replace(orc, x_max=size_kw, z_max=z_max, section_area_max=None))


def variant(base, axis, value):
    """``(label, scenario)`` of one axis value."""
    if axis == SweepAxis.FLUID:
        fluid = value if isinstance(value, FluidProperties) else catalog_fluid(value, base.fluid.velocity)
        return fluid.name, base.with_changes(fluid=fluid)
    if axis == SweepAxis.SIZE:
        return f"{float(value):g} kW", resize(base, float(value))
    if axis == SweepAxis.COLLECTOR:
        collector = value if isinstance(value, CollectorSpec) else catalog_collector(value, base.collector.area)
        return collector.technology, base.with_changes(collector=collector)
    if axis == SweepAxis.WEATHER:
        series = value if isinstance(value, LabeledSeries) else LabeledSeries(label=str(value[0]), values=tuple(value[1]))
        return series.label, base.with_changes(irradiation=tuple(series.values))
    raise ValueError(f"Unknown sweep axis {axis!r}")


def required_collector_area(scenario):
    """Collector area that lets the plant reach x_max under the peak irradiation."""
    peak = max(scenario.irradiation, default=0.0)
    if peak <= 0:
        return None
    fluid, orc = scenario.fluid, scenario.orc
    net_fraction = 1.0 - fluid.dh_pump / fluid.dh_turbine
    return orc.x_max * net_fraction / (orc.eta_cycle * orc.eta_hx * scenario.collector.efficiency * peak)


def schedule_metrics(scenario, schedule, metrics):
    values = {}
    for metric in metrics:
        if metric == Metric.OBJECTIVE:
            values[metric] = schedule.total_cost
        elif metric == Metric.PEAK_MASS_FLOW:
            values[metric] = mass_flow_report(schedule, scenario.fluid).peak
        elif metric == Metric.GRID_IMPORT_TOTAL:
            values[metric] = float(schedule.e_in.sum())
        elif metric == Metric.BATTERY_THROUGHPUT:
            values[metric] = float(schedule.series("discharge").sum())
        elif metric == Metric.REQUIRED_COLLECTOR_AREA:
            values[metric] = required_collector_area(scenario)
        elif metric == Metric.PEAK_SECTION_AREA:
            values[metric] = float(schedule.series("section_area").max(initial=0.0))
        elif metric == Metric.GRID_ONLY_COST:
            values[metric] = grid_only_cost(scenario)
        elif metric == Metric.SAVINGS:
            values[metric] = savings(grid_only_cost(scenario), schedule.total_cost)
    return values


def evaluate_variant(label, scenario, metrics, limits=None):
    """Solve one variant; failures become a row, never an exception."""
    try:
        schedule = solve_sorc(scenario, limits)
    except InfeasibleModel as e:
        status, error = "infeasible", str(e)
    except SolverLimitReached as e:
        status, error = "limit", str(e)
    except (UnboundedModel, MilpError) as e:
        status, error = "error", str(e)
    else:
        return {"label": label, "status": "ok", "error": None, "metrics": schedule_metrics(scenario, schedule, metrics)}
    logger.warning(f"Sweep variant {label} failed: {error}")
    return {"label": label, "status": status, "error": error, "metrics": {m: None for m in metrics}}


def run_sweep(spec, limits=None):
    """One S-ORC solve per axis value, rows in axis order."""
    from .serializers import scenario_to_dict
    from .tasks import limits_to_dict, run_variant_task

    spec.check()
    outputs = [str(m) for m in spec.outputs]
    pending = []
    for value in spec.values:
        label, scenario = variant(spec.base, spec.axis, value)
        try:
            validate_scenario(scenario)
        except ValidationError as e:
            pending.append({"label": label, "status": "invalid", "error": str(e), "metrics": {m: None for m in outputs}})
            continue
        payload = {"label": label, "scenario": scenario_to_dict(scenario), "metrics": outputs, "limits": limits_to_dict(limits)}
        pending.append(run_variant_task.delay(payload))

    rows = []
    for item in pending:
        result = item if isinstance(item, dict) else item.get()
        rows.append(SweepRow(label=result["label"], status=result["status"], metrics=result["metrics"], error=result["error"]))
    logger.info(f"Sweep over {spec.axis}: {sum(row.ok for row in rows)}/{len(rows)} variants solved")
    return SweepTable(axis=spec.axis, outputs=tuple(outputs), rows=tuple(rows))


def check_weathers(base, weathers):
    weathers = list(weathers)
    wrong = [w.label for w in weathers if len(w.values) != base.time.horizon]
    if wrong:
        raise ValidationError(
            {"weathers": [ValidationError("series %(value)s do not match the horizon %(limit)s", code="length_mismatch", params={"value": wrong, "limit": base.time.horizon})]}
        )
    return weathers


@dataclass(frozen=True)
class LocationRow:
    label: str
    objective: float | None
    baseline: float
    savings: float | None
    status: str
    error: str | None = None


def compare_locations(base, weathers, limits=None):
    """Objective and savings against grid-only supply for each weather series.

    Tariffs stay those of ``base`` for every label.
    """
    weathers = check_weathers(base, weathers)
    table = run_sweep(SweepSpec(base=base, axis=SweepAxis.WEATHER, values=tuple(weathers), outputs=(Metric.OBJECTIVE,)), limits)
    return location_rows(table, base)


def location_rows(table, base):
    """Location comparison rows of a weather sweep that reported the objective."""
    baseline = grid_only_cost(base)
    return [
        LocationRow(
            label=row.label,
            objective=row.metrics.get(Metric.OBJECTIVE),
            baseline=baseline,
            savings=savings(baseline, row.metrics[Metric.OBJECTIVE]) if row.ok else None,
            status=row.status,
            error=row.error,
        )
        for row in table.rows
    ]
