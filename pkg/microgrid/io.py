"""Scenario files in, result files out.

Scenario and sweep documents are JSON (schema version 1) with optional CSV
sidecars for long series. Results are CSV and JSON files written so that a
rerun on the same bundle produces identical bytes: fixed column order,
numbers with ``MICROGRID["CSV_DIGITS"]`` significant digits, LF line ends,
no timestamps.
"""

import csv
import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.exceptions import ValidationError

from . import __version__
from .exceptions import ExportError, ScenarioFileError
from .models import DegradationMode, validate_scenario
from .pipeline import check_community
from .serializers import (
    NetworkSerializer,
    ScenarioDocumentSerializer,
    SweepDocumentSerializer,
    build_network,
    build_scenario,
    error_pointers,
    expand_series,
    scenario_to_dict,
)
from .sorc import grid_only_cost, mass_flow_report, savings
from .sweeps import DEFAULT_METRICS, Metric, SweepAxis, SweepSpec
from .weather import LabeledSeries, weekly_weather

logger = logging.getLogger(__name__)

STEP_COLUMN = "step"

SCHEDULE_COLUMNS = (
    ("step", "step"),
    ("x_kw", "production_kw"),
    ("z_kw", "pump_kw"),
    ("g_kw", "net_grid"),
    ("q_solar_kw", "solar_thermal"),
    ("q_in_kw", "hx_thermal"),
    ("m_kg_s", "mass_flow"),
    ("soc_kwh", "soc"),
    ("charge_kwh", "charge"),
    ("discharge_kwh", "discharge"),
    ("e_in_kwh", "grid_import"),
    ("e_out_kwh", "grid_export"),
)

TRADE_COLUMNS = ("step", "seller", "buyer", "kwh", "cost")

SWEEP_PLOT_FILES = {
    SweepAxis.FLUID: ("peak_mass_flow_by_fluid.csv", ("fluid", "peak_mass_flow")),
    SweepAxis.SIZE: ("objective_by_size.csv", ("size", "objective")),
    SweepAxis.COLLECTOR: ("collector_sizing.csv", ("collector", "required_collector_area", "peak_section_area")),
    SweepAxis.WEATHER: ("objective_by_weather.csv", ("weather", "objective")),
}


def _reject_constant(name):
    raise ValueError(f"{name} is not a valid number")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioFileError({"/": f"cannot read {path}: {e.strerror or e}"}, path=str(path))
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ScenarioFileError({"/": f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"}, path=str(path))
    except ValueError as e:
        raise ScenarioFileError({"/": str(e)}, path=str(path))


def canonical_json(data, indent=None):
    return json.dumps(data, sort_keys=True, indent=indent, separators=(",", ": ") if indent else (",", ":"), ensure_ascii=False, allow_nan=False)


def _pointer_errors(error, prefix):
    """``ValidationError`` keyed by dotted field paths, as JSON pointers under ``prefix``."""
    return {f"{prefix}/{key.replace('.', '/')}": "; ".join(messages) for key, messages in error.message_dict.items()}


class CsvSeries:
    """Columns of CSV sidecars, resolved relative to the scenario file.

    Every file needs a ``step`` column numbered 1..T in order. Problems are
    collected in ``errors`` keyed by ``file:line``; the caller raises them
    together.
    """

    def __init__(self, base_dir):
        self.base_dir = Path(base_dir)
        self.frames = {}
        self.errors = {}

    def frame(self, ref):
        if ref.path in self.frames:
            return self.frames[ref.path]
        path = self.base_dir / ref.path
        frame = None
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
        except FileNotFoundError:
            self.errors[ref.path] = f"file not found: {path}"
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            self.errors[ref.path] = f"cannot read CSV: {e}"
        if frame is not None and STEP_COLUMN not in frame.columns:
            self.errors[f"{ref.path}:1"] = f"missing '{STEP_COLUMN}' column"
            frame = None
        if frame is not None and not self._steps_ok(ref.path, frame[STEP_COLUMN]):
            frame = None
        self.frames[ref.path] = frame
        return frame

    def _steps_ok(self, name, steps):
        numbers = pd.to_numeric(steps, errors="coerce")
        for row, (raw, number) in enumerate(zip(steps, numbers)):
            if number != row + 1:
                self.errors[f"{name}:{row + 2}"] = f"step {raw!r} out of order, expected {row + 1}"
                return False
        return True

    def resolve(self, ref, horizon):
        placeholder = (0.0,) * max(horizon, 0)
        frame = self.frame(ref)
        if frame is None:
            return placeholder
        if ref.column not in frame.columns:
            self.errors[f"{ref.path}:1"] = f"missing column '{ref.column}'"
            return placeholder
        if len(frame) != horizon:
            line = horizon + 2 if len(frame) > horizon else len(frame) + 1
            self.errors[f"{ref.path}:{line}"] = f"has {len(frame)} rows, expected {horizon}"
            return placeholder
        raw = frame[ref.column]
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            row = int(bad[0])
            self.errors[f"{ref.path}:{row + 2}"] = f"column '{ref.column}' value {raw.iloc[row]!r} is not a finite number"
            return placeholder
        return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ScenarioDocument:
    scenarios: tuple
    network: object = None
    currency: str = ""
    path: str | None = None

    @property
    def scenario(self):
        return self.scenarios[0]

    def trade_network(self):
        """The declared network, or the default one over every scenario."""
        return self.network if self.network is not None else build_network({}, list(self.scenarios))


def load_scenario(path):
    """Load and validate a scenario document.

    Raises ``ScenarioFileError`` with every problem found: schema errors
    as JSON pointers, CSV problems as ``file:line``, then the invariant
    violations of the built scenarios and network.
    """
    path = Path(path)
    serializer = ScenarioDocumentSerializer(data=read_json(path))
    if not serializer.is_valid():
        raise ScenarioFileError(error_pointers(serializer.errors), path=str(path))
    data = serializer.validated_data

    series = CsvSeries(path.parent)
    if "scenario" in data:
        entries = [("/scenario", data["scenario"])]
    else:
        entries = [(f"/scenarios/{k}", item) for k, item in enumerate(data["scenarios"])]

    errors = {}
    scenarios = []
    for where, item in entries:
        horizon = item["time"].horizon
        scenario = build_scenario(item, lambda ref, h=horizon: series.resolve(ref, h), where)
        try:
            validate_scenario(scenario)
        except ValidationError as e:
            errors.update(_pointer_errors(e, where))
        scenarios.append(scenario)

    network = None
    if "network" in data:
        horizon = scenarios[0].time.horizon
        network = build_network(data["network"], scenarios, lambda ref: series.resolve(ref, horizon))
        try:
            check_community(scenarios, network)
        except ValidationError as e:
            errors.update(_pointer_errors(e, "/network"))

    errors = {**series.errors, **errors}
    if errors:
        raise ScenarioFileError(errors, path=str(path))
    logger.info(f"Loaded {len(scenarios)} scenario(s) from {path}")
    return ScenarioDocument(
        scenarios=tuple(scenarios),
        network=network,
        currency=data.get("currency", settings.MICROGRID["CURRENCY_LABEL"]),
        path=str(path),
    )


def scenario_document(scenarios, network=None, currency=None):
    """The canonical JSON document of ``scenarios`` with every series inline."""
    scenarios = list(scenarios)
    document = {"version": settings.MICROGRID["SCHEMA_VERSION"]}
    if currency:
        document["currency"] = currency
    if len(scenarios) == 1 and network is None:
        document["scenario"] = scenario_to_dict(scenarios[0])
    else:
        document["scenarios"] = [scenario_to_dict(s) for s in scenarios]
    if network is not None:
        document["network"] = NetworkSerializer().to_representation(network)
    return document


def write_scenario(path, scenarios, network=None, currency=None):
    write_text(Path(path), canonical_json(scenario_document(scenarios, network, currency), indent=2) + "\n")


def input_digest(scenarios, network=None, **options):
    """SHA-256 of the canonical inputs and solve options."""
    payload = {"document": scenario_document(scenarios, network), "options": options}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SweepJob:
    spec: SweepSpec
    compare_locations: bool = False
    document: ScenarioDocument | None = None


def _weather_series(item, base, series):
    if "site" in item:
        return weekly_weather(item["site"], item["week"], base.time.step_hours)
    values = expand_series(item["irradiation"], base.time.horizon, lambda ref: series.resolve(ref, base.time.horizon))
    return LabeledSeries(label=item["label"], values=values, synthetic=False)


def load_sweep(path):
    """Load a sweep document; ``base`` is a scenario file relative to it."""
    path = Path(path)
    serializer = SweepDocumentSerializer(data=read_json(path))
    if not serializer.is_valid():
        raise ScenarioFileError(error_pointers(serializer.errors), path=str(path))
    data = serializer.validated_data
    document = load_scenario(path.parent / data["base"])
    if len(document.scenarios) != 1:
        raise ScenarioFileError({"/base": "must hold exactly one scenario"}, path=str(path))
    base = document.scenario

    values = data["values"]
    if data["axis"] == SweepAxis.WEATHER:
        series = CsvSeries(path.parent)
        values = [_weather_series(item, base, series) for item in values]
        if series.errors:
            raise ScenarioFileError(series.errors, path=str(path))
    outputs = tuple(data.get("outputs") or DEFAULT_METRICS)
    if data["compare_locations"] and Metric.OBJECTIVE not in outputs:
        outputs = (Metric.OBJECTIVE, *outputs)
    spec = SweepSpec(base=base, axis=data["axis"], values=tuple(values), outputs=outputs)
    return SweepJob(spec=spec, compare_locations=data["compare_locations"], document=document)


@dataclass(frozen=True)
class ResultBundle:
    """Everything an export writes, plus the wall time that it never writes."""

    scenarios: tuple
    schedules: tuple
    input_digest: str
    clearing: object = None
    network: object = None
    kpi: object = None
    degradation: str = DegradationMode.REMAINING_CAPACITY
    currency: str = ""
    wall_time: float = 0.0
    tool_version: str = __version__

    @property
    def is_community(self):
        return self.clearing is not None

    @classmethod
    def for_schedule(cls, scenario, schedule, degradation=DegradationMode.REMAINING_CAPACITY, currency="", wall_time=0.0, limits=None):
        return cls(
            scenarios=(scenario,),
            schedules=(schedule,),
            input_digest=input_digest([scenario], degradation=str(degradation), limits=_limits_options(limits)),
            degradation=degradation,
            currency=currency,
            wall_time=wall_time,
        )

    @classmethod
    def for_community(cls, scenarios, network, result, degradation=DegradationMode.REMAINING_CAPACITY, currency="", wall_time=0.0, limits=None):
        by_id = {s.id: s for s in scenarios}
        ordered = tuple(by_id[p] for p in network.participants)
        return cls(
            scenarios=ordered,
            schedules=tuple(result.schedules),
            input_digest=input_digest(ordered, network, degradation=str(degradation), limits=_limits_options(limits)),
            clearing=result.clearing,
            network=network,
            kpi=result.kpi,
            degradation=degradation,
            currency=currency,
            wall_time=wall_time,
        )

    def statistics(self):
        """Deterministic solve statistics; wall time is left out."""
        stats = {"schedules": {s.scenario_id: {"nodes": s.nodes, "iterations": s.iterations} for s in self.schedules}}
        if self.clearing is not None:
            stats["clearing_iterations"] = self.clearing.iterations
        return stats


def _limits_options(limits):
    if limits is None:
        return None
    return {"max_nodes": limits.max_nodes, "rel_gap": limits.rel_gap, "time_limit": limits.time_limit}


def _number(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value) + 0.0:.{settings.MICROGRID['CSV_DIGITS']}g}"
    return str(value)


def _rounded(data):
    """JSON-ready copy with floats cut to the CSV precision and infinities as null."""
    if isinstance(data, dict):
        return {str(key): _rounded(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [_rounded(value) for value in data]
    if isinstance(data, (float, np.floating)):
        if not math.isfinite(data):
            return None
        return float(f"{float(data) + 0.0:.{settings.MICROGRID['CSV_DIGITS']}g}")
    if isinstance(data, np.integer):
        return int(data)
    return data


def write_text(path, text):
    directory = path.parent
    try:
        directory.mkdir(parents=True, exist_ok=True)
        tmpf = tempfile.NamedTemporaryFile(mode="w", encoding="utf-8", newline="", dir=directory, prefix=f".{path.name}.", delete=False)
        with tmpf:
            tmpf.write(text)
        os.replace(tmpf.name, path)
    except OSError as e:
        raise ExportError(path, e.strerror or e) from e


def _write_csv(path, header, rows):
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_number(value) for value in row] for row in rows)
    write_text(path, buffer.getvalue())
    return path


def _write_json(path, data):
    write_text(path, canonical_json(_rounded(data), indent=2) + "\n")
    return path


def schedule_rows(schedule):
    return [[getattr(record, attr) for _, attr in SCHEDULE_COLUMNS] for record in schedule.steps]


def trade_rows(bundle):
    if bundle.clearing is None:
        return []
    return [[trade.step, trade.seller, trade.buyer, trade.kwh, trade.cost] for trade in bundle.clearing.trades(bundle.network)]


def kpi_document(bundle):
    if bundle.kpi is not None:
        document = bundle.kpi.as_dict()
    else:
        scenario, schedule = bundle.scenarios[0], bundle.schedules[0]
        baseline = grid_only_cost(scenario)
        document = {
            "scenario_id": schedule.scenario_id,
            "objective": schedule.total_cost,
            "production_cost": schedule.production_cost,
            "storage_cost": schedule.storage_cost,
            "grid_cost": schedule.grid_cost,
            "baseline_no_orc": baseline,
            "savings_vs_no_orc": savings(baseline, schedule.total_cost),
        }
    document["currency"] = bundle.currency
    return document


def plot_rows(bundle):
    """Per-figure plot data: production against grid, battery usage and mass flow."""
    production, battery, mass_flow = [], [], []
    for scenario, schedule in zip(bundle.scenarios, bundle.schedules):
        flow = mass_flow_report(schedule, scenario.fluid)
        for record, demand, m in zip(schedule.steps, scenario.demand, flow.per_step):
            production.append([schedule.scenario_id, record.step, record.production_kw, record.net_grid, demand, record.grid_import, record.grid_export])
            battery.append([schedule.scenario_id, record.step, record.soc, record.charge, record.discharge, record.cap_available, record.degradation])
            mass_flow.append([schedule.scenario_id, scenario.fluid.name, record.step, m])
    return {
        "production_vs_grid.csv": (("prosumer", "step", "x_kw", "g_kw", "demand_kwh", "e_in_kwh", "e_out_kwh"), production),
        "battery_usage.csv": (("prosumer", "step", "soc_kwh", "charge_kwh", "discharge_kwh", "capacity_kwh", "wear"), battery),
        "mass_flow_by_fluid.csv": (("prosumer", "fluid", "step", "m_kg_s"), mass_flow),
    }


def export_results(bundle, directory):
    """Write the bundle under ``directory`` and return the written paths in order.

    Raises ``ExportError`` when the directory cannot be created or written.
    """
    directory = Path(directory)
    written = []
    single = len(bundle.schedules) == 1 and not bundle.is_community
    for schedule in bundle.schedules:
        name = "schedule.csv" if single else f"schedule_{schedule.scenario_id}.csv"
        written.append(_write_csv(directory / name, [column for column, _ in SCHEDULE_COLUMNS], schedule_rows(schedule)))
    written.append(_write_csv(directory / "trades.csv", TRADE_COLUMNS, trade_rows(bundle)))
    if bundle.is_community:
        clearing = bundle.clearing
        rows = [[t, clearing.h_in[t - 1], clearing.h_out[t - 1], clearing.step_objectives[t - 1]] for t in range(1, clearing.horizon + 1)]
        written.append(_write_csv(directory / "community_exchange.csv", ("step", "h_in_kwh", "h_out_kwh", "cost"), rows))
    for name, (header, rows) in plot_rows(bundle).items():
        written.append(_write_csv(directory / name, header, rows))
    written.append(_write_json(directory / "kpi.json", kpi_document(bundle)))

    manifest = {
        "tool": "microgrid",
        "tool_version": bundle.tool_version,
        "schema_version": settings.MICROGRID["SCHEMA_VERSION"],
        "input_digest": bundle.input_digest,
        "degradation": str(bundle.degradation),
        "participants": [s.id for s in bundle.scenarios],
        "statistics": bundle.statistics(),
        "files": [path.name for path in written],
    }
    written.append(_write_json(directory / "manifest.json", manifest))
    logger.info(f"Wrote {len(written)} files to {directory} (solved in {bundle.wall_time:.3f} s)")
    return written


def export_sweep(table, directory, locations=None):
    """Write ``sweep.csv``, the axis plot file and, for a location comparison, ``locations.csv``."""
    directory = Path(directory)
    header = ("label", "status", *table.outputs, "error")
    rows = [[row.label, row.status, *(row.metrics.get(m) for m in table.outputs), row.error or ""] for row in table.rows]
    written = [_write_csv(directory / "sweep.csv", header, rows)]

    name, columns = SWEEP_PLOT_FILES[table.axis]
    plot = [[row.label, *(row.metrics.get(m) for m in columns[1:])] for row in table.rows]
    written.append(_write_csv(directory / name, columns, plot))

    if locations is not None:
        rows = [[row.label, row.objective, row.baseline, row.savings, row.status] for row in locations]
        written.append(_write_csv(directory / "locations.csv", ("weather", "objective", "baseline", "savings", "status"), rows))
    logger.info(f"Wrote sweep over {table.axis} to {directory}")
    return written
