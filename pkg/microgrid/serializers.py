"""Serializers of the scenario document (schema version 1) and of solve results.

Time series are given inline (a list, or a single number repeated over the
horizon) or as ``{"csv": path, "column": name}`` references that
``microgrid.io`` resolves. Unknown fields are rejected at every level.
"""

import math
from dataclasses import dataclass

from django.conf import settings
from rest_framework import serializers

from .catalog import COLLECTOR_EFFICIENCIES, DEFAULT_VELOCITY, FLUID_TABLE, catalog_collector, catalog_fluid
from .models import (
    BatterySpec,
    CollectorSpec,
    CollectorTechnology,
    DegradationMode,
    FluidProperties,
    GridTariff,
    OrcSpec,
    TimeGrid,
    TradeNetwork,
    enthalpy_drops,
)
from .sorc import SorcSchedule, StepRecord
from .sweeps import Metric, SweepAxis
from .validators import validate_participant_id
from .weather import SITES, WEEKS


@dataclass(frozen=True)
class CsvRef:
    path: str
    column: str


@dataclass(frozen=True)
class Repeated:
    value: float


def _finite(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise serializers.ValidationError(f"{value!r} is not a finite number.")
    return float(value)


def _unbounded(value):
    return None if value is None or math.isinf(value) else value


class StrictSerializer(serializers.Serializer):
    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({name: ["Unknown field."] for name in unknown})
        return super().to_internal_value(data)


class SeriesField(serializers.Field):
    default_error_messages = {
        "invalid": "Expected a list of numbers, a number or a {{\"csv\", \"column\"}} reference.",
    }

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - {"csv", "column"})
            if unknown or not isinstance(data.get("csv"), str) or not isinstance(data.get("column"), str):
                self.fail("invalid")
            return CsvRef(path=data["csv"], column=data["column"])
        if isinstance(data, list):
            return tuple(_finite(value) for value in data)
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return Repeated(_finite(data))
        self.fail("invalid")

    def to_representation(self, value):
        if isinstance(value, CsvRef):
            return {"csv": value.path, "column": value.column}
        if isinstance(value, Repeated):
            return value.value
        return [float(v) for v in value]


class InfiniteFloatField(serializers.FloatField):
    """Float where ``null`` stands for +inf."""

    def __init__(self, **kwargs):
        kwargs.setdefault("allow_null", True)
        super().__init__(**kwargs)

    def to_representation(self, value):
        return None if value is None or math.isinf(value) else super().to_representation(value)


class TimeSerializer(StrictSerializer):
    horizon = serializers.IntegerField()
    step_hours = serializers.FloatField(default=1.0)

    def validate(self, attrs):
        return TimeGrid(**attrs)


class FluidSerializer(StrictSerializer):
    catalog = serializers.CharField(required=False)
    name = serializers.CharField(required=False)
    molecular_weight = serializers.FloatField(required=False)
    t_crit = serializers.FloatField(required=False)
    p_crit = serializers.FloatField(required=False)
    cp = serializers.FloatField(required=False)
    density = serializers.FloatField(required=False)
    velocity = serializers.FloatField(required=False)
    dh_turbine = serializers.FloatField(required=False)
    dh_pump = serializers.FloatField(required=False)
    dt_turbine = serializers.FloatField(required=False)
    dt_pump = serializers.FloatField(required=False)
    eta_turbine = serializers.FloatField(required=False)
    eta_pump = serializers.FloatField(required=False)

    REQUIRED = ("name", "cp", "density", "velocity", "dh_turbine", "dh_pump")
    TEMPERATURES = ("dt_turbine", "dt_pump", "eta_turbine", "eta_pump")

    def validate(self, attrs):
        values = {"molecular_weight": 0.0, "t_crit": 0.0, "p_crit": 0.0, "velocity": DEFAULT_VELOCITY}
        if "catalog" in attrs:
            try:
                base = catalog_fluid(attrs["catalog"], attrs.get("velocity", DEFAULT_VELOCITY))
            except KeyError as exc:
                raise serializers.ValidationError({"catalog": [str(exc.args[0])]})
            values.update(vars(base))
        temperatures = {key: attrs[key] for key in self.TEMPERATURES if key in attrs}
        given = {key: value for key, value in attrs.items() if key not in self.TEMPERATURES and key != "catalog"}
        values.update(given)
        if temperatures:
            if "dh_turbine" in given or "dh_pump" in given:
                raise serializers.ValidationError("Give either enthalpy drops or temperature differences, not both.")
            missing = [key for key in self.TEMPERATURES if key not in temperatures]
            if missing:
                raise serializers.ValidationError({key: ["Required when deriving enthalpy drops."] for key in missing})
            if "cp" not in values:
                raise serializers.ValidationError({"cp": ["Required when deriving enthalpy drops."]})
            values["dh_turbine"], values["dh_pump"] = enthalpy_drops(values["cp"], **temperatures)
        missing = [key for key in self.REQUIRED if key not in values]
        if missing:
            raise serializers.ValidationError({key: ["This field is required."] for key in missing})
        return FluidProperties(**{key: values[key] for key in FluidProperties.__dataclass_fields__})

    def to_representation(self, instance):
        return {key: getattr(instance, key) for key in FluidProperties.__dataclass_fields__}


class CollectorSerializer(StrictSerializer):
    technology = serializers.ChoiceField(choices=CollectorTechnology.choices)
    efficiency = serializers.FloatField(required=False)
    area = serializers.FloatField()

    def validate(self, attrs):
        if "efficiency" not in attrs:
            if attrs["technology"] == CollectorTechnology.CUSTOM:
                raise serializers.ValidationError({"efficiency": ["Required for a custom collector."]})
            attrs["efficiency"] = catalog_collector(attrs["technology"]).efficiency
        return CollectorSpec(**attrs)


class OrcSerializer(StrictSerializer):
    eta_cycle = serializers.FloatField()
    eta_hx = serializers.FloatField()
    x_min = serializers.FloatField(default=0.0)
    x_max = serializers.FloatField()
    z_min = serializers.FloatField(default=0.0)
    z_max = serializers.FloatField()
    section_area_max = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        return OrcSpec(**attrs)


class BatterySerializer(StrictSerializer):
    eta_round = serializers.FloatField()
    b_min = serializers.FloatField(default=0.0)
    b_max = serializers.FloatField()
    fade = serializers.FloatField()
    throughput = serializers.FloatField()
    cost_cycle = serializers.FloatField()

    def validate(self, attrs):
        return BatterySpec(**attrs)


class TariffSerializer(StrictSerializer):
    g_min = serializers.FloatField()
    g_max = serializers.FloatField()
    price_buy = SeriesField()
    price_sell = SeriesField(default=Repeated(0.0))


class ScenarioSerializer(StrictSerializer):
    """One prosumer. Series stay unresolved until the horizon is known."""

    id = serializers.CharField(validators=[validate_participant_id])
    time = TimeSerializer()
    fluid = FluidSerializer()
    collector = CollectorSerializer()
    orc = OrcSerializer()
    battery = BatterySerializer()
    tariff = TariffSerializer()
    demand = SeriesField()
    irradiation = SeriesField()
    production_cost = serializers.FloatField()

    def to_representation(self, instance):
        return {
            "id": instance.id,
            "time": {"horizon": instance.time.horizon, "step_hours": instance.time.step_hours},
            "fluid": FluidSerializer().to_representation(instance.fluid),
            "collector": {
                "technology": instance.collector.technology,
                "efficiency": instance.collector.efficiency,
                "area": instance.collector.area,
            },
            "orc": {key: getattr(instance.orc, key) for key in OrcSpec.__dataclass_fields__},
            "battery": {key: getattr(instance.battery, key) for key in BatterySpec.__dataclass_fields__},
            "tariff": {
                "g_min": instance.tariff.g_min,
                "g_max": instance.tariff.g_max,
                "price_buy": list(instance.tariff.price_buy),
                "price_sell": list(instance.tariff.price_sell),
            },
            "demand": list(instance.demand),
            "irradiation": list(instance.irradiation),
            "production_cost": instance.production_cost,
        }


class ArcSerializer(StrictSerializer):
    seller = serializers.CharField()
    buyer = serializers.CharField()
    transmission_cost = SeriesField(required=False)
    f_min = serializers.FloatField(required=False)
    f_max = InfiniteFloatField(required=False)


class GridCostField(serializers.Field):
    """A series for every participant, or a mapping of participant to series."""

    def to_internal_value(self, data):
        series = SeriesField()
        if isinstance(data, dict):
            result = {}
            for participant, value in data.items():
                try:
                    result[participant] = series.to_internal_value(value)
                except serializers.ValidationError as exc:
                    raise serializers.ValidationError({participant: exc.detail})
            return result
        return series.to_internal_value(data)

    def to_representation(self, value):
        return {participant: list(series) for participant, series in value.items()}


class NetworkSerializer(StrictSerializer):
    participants = serializers.ListField(child=serializers.CharField(), required=False)
    transmission_cost = SeriesField(default=Repeated(0.0))
    f_min = serializers.FloatField(default=0.0)
    f_max = InfiniteFloatField(default=None)
    arcs = ArcSerializer(many=True, required=False)
    grid_buy_cost = GridCostField(required=False)
    grid_sell_cost = GridCostField(required=False)

    def to_representation(self, instance):
        return {
            "participants": list(instance.participants),
            "arcs": [
                {
                    "seller": seller,
                    "buyer": buyer,
                    "transmission_cost": list(instance.transmission_cost.get((seller, buyer), ())),
                    "f_min": instance.bounds(seller, buyer)[0],
                    "f_max": _unbounded(instance.bounds(seller, buyer)[1]),
                }
                for seller, buyer in instance.pairs()
            ],
            "grid_buy_cost": {p: list(instance.grid_buy_cost.get(p, ())) for p in instance.participants},
            "grid_sell_cost": {p: list(instance.grid_sell_cost.get(p, ())) for p in instance.participants},
        }


class ScenarioDocumentSerializer(StrictSerializer):
    version = serializers.IntegerField()
    currency = serializers.CharField(required=False)
    scenario = ScenarioSerializer(required=False)
    scenarios = ScenarioSerializer(many=True, required=False)
    network = NetworkSerializer(required=False)

    def validate_version(self, value):
        if value != settings.MICROGRID["SCHEMA_VERSION"]:
            raise serializers.ValidationError(f"unsupported version {value}; this tool reads version {settings.MICROGRID['SCHEMA_VERSION']}")
        return value

    def validate(self, attrs):
        if ("scenario" in attrs) == ("scenarios" in attrs):
            raise serializers.ValidationError("Give exactly one of 'scenario' or 'scenarios'.")
        if "scenarios" in attrs and not attrs["scenarios"]:
            raise serializers.ValidationError({"scenarios": ["At least one scenario is required."]})
        return attrs


def error_pointers(errors, prefix=""):
    """Flatten DRF ``serializer.errors`` into ``{json_pointer: message}``."""
    flat = {}
    if isinstance(errors, dict):
        for key, value in errors.items():
            path = prefix if key in ("non_field_errors", "__all__") else f"{prefix}/{key}"
            flat.update(error_pointers(value, path))
    elif isinstance(errors, list):
        if all(isinstance(item, str) for item in errors):
            if errors:
                flat[prefix or "/"] = "; ".join(str(item) for item in errors)
        else:
            for index, item in enumerate(errors):
                if item:
                    flat.update(error_pointers(item, f"{prefix}/{index}"))
    else:
        flat[prefix or "/"] = str(errors)
    return flat


def expand_series(value, horizon, resolve=None, where=""):
    """Turn a parsed series field into a tuple of ``horizon`` floats."""
    if isinstance(value, Repeated):
        return (value.value,) * horizon
    if isinstance(value, CsvRef):
        if resolve is None:
            raise serializers.ValidationError({where: [f"CSV reference {value.path!r} is not allowed here."]})
        return resolve(value)
    return tuple(value)


def build_scenario(data, resolve=None, where="/scenario"):
    """``MicrogridScenario`` from a validated ``ScenarioSerializer`` payload; series are not yet range-checked."""
    from .models import MicrogridScenario

    horizon = data["time"].horizon
    tariff = data["tariff"]
    return MicrogridScenario(
        id=data["id"],
        time=data["time"],
        fluid=data["fluid"],
        collector=data["collector"],
        orc=data["orc"],
        battery=data["battery"],
        tariff=GridTariff(
            g_min=tariff["g_min"],
            g_max=tariff["g_max"],
            price_buy=expand_series(tariff["price_buy"], horizon, resolve, f"{where}/tariff/price_buy"),
            price_sell=expand_series(tariff["price_sell"], horizon, resolve, f"{where}/tariff/price_sell"),
        ),
        demand=expand_series(data["demand"], horizon, resolve, f"{where}/demand"),
        irradiation=expand_series(data["irradiation"], horizon, resolve, f"{where}/irradiation"),
        production_cost=data["production_cost"],
    )


def build_network(data, scenarios, resolve=None):
    """``TradeNetwork`` from a validated ``NetworkSerializer`` payload.

    Grid arcs default to each prosumer's own tariff: buying from the grid
    costs ``price_buy`` and selling to it earns ``price_sell``.
    """
    data = data or {}
    horizon = scenarios[0].time.horizon
    participants = tuple(data.get("participants") or [s.id for s in scenarios])
    by_id = {s.id: s for s in scenarios}
    default_cost = expand_series(data.get("transmission_cost", Repeated(0.0)), horizon, resolve, "/network/transmission_cost")
    pairs = [(i, j) for i in participants for j in participants if i != j]
    f_min = {pair: data.get("f_min", 0.0) for pair in pairs}
    f_max = {pair: math.inf if data.get("f_max") is None else data["f_max"] for pair in pairs}
    costs = {pair: default_cost for pair in pairs}
    for k, arc in enumerate(data.get("arcs", [])):
        pair = (arc["seller"], arc["buyer"])
        if "transmission_cost" in arc:
            costs[pair] = expand_series(arc["transmission_cost"], horizon, resolve, f"/network/arcs/{k}/transmission_cost")
        if "f_min" in arc:
            f_min[pair] = arc["f_min"]
        if "f_max" in arc:
            f_max[pair] = math.inf if arc["f_max"] is None else arc["f_max"]

    def grid(field, default):
        value = data.get(field)
        if value is None:
            return {p: default(by_id[p]) for p in participants if p in by_id}
        if isinstance(value, dict):
            return {p: expand_series(series, horizon, resolve, f"/network/{field}/{p}") for p, series in value.items()}
        series = expand_series(value, horizon, resolve, f"/network/{field}")
        return {p: series for p in participants}

    return TradeNetwork(
        participants=participants,
        f_min=f_min,
        f_max=f_max,
        transmission_cost=costs,
        grid_buy_cost=grid("grid_buy_cost", lambda s: tuple(s.tariff.price_buy)),
        grid_sell_cost=grid("grid_sell_cost", lambda s: tuple(-price for price in s.tariff.price_sell)),
    )


def scenario_to_dict(scenario):
    return ScenarioSerializer().to_representation(scenario)


def scenario_from_dict(data):
    """Rebuild a scenario from ``scenario_to_dict`` output (inline series only)."""
    serializer = ScenarioSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return build_scenario(serializer.validated_data)


class StepRecordSerializer(StrictSerializer):
    step = serializers.IntegerField()
    production_kw = serializers.FloatField()
    pump_kw = serializers.FloatField()
    net_grid = serializers.FloatField()
    solar_thermal = serializers.FloatField()
    hx_thermal = serializers.FloatField()
    mass_flow = serializers.FloatField()
    section_area = serializers.FloatField()
    soc = serializers.FloatField()
    charge = serializers.FloatField()
    discharge = serializers.FloatField()
    cap_available = serializers.FloatField()
    degradation = serializers.FloatField()
    grid_import = serializers.FloatField()
    grid_export = serializers.FloatField()

    def validate(self, attrs):
        return StepRecord(**attrs)


class SorcScheduleSerializer(StrictSerializer):
    scenario_id = serializers.CharField()
    steps = StepRecordSerializer(many=True)
    production_cost = serializers.FloatField()
    storage_cost = serializers.FloatField()
    grid_cost = serializers.FloatField()
    objective = serializers.FloatField()
    degradation_mode = serializers.ChoiceField(choices=DegradationMode.choices)
    initial_soc = serializers.FloatField()
    nodes = serializers.IntegerField()
    iterations = serializers.IntegerField()

    def validate(self, attrs):
        attrs["steps"] = tuple(attrs["steps"])
        return SorcSchedule(**attrs)


def schedule_to_dict(schedule):
    return SorcScheduleSerializer(schedule).data


def schedule_from_dict(data):
    serializer = SorcScheduleSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.validated_data


class WeatherSerializer(StrictSerializer):
    """An inline or CSV irradiation series with a label, or a synthetic site week."""

    label = serializers.CharField(required=False)
    irradiation = SeriesField(required=False)
    site = serializers.ChoiceField(choices=sorted(SITES), required=False)
    week = serializers.ChoiceField(choices=list(WEEKS), required=False)

    def validate(self, attrs):
        synthetic = "site" in attrs or "week" in attrs
        if synthetic == ("irradiation" in attrs):
            raise serializers.ValidationError("Give either 'irradiation' or 'site' and 'week'.")
        if synthetic and not ("site" in attrs and "week" in attrs):
            raise serializers.ValidationError("Give both 'site' and 'week'.")
        if not synthetic and "label" not in attrs:
            raise serializers.ValidationError({"label": ["Required with an inline series."]})
        return attrs


class SweepDocumentSerializer(StrictSerializer):
    """A sweep over one axis of the scenario stored at ``base``."""

    version = serializers.IntegerField()
    base = serializers.CharField()
    axis = serializers.ChoiceField(choices=SweepAxis.choices)
    values = serializers.ListField(min_length=1)
    outputs = serializers.ListField(child=serializers.ChoiceField(choices=Metric.choices), required=False)
    compare_locations = serializers.BooleanField(default=False)

    validate_version = ScenarioDocumentSerializer.validate_version

    def value_field(self, axis):
        if axis == SweepAxis.SIZE:
            return serializers.FloatField(min_value=0.0)
        if axis == SweepAxis.FLUID:
            return serializers.ChoiceField(choices=[row[0] for row in FLUID_TABLE])
        if axis == SweepAxis.COLLECTOR:
            return serializers.ChoiceField(choices=[tech.value for tech, _ in COLLECTOR_EFFICIENCIES])
        return WeatherSerializer()

    def validate(self, attrs):
        field = self.value_field(attrs["axis"])
        parsed, errors = [], {}
        for k, value in enumerate(attrs["values"]):
            try:
                parsed.append(field.run_validation(value))
            except serializers.ValidationError as exc:
                errors[k] = exc.detail
        if errors:
            raise serializers.ValidationError({"values": errors})
        if attrs["compare_locations"] and attrs["axis"] != SweepAxis.WEATHER:
            raise serializers.ValidationError({"compare_locations": ["Only available on the weather axis."]})
        attrs["values"] = parsed
        return attrs
