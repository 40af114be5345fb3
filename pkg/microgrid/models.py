"""Domain types of one prosumer plant and of the trading community.

Everything here is an immutable value object. ``validate_scenario`` and
``validate_network`` check the type invariants and report every violation
at once.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping

from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from .validators import (
    FiniteValueValidator,
    FractionValidator,
    HalfOpenFractionValidator,
    NonNegativeSeriesValidator,
    NonNegativeValueValidator,
    PositiveValueValidator,
    SeriesLengthValidator,
)

logger = logging.getLogger(__name__)

GRID = "grid"


class CollectorTechnology(models.TextChoices):
    FPC = "FPC", _("Flat plate collector")
    ETC = "ETC", _("Evacuated tube collector")
    CPC = "CPC", _("Compound parabolic collector")
    PTC = "PTC", _("Parabolic trough collector")
    LFR = "LFR", _("Linear Fresnel reflector")
    CUSTOM = "Custom", _("Custom")


class DegradationMode(models.TextChoices):
    REMAINING_CAPACITY = "remaining_capacity", _("Remaining capacity")
    LITERAL = "literal", _("As printed")


@dataclass(frozen=True)
class TimeGrid:
    horizon: int
    step_hours: float = 1.0

    @property
    def steps(self):
        return range(1, self.horizon + 1)


def enthalpy_drops(cp, dt_turbine, dt_pump, eta_turbine, eta_pump):
    """Turbine and pump enthalpy drops in kJ/kg from J/(kg·°C) heat capacity."""
    dh_turbine = cp * dt_turbine * eta_turbine / 1000.0
    dh_pump = cp * dt_pump / (eta_pump * 1000.0)
    return dh_turbine, dh_pump


@dataclass(frozen=True)
class FluidProperties:
    name: str
    molecular_weight: float
    t_crit: float
    p_crit: float
    cp: float
    density: float
    velocity: float
    dh_turbine: float
    dh_pump: float

    @classmethod
    def from_temperatures(cls, *, name, molecular_weight, t_crit, p_crit, cp, density, velocity, dt_turbine, dt_pump, eta_turbine, eta_pump):
        dh_turbine, dh_pump = enthalpy_drops(cp, dt_turbine, dt_pump, eta_turbine, eta_pump)
        return cls(
            name=name,
            molecular_weight=molecular_weight,
            t_crit=t_crit,
            p_crit=p_crit,
            cp=cp,
            density=density,
            velocity=velocity,
            dh_turbine=dh_turbine,
            dh_pump=dh_pump,
        )


@dataclass(frozen=True)
class CollectorSpec:
    technology: str
    efficiency: float
    area: float


@dataclass(frozen=True)
class OrcSpec:
    eta_cycle: float
    eta_hx: float
    x_min: float
    x_max: float
    z_min: float
    z_max: float
    # None: derived from the fluid so the pipe section never limits x_max
    section_area_max: float | None = None


@dataclass(frozen=True)
class BatterySpec:
    eta_round: float
    b_min: float
    b_max: float
    fade: float
    throughput: float
    cost_cycle: float

    @property
    def wear_rate(self):
        """Capacity fraction lost per kWh moved in or out of the battery."""
        return self.fade / self.throughput


@dataclass(frozen=True)
class GridTariff:
    g_min: float
    g_max: float
    price_buy: tuple[float, ...]
    price_sell: tuple[float, ...]

    @classmethod
    def flat(cls, horizon, *, g_min, g_max, price_buy, price_sell=0.0):
        return cls(g_min=g_min, g_max=g_max, price_buy=(float(price_buy),) * horizon, price_sell=(float(price_sell),) * horizon)


@dataclass(frozen=True)
class MicrogridScenario:
    id: str
    time: TimeGrid
    fluid: FluidProperties
    collector: CollectorSpec
    orc: OrcSpec
    battery: BatterySpec
    tariff: GridTariff
    demand: tuple[float, ...]
    irradiation: tuple[float, ...]
    production_cost: float

    def section_area_limit(self):
        """Upper bound of the pipe section, large enough to pass x_max."""
        if self.orc.section_area_max is not None:
            return self.orc.section_area_max
        fluid = self.fluid
        return self.orc.x_max / (fluid.density * fluid.velocity * fluid.dh_turbine)

    def with_changes(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class TradeNetwork:
    """Participants and arc data of the trading community.

    Pair-keyed mappings use ``(seller, buyer)`` tuples. Missing pairs take
    ``f_min = 0``, ``f_max = inf`` and zero transmission cost.
    """

    participants: tuple[str, ...]
    f_min: Mapping[tuple[str, str], float] = field(default_factory=dict)
    f_max: Mapping[tuple[str, str], float] = field(default_factory=dict)
    transmission_cost: Mapping[tuple[str, str], tuple[float, ...]] = field(default_factory=dict)
    grid_buy_cost: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    grid_sell_cost: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    @classmethod
    def uniform(cls, participants, horizon, *, transmission_cost, grid_buy_cost, grid_sell_cost, f_max=math.inf):
        participants = tuple(participants)
        pairs = [(i, j) for i in participants for j in participants if i != j]
        return cls(
            participants=participants,
            f_min={pair: 0.0 for pair in pairs},
            f_max={pair: f_max for pair in pairs},
            transmission_cost={pair: (float(transmission_cost),) * horizon for pair in pairs},
            grid_buy_cost={p: (float(grid_buy_cost),) * horizon for p in participants},
            grid_sell_cost={p: (float(grid_sell_cost),) * horizon for p in participants},
        )

    def pairs(self):
        return [(i, j) for i in self.participants for j in self.participants if i != j]

    def bounds(self, seller, buyer):
        return self.f_min.get((seller, buyer), 0.0), self.f_max.get((seller, buyer), math.inf)

    def arc_cost(self, seller, buyer, step):
        if seller == GRID:
            return _at(self.grid_buy_cost.get(buyer), step)
        if buyer == GRID:
            return _at(self.grid_sell_cost.get(seller), step)
        return _at(self.transmission_cost.get((seller, buyer)), step)

    def restricted_to_grid(self):
        """The same community with every peer-to-peer arc closed."""
        zero = {pair: 0.0 for pair in self.pairs()}
        return replace(self, f_min=zero, f_max=dict(zero))


def _at(series, step):
    if not series:
        return 0.0
    return series[step - 1]


# Where each parameter symbol of the models lives.
PARAMETER_SYMBOLS = {
    "T": "time.horizon",
    "eta_th": "orc.eta_hx",
    "eta_b": "battery.eta_round",
    "eta_I": "orc.eta_cycle",
    "eta_solar": "collector.efficiency",
    "c_p": "production_cost",
    "c_b": "battery.cost_cycle",
    "x_min": "orc.x_min",
    "x_max": "orc.x_max",
    "z_min": "orc.z_min",
    "z_max": "orc.z_max",
    "g_min": "tariff.g_min",
    "g_max": "tariff.g_max",
    "b_min": "battery.b_min",
    "b_max": "battery.b_max",
    "D": "demand",
    "v": "fluid.velocity",
    "A_solar": "collector.area",
    "I_solar": "irradiation",
    "rho": "fluid.density",
    "dh_P": "fluid.dh_pump",
    "dh_T": "fluid.dh_turbine",
    "C_p": "fluid.cp",
    "B_fade": "battery.fade",
    "B_throughput": "battery.throughput",
    "N": "network.participants",
    "c_T": "network.transmission_cost",
    "f_min": "network.f_min",
    "f_max": "network.f_max",
}


@dataclass(frozen=True)
class Violation:
    path: str
    message: str
    value: object

    def __str__(self):
        return self.message


class ScenarioInvalid(ValidationError):
    """All invariant violations of a scenario or network, keyed by field path."""

    @property
    def violations(self):
        found = []
        for path, errors in self.error_dict.items():
            for error in errors:
                params = error.params or {}
                text = error.message % params if params else str(error.message)
                found.append(Violation(path=path, message=f"{path} {text}", value=params.get("show_value", params.get("value"))))
        return found

    def __str__(self):
        return "; ".join(v.message for v in self.violations)


class _ErrorCollector:
    def __init__(self):
        self.errors = defaultdict(list)

    def check(self, path, value, *validators):
        for validator in validators:
            try:
                validator(value)
            except ValidationError as e:
                self.errors[path].extend(e.error_list)
                return False
        return True

    def add(self, path, message, code, **params):
        self.errors[path].append(ValidationError(message, code=code, params=params))

    def raise_if_any(self):
        if self.errors:
            raise ScenarioInvalid(dict(self.errors))


def validate_scenario(raw):
    """Return ``raw`` unchanged when every invariant holds, else raise ``ScenarioInvalid``."""
    errors = _ErrorCollector()
    positive = [FiniteValueValidator(), PositiveValueValidator()]
    non_negative = [FiniteValueValidator(), NonNegativeValueValidator()]
    fraction = [FiniteValueValidator(), FractionValidator()]

    errors.check("time.step_hours", raw.time.step_hours, *positive)
    horizon_ok = isinstance(raw.time.horizon, int) and not isinstance(raw.time.horizon, bool) and raw.time.horizon >= 1
    if not horizon_ok:
        errors.add("time.horizon", _("must be an integer >= 1"), "min_value", value=raw.time.horizon)

    fluid = raw.fluid
    errors.check("fluid.density", fluid.density, *positive)
    errors.check("fluid.velocity", fluid.velocity, *positive)
    if errors.check("fluid.dh_pump", fluid.dh_pump, *non_negative) and errors.check("fluid.dh_turbine", fluid.dh_turbine, FiniteValueValidator()):
        if fluid.dh_turbine <= fluid.dh_pump:
            errors.add("fluid.dh_turbine", _("must be > fluid.dh_pump (%(limit)s)"), "min_value", value=fluid.dh_turbine, limit=fluid.dh_pump)

    collector = raw.collector
    if collector.technology not in CollectorTechnology.values:
        errors.add("collector.technology", _("must be one of %(choices)s"), "invalid_choice", value=collector.technology, choices=", ".join(CollectorTechnology.values))
    errors.check("collector.efficiency", collector.efficiency, *fraction)
    errors.check("collector.area", collector.area, *positive)

    orc = raw.orc
    errors.check("orc.eta_cycle", orc.eta_cycle, *fraction)
    errors.check("orc.eta_hx", orc.eta_hx, *fraction)
    for low, high in (("x_min", "x_max"), ("z_min", "z_max")):
        low_ok = errors.check(f"orc.{low}", getattr(orc, low), *non_negative)
        high_ok = errors.check(f"orc.{high}", getattr(orc, high), FiniteValueValidator())
        if low_ok and high_ok and getattr(orc, high) < getattr(orc, low):
            errors.add(f"orc.{high}", _("must be >= orc.%(low)s (%(limit)s)"), "min_value", value=getattr(orc, high), low=low, limit=getattr(orc, low))
    if orc.section_area_max is not None:
        errors.check("orc.section_area_max", orc.section_area_max, *positive)

    battery = raw.battery
    errors.check("battery.eta_round", battery.eta_round, *fraction)
    b_min_ok = errors.check("battery.b_min", battery.b_min, *non_negative)
    b_max_ok = errors.check("battery.b_max", battery.b_max, FiniteValueValidator())
    if b_min_ok and b_max_ok and battery.b_max < battery.b_min:
        errors.add("battery.b_max", _("must be >= battery.b_min (%(limit)s)"), "min_value", value=battery.b_max, limit=battery.b_min)
    errors.check("battery.fade", battery.fade, FiniteValueValidator(), HalfOpenFractionValidator())
    errors.check("battery.throughput", battery.throughput, *positive)
    errors.check("battery.cost_cycle", battery.cost_cycle, FiniteValueValidator())
    errors.check("production_cost", raw.production_cost, FiniteValueValidator())

    tariff = raw.tariff
    g_ok = errors.check("tariff.g_min", tariff.g_min, FiniteValueValidator()) & errors.check("tariff.g_max", tariff.g_max, FiniteValueValidator())
    if g_ok and tariff.g_min > tariff.g_max:
        errors.add("tariff.g_max", _("must be >= tariff.g_min (%(limit)s)"), "min_value", value=tariff.g_max, limit=tariff.g_min)

    series = {
        "demand": raw.demand,
        "irradiation": raw.irradiation,
        "tariff.price_buy": tariff.price_buy,
        "tariff.price_sell": tariff.price_sell,
    }
    lengths_ok = True
    for path, values in series.items():
        checks = [NonNegativeSeriesValidator()]
        if horizon_ok:
            checks.insert(0, SeriesLengthValidator(raw.time.horizon))
        lengths_ok &= errors.check(path, values, *checks)
    if lengths_ok and horizon_ok:
        for step, (buy, sell) in enumerate(zip(tariff.price_buy, tariff.price_sell)):
            if buy < sell:
                errors.add("tariff.price_buy", _("must be >= tariff.price_sell at step %(step)s"), "arbitrage", value=buy, step=step)
                break

    errors.raise_if_any()
    return raw


def validate_network(net, horizon=None):
    errors = _ErrorCollector()
    participants = list(net.participants)
    if len(set(participants)) != len(participants):
        errors.add("participants", _("must be unique"), "duplicate", value=participants)
    if GRID in participants:
        errors.add("participants", _("'%(name)s' is reserved for the grid node"), "reserved", value=GRID, name=GRID)
    known = set(participants)

    for name in ("f_min", "f_max", "transmission_cost"):
        for seller, buyer in getattr(net, name):
            if seller == buyer:
                errors.add(f"{name}.{seller}.{buyer}", _("self-arcs are not allowed"), "self_arc", value=seller)
            elif seller not in known or buyer not in known:
                errors.add(f"{name}.{seller}.{buyer}", _("refers to an unknown participant"), "unknown", value=(seller, buyer))

    for seller, buyer in net.pairs():
        low, high = net.bounds(seller, buyer)
        if low > high:
            errors.add(f"f_max.{seller}.{buyer}", _("must be >= f_min (%(limit)s)"), "min_value", value=high, limit=low)
        if low < 0:
            errors.add(f"f_min.{seller}.{buyer}", _("must be >= 0"), "min_value", value=low)
        costs = net.transmission_cost.get((seller, buyer), ())
        path = f"transmission_cost.{seller}.{buyer}"
        checks = [NonNegativeSeriesValidator()]
        if horizon is not None and costs:
            checks.insert(0, SeriesLengthValidator(horizon))
        errors.check(path, costs, *checks)

    for name in ("grid_buy_cost", "grid_sell_cost"):
        for participant, costs in getattr(net, name).items():
            if participant not in known:
                errors.add(f"{name}.{participant}", _("refers to an unknown participant"), "unknown", value=participant)
            elif horizon is not None:
                errors.check(f"{name}.{participant}", costs, SeriesLengthValidator(horizon))
            if any(not math.isfinite(c) for c in costs):
                errors.add(f"{name}.{participant}", _("must be finite"), "finite", value=list(costs))

    errors.raise_if_any()
    return net
