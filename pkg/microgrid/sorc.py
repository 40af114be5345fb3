"""S-ORC scheduling model of one prosumer: build, solve, extract.

Units: x, z, g, q_in and q_solar are average kW over a step; battery flows,
state of charge, demand and grid exchanges are kWh per step. ``step_hours``
converts between the two wherever both appear in one row.
"""

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import InfeasibleModel, SolverLimitReached, UnboundedModel
from .milp import ModelBuilder, Sense, SolveStatus, VarKind, irreducible_rows, solve_milp
from .models import DegradationMode

logger = logging.getLogger(__name__)

# tolerance on the recomputed wear and capacity after a solve
WEAR_CHECK_TOL = 1e-6


@dataclass
class SorcVariableMap:
    """Model column of every S-ORC variable; list position ``t - 1`` holds step ``t``.

    ``soc`` also holds the initial state at position 0.
    """

    production: list[int] = field(default_factory=list)
    pump: list[int] = field(default_factory=list)
    net_grid: list[int] = field(default_factory=list)
    hx_thermal: list[int] = field(default_factory=list)
    solar_thermal: list[int] = field(default_factory=list)
    mass_flow: list[int] = field(default_factory=list)
    section_area: list[int] = field(default_factory=list)
    soc: list[int] = field(default_factory=list)
    charge: list[int] = field(default_factory=list)
    discharge: list[int] = field(default_factory=list)
    charging: list[int] = field(default_factory=list)
    discharging: list[int] = field(default_factory=list)
    cap_available: list[int] = field(default_factory=list)
    degradation: list[int] = field(default_factory=list)
    grid_import: list[int] = field(default_factory=list)
    grid_export: list[int] = field(default_factory=list)

    def all_indices(self):
        return [index for f in fields(self) for index in getattr(self, f.name)]


@dataclass(frozen=True)
class StepRecord:
    step: int
    production_kw: float
    pump_kw: float
    net_grid: float
    solar_thermal: float
    hx_thermal: float
    mass_flow: float
    section_area: float
    soc: float
    charge: float
    discharge: float
    cap_available: float
    degradation: float
    grid_import: float
    grid_export: float


@dataclass(frozen=True)
class SorcSchedule:
    scenario_id: str
    steps: tuple[StepRecord, ...]
    production_cost: float
    storage_cost: float
    grid_cost: float
    objective: float
    degradation_mode: str = DegradationMode.REMAINING_CAPACITY
    initial_soc: float = 0.0
    nodes: int = 0
    iterations: int = 0

    @property
    def total_cost(self):
        return self.production_cost + self.storage_cost + self.grid_cost

    @property
    def horizon(self):
        return len(self.steps)

    def series(self, name):
        return np.array([getattr(record, name) for record in self.steps], dtype=float)

    @property
    def e_in(self):
        return self.series("grid_import")

    @property
    def e_out(self):
        return self.series("grid_export")


@dataclass(frozen=True)
class MassFlowReport:
    fluid: str
    per_step: tuple[float, ...]
    peak: float


def solar_heat(scenario):
    """q_solar per step in kW."""
    collector = scenario.collector
    return [collector.efficiency * collector.area * irradiation for irradiation in scenario.irradiation]


def production_window(scenario, step):
    """Lowest and highest turbine output reachable at ``step``, with the rows that set them."""
    fluid, orc = scenario.fluid, scenario.orc
    dh_t, dh_p = fluid.dh_turbine, fluid.dh_pump
    q_solar = solar_heat(scenario)[step - 1]

    lows = [(orc.x_min, f"x_{step}")]
    highs = [(orc.x_max, f"x_{step}")]
    if dh_p > 0:
        lows.append((orc.z_min * dh_t / dh_p, f"pump_power_{step}"))
        highs.append((orc.z_max * dh_t / dh_p, f"pump_power_{step}"))
    elif orc.z_min > 0:
        lows.append((math.inf, f"pump_power_{step}"))
    highs.append((fluid.density * scenario.section_area_limit() * fluid.velocity * dh_t, f"mass_flow_{step}"))
    highs.append((scenario.orc.eta_cycle * orc.eta_hx * q_solar * dh_t / (dh_t - dh_p), f"heat_exchanger_{step}"))
    low = max(lows)
    high = min(highs)
    return low, high


def check_construction(scenario):
    """Raise ``InfeasibleModel`` when some step cannot meet its production bounds."""
    conflicts = []
    bad_steps = []
    for step in scenario.time.steps:
        (low, low_row), (high, high_row) = production_window(scenario, step)
        if low > high + 1e-9:
            bad_steps.append(step)
            for row in (low_row, high_row, f"net_power_{step}", f"turbine_power_{step}"):
                if row not in conflicts:
                    conflicts.append(row)
            if high_row == f"heat_exchanger_{step}":
                conflicts.append(f"solar_heat_{step}")
    if bad_steps:
        shown = ", ".join(str(s) for s in bad_steps[:10]) + (" ..." if len(bad_steps) > 10 else "")
        raise InfeasibleModel(conflicts, subject=f"Scenario {scenario.id}", detail=f"minimum production unreachable at steps {shown}")


def build_sorc_model(scenario, degradation=DegradationMode.REMAINING_CAPACITY):
    """Translate ``scenario`` into the S-ORC MILP.

    Raises ``InfeasibleModel`` before building when the production bounds
    of some step cannot be met whatever the schedule.
    """
    check_construction(scenario)
    dt = scenario.time.step_hours
    fluid, orc, battery, tariff = scenario.fluid, scenario.orc, scenario.battery, scenario.tariff
    eta_b = battery.eta_round
    wear = battery.wear_rate
    literal = degradation == DegradationMode.LITERAL
    q_solar = solar_heat(scenario)

    builder = ModelBuilder(f"sorc_{scenario.id}")
    v = SorcVariableMap()
    v.soc.append(builder.add_var("b_0", 0.0, 0.0))

    for t in scenario.time.steps:
        x = builder.add_var(f"x_{t}", orc.x_min, orc.x_max, cost=scenario.production_cost * dt)
        z = builder.add_var(f"z_{t}", orc.z_min, orc.z_max)
        g = builder.add_var(f"g_{t}", tariff.g_min, tariff.g_max)
        q_in = builder.add_var(f"q_in_{t}")
        q_sol = builder.add_var(f"q_solar_{t}")
        m = builder.add_var(f"m_{t}")
        area = builder.add_var(f"A_{t}", 0.0, scenario.section_area_limit())
        b = builder.add_var(f"b_{t}", 0.0 if literal else battery.b_min, battery.b_max)
        b_in = builder.add_var(f"b_in_{t}", battery.b_min if literal else 0.0, cost=battery.cost_cycle)
        b_out = builder.add_var(f"b_out_{t}", battery.b_min if literal else 0.0, cost=battery.cost_cycle)
        y_in = builder.add_var(f"y_in_{t}", 0.0, 1.0, kind=VarKind.BINARY)
        y_out = builder.add_var(f"y_out_{t}", 0.0, 1.0, kind=VarKind.BINARY)
        cap = builder.add_var(f"b_max_{t}", 0.0, math.inf if literal else battery.b_max)
        d = builder.add_var(f"d_{t}")
        e_in = builder.add_var(f"e_in_{t}", cost=tariff.price_buy[t - 1])
        e_out = builder.add_var(f"e_out_{t}", cost=-tariff.price_sell[t - 1])
        prev = v.soc[-1]

        builder.add_constraint(f"grid_balance_{t}", [(g, dt), (x, -dt), (z, dt), (b_in, eta_b), (b_out, -1.0 / eta_b)], Sense.EQ)
        builder.add_constraint(f"demand_cover_{t}", [(g, dt), (e_in, 1.0), (e_out, -1.0)], Sense.GE, scenario.demand[t - 1])
        builder.add_constraint(f"net_power_{t}", [(x, 1.0), (z, -1.0), (q_in, -orc.eta_cycle)], Sense.EQ)
        builder.add_constraint(f"turbine_power_{t}", [(x, 1.0), (m, -fluid.dh_turbine)], Sense.EQ)
        builder.add_constraint(f"pump_power_{t}", [(z, 1.0), (m, -fluid.dh_pump)], Sense.EQ)
        builder.add_constraint(f"mass_flow_{t}", [(m, 1.0), (area, -fluid.density * fluid.velocity)], Sense.EQ)
        builder.add_constraint(f"heat_exchanger_{t}", [(q_in, 1.0), (q_sol, -orc.eta_hx)], Sense.LE)
        builder.add_constraint(f"solar_heat_{t}", [(q_sol, 1.0)], Sense.EQ, q_solar[t - 1])
        builder.add_constraint(f"battery_level_{t}", [(b, 1.0), (prev, -1.0), (b_in, -eta_b), (b_out, 1.0 / eta_b)], Sense.EQ)
        builder.add_constraint(f"exclusive_mode_{t}", [(y_in, 1.0), (y_out, 1.0)], Sense.EQ, 1.0)
        builder.add_constraint(f"charge_limit_{t}", [(b_in, 1.0), (y_in, -battery.b_max)], Sense.LE)
        builder.add_constraint(f"discharge_limit_{t}", [(b_out, 1.0), (y_out, -battery.b_max)], Sense.LE)
        # |b^t - b^(t-1)| split into two rows
        builder.add_constraint(f"wear_up_{t}", [(d, 1.0), (b, -wear), (prev, wear)], Sense.GE)
        builder.add_constraint(f"wear_down_{t}", [(d, 1.0), (b, wear), (prev, -wear)], Sense.GE)
        if literal:
            builder.add_constraint(f"capacity_{t}", [(cap, 1.0), (d, -battery.b_max)], Sense.LE)
        else:
            terms = [(cap, 1.0), (d, battery.b_max)]
            if v.cap_available:
                terms.append((v.cap_available[-1], -1.0))
            builder.add_constraint(f"capacity_{t}", terms, Sense.EQ, 0.0 if v.cap_available else battery.b_max)
            builder.add_constraint(f"soc_capacity_{t}", [(b, 1.0), (cap, -1.0)], Sense.LE)
        builder.add_constraint(f"charge_capacity_{t}", [(b_in, 1.0), (cap, -1.0)], Sense.LE)
        builder.add_constraint(f"discharge_capacity_{t}", [(b_out, 1.0), (cap, -1.0)], Sense.LE)

        v.production.append(x)
        v.pump.append(z)
        v.net_grid.append(g)
        v.hx_thermal.append(q_in)
        v.solar_thermal.append(q_sol)
        v.mass_flow.append(m)
        v.section_area.append(area)
        v.soc.append(b)
        v.charge.append(b_in)
        v.discharge.append(b_out)
        v.charging.append(y_in)
        v.discharging.append(y_out)
        v.cap_available.append(cap)
        v.degradation.append(d)
        v.grid_import.append(e_in)
        v.grid_export.append(e_out)

    model = builder.build()
    logger.info(f"Built S-ORC model for {scenario.id}: {model.n_vars} variables, {model.n_rows} rows, {len(model.binaries)} binaries")
    return model, v


def _tightened_wear(scenario, soc):
    """Wear and remaining capacity recomputed as k·|Δb| from the solved state of charge."""
    battery = scenario.battery
    wear = battery.wear_rate * np.abs(np.diff(soc))
    capacity = battery.b_max - battery.b_max * np.cumsum(wear)
    return wear, capacity


def extract_schedule(scenario, solution, variables, degradation=DegradationMode.REMAINING_CAPACITY):
    values = solution.values

    def col(name, clip=True):
        series = values[np.asarray(getattr(variables, name), dtype=int)]
        return np.maximum(series, 0.0) if clip else series.copy()

    soc_all = col("soc")
    charge = np.where(col("charging") > 0.5, col("charge"), 0.0)
    discharge = np.where(col("discharging") > 0.5, col("discharge"), 0.0)
    wear, capacity = col("degradation"), col("cap_available")
    if degradation == DegradationMode.REMAINING_CAPACITY:
        tight_wear, tight_capacity = _tightened_wear(scenario, soc_all)
        slack = float(np.max(wear - tight_wear, initial=0.0))
        if slack > WEAR_CHECK_TOL:
            logger.debug(f"{scenario.id}: wear tightened by up to {slack:.3g}")
        over = np.maximum.reduce([soc_all[1:], charge, discharge]) - tight_capacity
        if over.size and over.max() > WEAR_CHECK_TOL * max(1.0, scenario.battery.b_max):
            logger.warning(f"{scenario.id}: tightened capacity exceeded by {over.max():.3g}")
        wear, capacity = tight_wear, tight_capacity

    # one prosumer either imports or exports in a step
    e_in, e_out = col("grid_import"), col("grid_export")
    net = e_in - e_out
    e_in, e_out = np.maximum(net, 0.0), np.maximum(-net, 0.0)

    x = col("production")
    dt = scenario.time.step_hours
    tariff = scenario.tariff
    production_cost = float(scenario.production_cost * dt * x.sum())
    storage_cost = float(scenario.battery.cost_cycle * (charge.sum() + discharge.sum()))
    grid_cost = float(np.dot(tariff.price_buy, e_in) - np.dot(tariff.price_sell, e_out))

    series = {
        "production_kw": x,
        "pump_kw": col("pump"),
        "net_grid": col("net_grid", clip=False),
        "solar_thermal": col("solar_thermal"),
        "hx_thermal": col("hx_thermal"),
        "mass_flow": col("mass_flow"),
        "section_area": col("section_area"),
        "soc": soc_all[1:],
        "charge": charge,
        "discharge": discharge,
        "cap_available": capacity,
        "degradation": wear,
        "grid_import": e_in,
        "grid_export": e_out,
    }
    steps = tuple(
        StepRecord(step=t, **{name: float(values_[t - 1]) for name, values_ in series.items()})
        for t in scenario.time.steps
    )
    return SorcSchedule(
        scenario_id=scenario.id,
        steps=steps,
        production_cost=production_cost,
        storage_cost=storage_cost,
        grid_cost=grid_cost,
        objective=float(solution.objective),
        degradation_mode=degradation,
        initial_soc=float(soc_all[0]),
        nodes=solution.nodes,
        iterations=solution.iterations,
    )


def solve_sorc(scenario, limits=None, degradation=DegradationMode.REMAINING_CAPACITY):
    """Solve the S-ORC model of ``scenario`` and return its schedule.

    Raises ``InfeasibleModel`` with the irreducible row names,
    ``SolverLimitReached`` when the node or time limit stops the search and
    ``UnboundedModel`` for a cost structure with no finite optimum.
    """
    model, variables = build_sorc_model(scenario, degradation)
    solution = solve_milp(model, limits)
    if solution.status == SolveStatus.INFEASIBLE:
        raise InfeasibleModel(irreducible_rows(model, limits), subject=f"Scenario {scenario.id}")
    if solution.status == SolveStatus.UNBOUNDED:
        raise UnboundedModel(f"Scenario {scenario.id}: objective is unbounded below")
    if solution.status == SolveStatus.GAP_LIMIT:
        raise SolverLimitReached(f"Scenario {scenario.id}: solver limit reached with gap {solution.gap:.3g} after {solution.nodes} nodes", solution)
    schedule = extract_schedule(scenario, solution, variables, degradation)
    logger.info(f"Scenario {scenario.id}: total cost {schedule.total_cost:.6g} after {solution.nodes} nodes")
    return schedule


def mass_flow_report(schedule, fluid):
    """Mass flow ρ·A·v per step and its peak, in kg/s."""
    per_step = tuple(fluid.density * record.section_area * fluid.velocity for record in schedule.steps)
    return MassFlowReport(fluid=fluid.name, per_step=per_step, peak=max(per_step, default=0.0))


def grid_only_cost(scenario):
    """Cost of buying every kWh of demand from the grid."""
    return float(np.dot(scenario.tariff.price_buy, scenario.demand))


def savings(baseline, cost):
    """Relative saving of ``cost`` against ``baseline``; 0 when the baseline is not positive."""
    return (baseline - cost) / baseline if baseline > 0 else 0.0
