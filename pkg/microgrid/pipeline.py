"""Two-stage community solve: every prosumer's S-ORC schedule, then trade clearing."""

import logging
from dataclasses import asdict, dataclass
from typing import NamedTuple

from django.core.exceptions import ValidationError

from .models import DegradationMode, validate_network
from .sorc import grid_only_cost, savings
from .tasks import raise_failure, schedule_from_result, solve_sorc_task, sorc_payload
from .exceptions import PipelineError
from .tet import ImbalanceSet, grid_only_clearing, solve_tet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KpiReport:
    """Community cost against two reference setups.

    ``baseline_grid_trading`` keeps every schedule but settles all
    imbalances with the grid; ``baseline_no_orc`` buys all demand from the
    grid at each prosumer's tariff.
    """

    prosumer_costs: dict[str, float]
    standalone_costs: dict[str, float]
    trading_cost: float
    community_cost: float
    baseline_grid_trading: float
    baseline_no_orc: float
    savings_vs_grid_trading: float
    savings_vs_no_orc: float
    p2p_volume: float
    grid_import: float
    grid_export: float

    @property
    def trading_gain(self):
        return self.baseline_grid_trading - self.community_cost

    def as_dict(self):
        data = asdict(self)
        data["trading_gain"] = self.trading_gain
        return data

    @classmethod
    def build(cls, scenarios, schedules, clearing, baseline_clearing):
        local = {s.scenario_id: s.production_cost + s.storage_cost for s in schedules}
        local_total = sum(local.values())
        community_cost = local_total + clearing.objective
        baseline_a = local_total + baseline_clearing.objective
        baseline_b = sum(grid_only_cost(s) for s in scenarios)
        return cls(
            prosumer_costs=local,
            standalone_costs={s.scenario_id: s.total_cost for s in schedules},
            trading_cost=clearing.objective,
            community_cost=community_cost,
            baseline_grid_trading=baseline_a,
            baseline_no_orc=baseline_b,
            savings_vs_grid_trading=savings(baseline_a, community_cost),
            savings_vs_no_orc=savings(baseline_b, community_cost),
            p2p_volume=clearing.p2p_volume,
            grid_import=float(sum(clearing.h_in)),
            grid_export=float(sum(clearing.h_out)),
        )


class PipelineResult(NamedTuple):
    schedules: list
    clearing: object
    kpi: KpiReport


def check_community(scenarios, network):
    if not scenarios:
        raise ValidationError({"scenarios": [ValidationError("At least one scenario is required", code="required", params={"value": 0})]})
    ids = [s.id for s in scenarios]
    errors = {}
    if sorted(ids) != sorted(network.participants) or len(set(ids)) != len(ids):
        errors["participants"] = [
            ValidationError(
                "Scenario ids %(value)s do not match the network participants %(expected)s",
                code="mismatch",
                params={"value": ids, "expected": list(network.participants)},
            )
        ]
    horizons = {s.time.horizon for s in scenarios}
    if len(horizons) > 1:
        errors["horizon"] = [ValidationError("Scenarios have different horizons %(value)s", code="length_mismatch", params={"value": sorted(horizons)})]
    if errors:
        raise ValidationError(errors)
    validate_network(network, horizons.pop())


def solve_schedules(scenarios, limits=None, degradation=DegradationMode.REMAINING_CAPACITY):
    """Stage 1: one task per prosumer; results keep the input order."""
    results = [solve_sorc_task.delay(sorc_payload(s, limits, degradation)) for s in scenarios]
    schedules = []
    for scenario, result in zip(scenarios, results):
        outcome = result.get()
        if not outcome["ok"]:
            try:
                raise_failure(outcome, subject=f"Scenario {scenario.id}")
            except Exception as cause:
                raise PipelineError(scenario.id, cause) from cause
        schedules.append(schedule_from_result(outcome))
    return schedules


def run_pipeline(scenarios, network, limits=None, degradation=DegradationMode.REMAINING_CAPACITY):
    """Solve every prosumer, clear the community and report KPIs.

    Any stage-1 failure raises ``PipelineError`` naming the prosumer and
    stage 2 is skipped.
    """
    check_community(scenarios, network)
    by_id = {s.id: s for s in scenarios}
    ordered = [by_id[p] for p in network.participants]
    schedules = solve_schedules(ordered, limits, degradation)
    imbalances = ImbalanceSet.from_schedules(schedules, order=network.participants)
    clearing = solve_tet(imbalances, network, limits)
    baseline = grid_only_clearing(imbalances, network, limits)
    kpi = KpiReport.build(ordered, schedules, clearing, baseline)
    logger.info(
        f"Community of {len(schedules)}: cost {kpi.community_cost:.6g}, "
        f"grid-trading baseline {kpi.baseline_grid_trading:.6g}, savings {kpi.savings_vs_grid_trading:.2%}"
    )
    return PipelineResult(schedules, clearing, kpi)
