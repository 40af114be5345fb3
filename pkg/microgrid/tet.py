"""Community trade clearing over the prosumers' grid imbalances.

Each step is a transportation problem: sellers ship their surplus to
buyers or to a virtual grid node, and buyers receive their need from
sellers or from the grid. Seller and buyer balances are equalities, so
the grid node absorbs whatever the community cannot match internally.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError

from .exceptions import InfeasibleModel, UnboundedModel
from .milp import ModelBuilder, Sense, SolveStatus, irreducible_rows, solve_lp
from .models import GRID

logger = logging.getLogger(__name__)

# flows below this are reported as zero
FLOW_EPS = 1e-10


@dataclass(frozen=True)
class ImbalanceSet:
    """Per-participant grid exchange wished by each prosumer after its own schedule."""

    participants: tuple[str, ...]
    export_offer: dict[str, tuple[float, ...]]
    import_need: dict[str, tuple[float, ...]]

    @property
    def horizon(self):
        lengths = {len(series) for series in (*self.export_offer.values(), *self.import_need.values())}
        return lengths.pop() if len(lengths) == 1 else None

    @classmethod
    def from_schedules(cls, schedules, order=None):
        by_id = {schedule.scenario_id: schedule for schedule in schedules}
        participants = tuple(order) if order is not None else tuple(by_id)
        return cls(
            participants=participants,
            export_offer={p: tuple(by_id[p].e_out.tolist()) for p in participants},
            import_need={p: tuple(by_id[p].e_in.tolist()) for p in participants},
        )

    def offer(self, participant, step):
        return self.export_offer[participant][step - 1]

    def need(self, participant, step):
        return self.import_need[participant][step - 1]


def check_imbalances(imbalances, network):
    errors = {}
    if set(imbalances.participants) != set(network.participants) or len(imbalances.participants) != len(network.participants):
        errors["participants"] = [
            ValidationError(
                "Imbalance participants %(value)s do not match the network participants %(expected)s",
                code="mismatch",
                params={"value": list(imbalances.participants), "expected": list(network.participants)},
            )
        ]
    if imbalances.horizon is None:
        errors["horizon"] = [ValidationError("Imbalance series differ in length", code="length_mismatch", params={"value": None})]
    for kind in ("export_offer", "import_need"):
        for participant, series in getattr(imbalances, kind).items():
            if any(value < 0 for value in series):
                errors[f"{kind}.{participant}"] = [
                    ValidationError("must be >= 0", code="negative_entry", params={"value": min(series)})
                ]
    if errors:
        raise ValidationError(errors)


@dataclass
class TetVariableMap:
    """Model columns of one clearing model keyed by ``(seller, buyer, step)``.

    Grid arcs use ``GRID`` as seller (purchases) or buyer (sales).
    """

    flux: dict[tuple[str, str, int], int] = field(default_factory=dict)
    grid_sales: dict[tuple[str, int], int] = field(default_factory=dict)
    grid_purchases: dict[tuple[str, int], int] = field(default_factory=dict)
    h_in: dict[int, int] = field(default_factory=dict)
    h_out: dict[int, int] = field(default_factory=dict)

    def arcs(self):
        for (seller, buyer, step), index in self.flux.items():
            yield seller, buyer, step, index
        for (seller, step), index in self.grid_sales.items():
            yield seller, GRID, step, index
        for (buyer, step), index in self.grid_purchases.items():
            yield GRID, buyer, step, index


def build_tet_model(imbalances, network, steps=None):
    """Build the clearing LP over ``steps`` (all steps by default).

    Variable and row names use participant positions so that any id is
    MPS-safe.
    """
    check_imbalances(imbalances, network)
    steps = list(steps) if steps is not None else list(range(1, imbalances.horizon + 1))
    position = {p: k for k, p in enumerate(network.participants)}
    builder = ModelBuilder("tet")
    v = TetVariableMap()

    for t in steps:
        for seller, buyer in network.pairs():
            low, high = network.bounds(seller, buyer)
            v.flux[seller, buyer, t] = builder.add_var(
                f"f_{position[seller]}_{position[buyer]}_{t}", low, high, cost=network.arc_cost(seller, buyer, t)
            )
        for p in network.participants:
            v.grid_sales[p, t] = builder.add_var(f"f_{position[p]}_grid_{t}", cost=network.arc_cost(p, GRID, t))
            v.grid_purchases[p, t] = builder.add_var(f"f_grid_{position[p]}_{t}", cost=network.arc_cost(GRID, p, t))
        v.h_in[t] = builder.add_var(f"h_in_{t}")
        v.h_out[t] = builder.add_var(f"h_out_{t}")

        for p in network.participants:
            k = position[p]
            sold = [(v.flux[p, j, t], 1.0) for j in network.participants if j != p]
            builder.add_constraint(f"seller_{k}_{t}", sold + [(v.grid_sales[p, t], 1.0)], Sense.EQ, imbalances.offer(p, t))
            bought = [(v.flux[i, p, t], 1.0) for i in network.participants if i != p]
            builder.add_constraint(f"buyer_{k}_{t}", bought + [(v.grid_purchases[p, t], 1.0)], Sense.EQ, imbalances.need(p, t))
        builder.add_constraint(f"grid_out_{t}", [(v.h_out[t], 1.0)] + [(v.grid_sales[p, t], -1.0) for p in network.participants], Sense.EQ)
        builder.add_constraint(f"grid_in_{t}", [(v.h_in[t], 1.0)] + [(v.grid_purchases[p, t], -1.0) for p in network.participants], Sense.EQ)

    return builder.build(), v


@dataclass(frozen=True)
class Trade:
    step: int
    seller: str
    buyer: str
    kwh: float
    cost: float


@dataclass(frozen=True)
class TradeClearing:
    participants: tuple[str, ...]
    horizon: int
    flux: dict[tuple[str, str, int], float]
    grid_sales: dict[tuple[str, int], float]
    grid_purchases: dict[tuple[str, int], float]
    h_in: tuple[float, ...]
    h_out: tuple[float, ...]
    step_objectives: tuple[float, ...]
    iterations: int = 0

    @property
    def objective(self):
        return float(sum(self.step_objectives))

    @property
    def p2p_volume(self):
        return float(sum(self.flux.values()))

    def trades(self, network):
        """Positive flows in step order: peer arcs first, then grid sales and purchases."""
        rows = []
        for t in range(1, self.horizon + 1):
            for seller, buyer in network.pairs():
                kwh = self.flux.get((seller, buyer, t), 0.0)
                if kwh > 0:
                    rows.append(Trade(t, seller, buyer, kwh, kwh * network.arc_cost(seller, buyer, t)))
            for p in self.participants:
                kwh = self.grid_sales.get((p, t), 0.0)
                if kwh > 0:
                    rows.append(Trade(t, p, GRID, kwh, kwh * network.arc_cost(p, GRID, t)))
            for p in self.participants:
                kwh = self.grid_purchases.get((p, t), 0.0)
                if kwh > 0:
                    rows.append(Trade(t, GRID, p, kwh, kwh * network.arc_cost(GRID, p, t)))
        return rows

    def recomputed_objective(self, network):
        return float(sum(trade.cost for trade in self.trades(network)))


def _clean(value):
    return 0.0 if abs(value) < FLOW_EPS else max(float(value), 0.0)


def solve_tet(imbalances, network, limits=None):
    """Clear every step independently and assemble the community result."""
    check_imbalances(imbalances, network)
    horizon = imbalances.horizon
    flux, sales, purchases = {}, {}, {}
    h_in, h_out, objectives = [], [], []
    iterations = 0
    for t in range(1, horizon + 1):
        model, v = build_tet_model(imbalances, network, steps=[t])
        solution = solve_lp(model, limits.tolerances if limits else None)
        if solution.status == SolveStatus.INFEASIBLE:
            raise InfeasibleModel(irreducible_rows(model, limits), subject=f"Trade clearing at step {t}")
        if solution.status == SolveStatus.UNBOUNDED:
            raise UnboundedModel(f"Trade clearing at step {t} is unbounded")
        values = solution.values
        iterations += solution.iterations
        for key, index in v.flux.items():
            flux[key] = _clean(values[index])
        for key, index in v.grid_sales.items():
            sales[key] = _clean(values[index])
        for key, index in v.grid_purchases.items():
            purchases[key] = _clean(values[index])
        h_in.append(_clean(values[v.h_in[t]]))
        h_out.append(_clean(values[v.h_out[t]]))
        objectives.append(float(solution.objective))

    clearing = TradeClearing(
        participants=tuple(network.participants),
        horizon=horizon,
        flux=flux,
        grid_sales=sales,
        grid_purchases=purchases,
        h_in=tuple(h_in),
        h_out=tuple(h_out),
        step_objectives=tuple(objectives),
        iterations=iterations,
    )
    logger.info(f"Cleared {horizon} steps for {len(network.participants)} participants: cost {clearing.objective:.6g}, peer volume {clearing.p2p_volume:.6g} kWh")
    return clearing


def grid_only_clearing(imbalances, network, limits=None):
    """Clearing with every peer-to-peer arc closed."""
    return solve_tet(imbalances, network.restricted_to_grid(), limits)


def flux_matrix(clearing, step):
    """Seller-by-buyer kWh matrix of one step in participant order."""
    n = len(clearing.participants)
    matrix = np.zeros((n, n))
    for a, seller in enumerate(clearing.participants):
        for b, buyer in enumerate(clearing.participants):
            if a != b:
                matrix[a, b] = clearing.flux.get((seller, buyer, step), 0.0)
    return matrix
