"""The shipped demo community: three prosumers over one July day in Bologna."""

from .catalog import catalog_collector, catalog_fluid
from .models import BatterySpec, GridTariff, MicrogridScenario, OrcSpec, TimeGrid, TradeNetwork
from .weather import demand_profile, weekly_weather

STEPS = 24
PRICE_BUY = 0.25
PRICE_SELL = 0.05
TRANSMISSION_COST = 0.01

# id, fluid, collector, area [m²], plant size [kW], demand profile, peak demand [kW]
PROSUMERS = (
    ("farm", "Cyclohexane", "PTC", 20.0, 2.0, "industrial", 0.6),
    ("school", "R134a", "ETC", 12.0, 1.0, "household", 1.5),
    ("bakery", "Ethanol", "FPC", 8.0, 0.5, "industrial", 2.0),
)


def make_prosumer(prosumer_id, fluid, technology, area, size_kw, profile, peak_kw, sun):
    return MicrogridScenario(
        id=prosumer_id,
        time=TimeGrid(horizon=STEPS),
        fluid=catalog_fluid(fluid),
        collector=catalog_collector(technology, area),
        orc=OrcSpec(eta_cycle=0.15, eta_hx=0.9, x_min=0.0, x_max=size_kw, z_min=0.0, z_max=size_kw),
        battery=BatterySpec(eta_round=0.9, b_min=0.0, b_max=5.0, fade=0.2, throughput=1000.0, cost_cycle=0.001),
        tariff=GridTariff(g_min=-10.0, g_max=10.0, price_buy=(PRICE_BUY,) * STEPS, price_sell=(PRICE_SELL,) * STEPS),
        demand=tuple(demand_profile(profile, steps=STEPS, peak_kw=peak_kw)),
        irradiation=sun,
        production_cost=0.01,
    )


def demo_community():
    """``(scenarios, network)`` of the demo; the farm runs a surplus while the bakery stays short."""
    sun = tuple(weekly_weather("Bologna", "July").values[:STEPS])
    scenarios = [make_prosumer(*row, sun=sun) for row in PROSUMERS]
    network = TradeNetwork.uniform(
        [s.id for s in scenarios], STEPS, transmission_cost=TRANSMISSION_COST, grid_buy_cost=PRICE_BUY, grid_sell_cost=-PRICE_SELL
    )
    return scenarios, network
