"""Built-in working fluids, collector technologies and plant sizes.

Densities are kept exactly as tabulated even where they look implausible
for a liquid; every sensitivity study in this package compares fluids on
these numbers.
"""

from dataclasses import dataclass

from .models import CollectorSpec, CollectorTechnology, FluidProperties

DEFAULT_VELOCITY = 2.0  # m/s
DEFAULT_COLLECTOR_AREA = 10.0  # m²


@dataclass(frozen=True)
class WorkingConditions:
    dt_turbine: float
    dt_pump: float
    eta_turbine: float
    eta_pump: float


# shared by every catalog fluid so that only the fluid itself varies
CATALOG_CONDITIONS = WorkingConditions(dt_turbine=60.0, dt_pump=5.0, eta_turbine=0.80, eta_pump=0.70)

# name, molecular weight [kg/mol], T_crit [°C], P_crit [MPa], Cp [J/kg °C], density [kg/m³]
FLUID_TABLE = (
    ("Ethanol", 0.046, 240.8, 6.148, 2432.0, 0.253100481),
    ("Methanol", 0.032, 240.2, 8.104, 2512.0, 0.369822485),
    ("Cyclohexane", 0.084, 280.5, 4.075, 154.37, 0.632911392),
    ("R134a", 0.102, 101.0, 4.059, 1268.0, 0.8838),
    ("R141b", 0.11695, 204.2, 4.249, 895.0, 0.195),
    ("RC318", 0.2, 115.2, 2.778, 898.0, 0.028),
    ("R114", 0.17, 145.7, 3.289, 845.0, 0.05),
    ("R113", 0.187, 214.1, 3.439, 867.0, 0.215),
    ("R32", 0.052, 78.11, 5.784, 848.0, 0.011),
)

COLLECTOR_EFFICIENCIES = (
    (CollectorTechnology.FPC, 0.65),
    (CollectorTechnology.ETC, 0.87),
    (CollectorTechnology.CPC, 0.65),
    (CollectorTechnology.PTC, 0.85),
    (CollectorTechnology.LFR, 0.66),
)

PLANT_SIZES_KW = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5)


def catalog_fluid(name, velocity=DEFAULT_VELOCITY, conditions=CATALOG_CONDITIONS):
    for row in FLUID_TABLE:
        if row[0].lower() == name.lower():
            fluid_name, molecular_weight, t_crit, p_crit, cp, density = row
            return FluidProperties.from_temperatures(
                name=fluid_name,
                molecular_weight=molecular_weight,
                t_crit=t_crit,
                p_crit=p_crit,
                cp=cp,
                density=density,
                velocity=velocity,
                dt_turbine=conditions.dt_turbine,
                dt_pump=conditions.dt_pump,
                eta_turbine=conditions.eta_turbine,
                eta_pump=conditions.eta_pump,
            )
    raise KeyError(f"Unknown working fluid '{name}'")


def catalog_collector(technology, area=DEFAULT_COLLECTOR_AREA):
    for tech, efficiency in COLLECTOR_EFFICIENCIES:
        if tech.value.lower() == str(technology).lower():
            return CollectorSpec(technology=tech.value, efficiency=efficiency, area=area)
    raise KeyError(f"Unknown collector technology '{technology}'")


def builtin_catalog():
    """Return ``(fluids, collectors, sizes)`` exactly as tabulated."""
    fluids = [catalog_fluid(row[0]) for row in FLUID_TABLE]
    collectors = [catalog_collector(tech) for tech, _ in COLLECTOR_EFFICIENCIES]
    return fluids, collectors, list(PLANT_SIZES_KW)
