from ...catalog import CATALOG_CONDITIONS, COLLECTOR_EFFICIENCIES, FLUID_TABLE, PLANT_SIZES_KW, catalog_fluid
from ..base import MicrogridCommand


class Command(MicrogridCommand):
    help = "Print the built-in working fluids, plant sizes and collector technologies."

    def handle(self, *args, **options):
        self.stdout.write("Working fluids")
        self.stdout.write(f"{'name':<12} {'MW [kg/mol]':>12} {'T_crit [°C]':>12} {'P_crit [MPa]':>13} {'Cp [J/kg°C]':>12} {'rho [kg/m3]':>12} {'dh_T [kJ/kg]':>13} {'dh_P [kJ/kg]':>13}")
        for name, molecular_weight, t_crit, p_crit, cp, density in FLUID_TABLE:
            fluid = catalog_fluid(name)
            self.stdout.write(
                f"{name:<12} {molecular_weight:>12g} {t_crit:>12g} {p_crit:>13g} {cp:>12g} {density:>12g} {fluid.dh_turbine:>13.6g} {fluid.dh_pump:>13.6g}"
            )
        conditions = CATALOG_CONDITIONS
        self.stdout.write(
            f"enthalpy drops at dT_T={conditions.dt_turbine:g} °C, dT_P={conditions.dt_pump:g} °C, "
            f"eta_T={conditions.eta_turbine:g}, eta_P={conditions.eta_pump:g}"
        )
        self.stdout.write("")
        self.stdout.write("Plant sizes [kW]")
        self.stdout.write(" ".join(f"{size:g}" for size in PLANT_SIZES_KW))
        self.stdout.write("")
        self.stdout.write("Solar collectors")
        for technology, efficiency in COLLECTOR_EFFICIENCIES:
            self.stdout.write(f"{technology.value:<6} {str(technology.label):<32} {efficiency:.0%}")
