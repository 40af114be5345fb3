import os
import sys
from pathlib import Path

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
django.setup()

from django.conf import settings

# Import app modules after setup
from microgrid.demo import demo_community
from microgrid.io import ResultBundle, export_results, write_scenario
from microgrid.pipeline import run_pipeline

OUTPUT = Path("demo_output")


def create_demo_community():
    scenarios, network = demo_community()

    write_scenario(OUTPUT / "community.json", scenarios, network)
    print(f"Wrote scenario document: {OUTPUT / 'community.json'}")

    print("Solving prosumer schedules and clearing trades...")
    result = run_pipeline(scenarios, network)
    kpi = result.kpi
    currency = settings.MICROGRID["CURRENCY_LABEL"]
    for prosumer, cost in kpi.prosumer_costs.items():
        print(f"{prosumer}: local cost {cost:.4f} {currency}")
    print(f"peer-to-peer volume: {kpi.p2p_volume:.3f} kWh")
    print(f"community cost: {kpi.community_cost:.4f} {currency}")
    print(f"  grid-only trading: {kpi.baseline_grid_trading:.4f} (savings {kpi.savings_vs_grid_trading:.2%})")
    print(f"  no ORC plants: {kpi.baseline_no_orc:.4f} (savings {kpi.savings_vs_no_orc:.2%})")

    written = export_results(ResultBundle.for_community(scenarios, network, result, currency=currency), OUTPUT / "results")
    print(f"Wrote {len(written)} result files to {OUTPUT / 'results'}")

    if kpi.savings_vs_grid_trading <= 0:
        print("Peer-to-peer trading saved nothing over grid-only trading.")
        return 1
    print("\nDemo community solved successfully!")
    return 0


if __name__ == "__main__":
    sys.exit(create_demo_community())
