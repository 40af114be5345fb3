"""Synthetic weather and demand profiles.

Everything here is generated, not measured: a clear-sky beam irradiation
model driven by latitude and day of year, and stylised demand shapes. The
profiles are meant for demos and sensitivity studies only.
"""

import math
from dataclasses import dataclass

import numpy as np

SOLAR_CONSTANT = 1.0  # kW/m² reaching the top of a clear atmosphere, rounded
HOURS_PER_WEEK = 168

SITES = {
    "Bologna": 44.4949,
    "Tromso": 69.6492,
}

# first day of year of each representative week
WEEKS = {
    "January": 15,
    "April": 105,
    "July": 196,
    "August": 227,
    "October": 288,
    "December": 349,
}


@dataclass(frozen=True)
class LabeledSeries:
    label: str
    values: tuple[float, ...]
    synthetic: bool = True


def solar_altitude_sine(latitude, day_of_year, solar_hour):
    declination = math.radians(23.45) * np.sin(np.radians(360.0 / 365.0 * (284 + day_of_year)))
    hour_angle = np.radians(15.0 * (solar_hour - 12.0))
    phi = math.radians(latitude)
    return np.sin(phi) * np.sin(declination) + np.cos(phi) * np.cos(declination) * np.cos(hour_angle)


def clear_sky_irradiation(latitude, start_day, steps=HOURS_PER_WEEK, step_hours=1.0):
    """Beam irradiation on a horizontal collector in kW/m², sampled at step midpoints."""
    hours = (np.arange(steps) + 0.5) * step_hours
    days = start_day + np.floor(hours / 24.0)
    sin_alt = solar_altitude_sine(latitude, days, hours % 24.0)
    up = sin_alt > 1e-3
    irradiation = np.zeros(steps)
    air_mass = 1.0 / sin_alt[up]
    irradiation[up] = SOLAR_CONSTANT * 0.7 ** (air_mass**0.678) * sin_alt[up]
    return tuple(float(v) for v in irradiation)


def weekly_weather(site, week, step_hours=1.0):
    steps = int(round(HOURS_PER_WEEK / step_hours))
    values = clear_sky_irradiation(SITES[site], WEEKS[week], steps, step_hours)
    return LabeledSeries(label=f"{site}-{week}", values=values)


def site_weeks(sites=("Bologna", "Tromso"), weeks=("January", "April", "July", "October"), step_hours=1.0):
    return [weekly_weather(site, week, step_hours) for site in sites for week in weeks]


def demand_profile(kind, steps=HOURS_PER_WEEK, peak_kw=1.0, step_hours=1.0):
    """Demand in kWh per step.

    ``industrial`` draws ``peak_kw`` around the clock; ``household`` has
    a morning and a stronger evening peak over a base load.
    """
    hours = ((np.arange(steps) + 0.5) * step_hours) % 24.0
    if kind == "industrial":
        shape = np.ones(steps)
    elif kind == "household":
        shape = 0.3 + 0.6 * np.exp(-((hours - 8.0) ** 2) / 2.0) + np.exp(-((hours - 19.5) ** 2) / 4.5)
        shape /= shape.max()
    else:
        raise KeyError(f"Unknown demand profile '{kind}'")
    return tuple(float(v) for v in peak_kw * step_hours * shape)
