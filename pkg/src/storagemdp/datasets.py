"""Bundled synthetic market data.

The generator draws a price series that is low in the first half of each
day (cheapest overnight) and high and volatile in the second half, easing
back by midnight.  It also draws an evening-peaking community load and a
wind-like renewable series.  The CSVs shipped in ``data/`` were
produced by :func:`write_bundled` with the default arguments; they are
committed so that regression checks run against fixed numbers.
"""
from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .dataio import RunConfig, Scenario, bundled_path, scenario_from_config, write_series
from .market import SlopeTable
from .mdp import MdpInstance

STAGES_PER_DAY = 288
START = datetime(2020, 9, 1, tzinfo=timezone.utc)


def generate_synthetic(days: int = 15, seed: int = 2020) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    n = days * STAGES_PER_DAY
    hour = (np.arange(n) % STAGES_PER_DAY) / 12.0

    # price: cheapest and calm overnight, rising through the morning,
    # expensive and volatile from noon with a late-evening decline
    morning = 14.0 + 1.2 * hour
    evening = 30.0 + 22.0 * np.sin(np.pi * np.clip(hour - 12.0, 0.0, 12.0) / 12.0) ** 0.8
    evening -= 16.0 * np.clip((hour - 21.0) / 3.0, 0.0, 1.0)
    shape = np.where(hour < 12.0, morning, evening)
    daily = np.repeat(rng.normal(0.0, 3.0, days), STAGES_PER_DAY)
    noise = np.zeros(n)
    eps = rng.normal(0.0, 1.0, n)
    for t in range(1, n):
        noise[t] = 0.9 * noise[t - 1] + eps[t]
    vol = np.where(hour >= 12.0, 2.5, np.where(hour < 6.0, 0.4, 1.0))
    price = shape + daily + vol * noise
    spikes = (hour >= 16.0) & (hour < 20.0) & (rng.random(n) < 0.03)
    price = price + spikes * rng.uniform(10.0, 30.0, n)
    price = np.clip(price, 3.0, 200.0)

    # community maximum load: evening peak
    load = 12.0 + 4.0 * np.exp(-0.5 * ((hour - 18.5) / 2.5) ** 2) + 1.5 * np.exp(-0.5 * ((hour - 8.0) / 1.5) ** 2)
    load = load + 0.3 * rng.normal(size=n)

    # wind: mean-reverting, clipped to turbine limits
    wind = np.empty(n)
    wind[0] = 3.0
    shocks = rng.normal(0.0, 0.25, n)
    for t in range(1, n):
        wind[t] = wind[t - 1] + 0.01 * (3.0 - wind[t - 1]) + shocks[t]
    wind = np.clip(wind, 0.0, 8.0)
    return {"price": price, "load": load, "renewable": wind}


def timestamps(n: int) -> list[datetime]:
    return [START + timedelta(minutes=5 * i) for i in range(n)]


def write_bundled(directory: "str | Path | None" = None, days: int = 15, seed: int = 2020) -> Path:
    directory = Path(directory) if directory is not None else bundled_path("")
    directory.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(days, seed)
    stamps = timestamps(data["price"].size)
    write_series(directory / "synthetic_prices.csv", stamps, np.round(data["price"], 4), "price_usd_per_mwh")
    write_series(directory / "synthetic_load.csv", stamps, np.round(data["load"], 4), "max_load_mwh")
    write_series(directory / "synthetic_renewable.csv", stamps, np.round(data["renewable"], 4), "re_mwh")
    SlopeTable.table_one().to_csv(directory / "table1_slopes.csv")
    return directory


def bundled_scenario(**config) -> Scenario:
    """Scenario over the full bundled dataset (defaults of :class:`RunConfig`)."""
    return scenario_from_config(RunConfig(**config))


def bundled_day(day: int = 0, **config) -> MdpInstance:
    """One synthetic day (288 stages) with the default storage and market."""
    return bundled_scenario(**config).instance(day * STAGES_PER_DAY, STAGES_PER_DAY)
