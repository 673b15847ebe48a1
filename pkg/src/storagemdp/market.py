"""Closed-form market physics for a price-maker community storage.

The community bids load, renewable output and storage separately into a
real-time market.  Only three pieces of market information are needed to
price the storage's own impact: the ex-ante price forecast, the local slope
``h`` of the aggregate supply curve around that forecast, and the total
demand elasticity ``b_all``.  Everything here is a pure function of its
arguments; the scalar functions also broadcast over numpy arrays.

Conventions: money in $, energy in MWh per stage.  ``u`` and ``w`` are
storage-side charge/discharge quantities; the grid sees ``u / eta_c`` and
``eta_d * w``.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)


class ObjectiveMode(str, enum.Enum):
    """What the storage owner optimizes."""

    PRICE_TAKER = "price_taker"  # ignores its own price impact
    PROFIT_MAX = "profit_max"  # arbitrage with price impact
    WELFARE_MAX = "welfare_max"  # arbitrage plus community welfare change

    @classmethod
    def parse(cls, value: "str | ObjectiveMode") -> "ObjectiveMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"pricetaker": "price_taker", "profitmax": "profit_max", "welfaremax": "welfare_max"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown objective mode {value!r}") from None


@dataclass(frozen=True)
class DemandParams:
    """Linear community demand ``a - b p`` that vanishes above ``p_max``."""

    a: float
    b: float
    p_max: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"maximum load a must be >= 0, got {self.a}")
        if self.b <= 0:
            raise ValueError(f"elasticity b must be > 0, got {self.b}")
        if self.p_max <= 0:
            raise ValueError(f"p_max must be > 0, got {self.p_max}")


@dataclass(frozen=True)
class SlopeTable:
    """Supply-curve slope by ex-ante price band.

    ``bands`` holds ``(price_lo, price_hi, slope)`` triples covering
    contiguous half-open intervals ``[lo, hi)``.
    """

    bands: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        bands = tuple((float(lo), float(hi), float(s)) for lo, hi, s in self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands:
            raise ValueError("slope table needs at least one band")
        for i, (lo, hi, s) in enumerate(bands):
            if not hi > lo:
                raise ValueError(f"band {i}: price_hi {hi} must exceed price_lo {lo}")
            if s < 0:
                raise ValueError(f"band {i}: slope {s} is negative")
            if i and lo != bands[i - 1][1]:
                raise ValueError(f"band {i} starts at {lo}, previous band ends at {bands[i - 1][1]}")

    @classmethod
    def table_one(cls) -> "SlopeTable":
        """Typical real-time supply-curve slopes (PJM 2019, scaled)."""
        return cls(
            (
                (0.0, 2.0, 0.004),
                (2.0, 16.0, 0.131),
                (16.0, 25.0, 0.043),
                (25.0, 38.0, 0.166),
                (38.0, 57.0, 0.665),
                (57.0, 240.0, 6.020),
            )
        )

    @classmethod
    def from_csv(cls, path: "str | Path") -> "SlopeTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"price_lo", "price_hi", "slope"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.append((float(row["price_lo"]), float(row["price_hi"]), float(row["slope"])))
                except (TypeError, ValueError):
                    raise ValueError(f"{path}:{lineno}: malformed slope row {row}") from None
        return cls(tuple(rows))

    def to_csv(self, path: "str | Path") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["price_lo", "price_hi", "slope"])
            for lo, hi, s in self.bands:
                writer.writerow([repr(lo), repr(hi), repr(s)])

    @property
    def edges(self) -> np.ndarray:
        return np.array([b[0] for b in self.bands] + [self.bands[-1][1]])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([b[2] for b in self.bands])


@dataclass(frozen=True)
class MarketParams:
    demand: DemandParams
    slope_table: SlopeTable
    b_all: float

    def __post_init__(self):
        if not self.b_all > self.demand.b:
            raise ValueError(
                f"total elasticity b_all={self.b_all} must exceed community elasticity b={self.demand.b}"
            )


@dataclass(frozen=True)
class StageMarket:
    """Market data resolved for one stage."""

    p0_forecast: float
    h: float
    a_t: float

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"supply slope h must be >= 0, got {self.h}")


def demand(p, d: DemandParams):
    """Community load at price ``p``, clamped at zero."""
    p = np.asarray(p, dtype=float)
    load = np.where(p <= d.p_max, np.maximum(d.a - d.b * p, 0.0), 0.0)
    return load if load.ndim else float(load)


def slope_lookup(p0, table: SlopeTable):
    """Slope of the band containing the forecast price ``p0``.

    Prices outside the table are clamped to the nearest band.
    """
    p0 = np.asarray(p0, dtype=float)
    edges = table.edges
    if np.any(p0 < edges[0]) or np.any(p0 >= edges[-1]):
        log.warning(
            "forecast price outside slope table [%g, %g); clamping to nearest band", edges[0], edges[-1]
        )
    idx = np.clip(np.searchsorted(edges, p0, side="right") - 1, 0, len(table.bands) - 1)
    out = table.slopes[idx]
    return out if out.ndim else float(out)


def _impact(h, b_all):
    return 1.0 + b_all * h


def ex_ante_price(stage: StageMarket, re, mp: MarketParams):
    """Mean market price after the community renewable bids, before storage acts."""
    return stage.p0_forecast - stage.h * np.asarray(re, dtype=float) / _impact(stage.h, mp.b_all)


def ex_post_charge_price(p_t, u, stage: StageMarket, mp: MarketParams, eta_c: float):
    return p_t + stage.h * u / eta_c / _impact(stage.h, mp.b_all)


def ex_post_discharge_price(p_t, w, stage: StageMarket, mp: MarketParams, eta_d: float):
    return p_t - stage.h * eta_d * w / _impact(stage.h, mp.b_all)


def _charge_gain(h, b_all, eta_c):
    return h / eta_c / _impact(h, b_all)


def _discharge_gain(h, b_all, eta_d):
    return h * eta_d / _impact(h, b_all)


def welfare_charge(u, re, p_t, stage: StageMarket, mp: MarketParams, eta_c: float):
    """Net community welfare change from charging ``u`` (usually negative)."""
    k = _charge_gain(stage.h, mp.b_all, eta_c)
    net = stage.a_t - mp.demand.b * p_t - re
    return -net * k * u + 0.5 * mp.demand.b * k**2 * u**2


def welfare_discharge(w, re, p_t, stage: StageMarket, mp: MarketParams, eta_d: float):
    k = _discharge_gain(stage.h, mp.b_all, eta_d)
    net = stage.a_t - mp.demand.b * p_t - re
    return net * k * w + 0.5 * mp.demand.b * k**2 * w**2


class RewardCoefficients(NamedTuple):
    """Stage reward ``r(u, w) = ld*w - qd*w**2 - lc*u - qc*u**2``.

    The four fields broadcast together; solvers use arrays of shape
    ``(T, n_re)``.
    """

    ld: np.ndarray
    qd: np.ndarray
    lc: np.ndarray
    qc: np.ndarray


def reward_coefficients(
    p_t, h, a_t, re, b: float, b_all: float, eta_c: float, eta_d: float, mode: ObjectiveMode
) -> RewardCoefficients:
    """Linear and quadratic coefficients of the discharge/charge rewards.

    The reward is affine in the ex-ante price, so the expectation over the
    Gaussian forecast error reduces to evaluating at the mean ``p_t``.
    """
    mode = ObjectiveMode.parse(mode)
    p_t, h, a_t, re = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (p_t, h, a_t, re)))
    if mode is ObjectiveMode.PRICE_TAKER:
        zero = np.zeros_like(p_t)
        return RewardCoefficients(eta_d * p_t, zero, p_t / eta_c, zero.copy())
    kd = _discharge_gain(h, b_all, eta_d)
    kc = _charge_gain(h, b_all, eta_c)
    if mode is ObjectiveMode.PROFIT_MAX:
        return RewardCoefficients(eta_d * p_t, eta_d * kd, p_t / eta_c, kc / eta_c)
    net = a_t - re - b * p_t
    ld = eta_d * p_t + kd * net
    lc = p_t / eta_c + kc * net
    qd = eta_d * kd - 0.5 * b * kd**2
    qc = kc / eta_c - 0.5 * b * kc**2
    return RewardCoefficients(ld, qd, lc, qc)


def _stage_coefficients(re, stage, mp, eta_c, eta_d, mode, price):
    p_t = ex_ante_price(stage, re, mp) if price is None else price
    return reward_coefficients(p_t, stage.h, stage.a_t, re, mp.demand.b, mp.b_all, eta_c, eta_d, mode)


def g_discharge(w, re, stage: StageMarket, mp: MarketParams, eta_d: float,
                mode=ObjectiveMode.WELFARE_MAX, price=None):
    """Stage value of discharging ``w``.

    ``price`` overrides the mean ex-ante price (e.g. a realized price).
    """
    c = _stage_coefficients(re, stage, mp, 1.0, eta_d, mode, price)
    return c.ld * w - c.qd * w**2


def g_charge(u, re, stage: StageMarket, mp: MarketParams, eta_c: float,
             mode=ObjectiveMode.WELFARE_MAX, price=None):
    """Stage cost of charging ``u``."""
    c = _stage_coefficients(re, stage, mp, eta_c, 1.0, mode, price)
    return c.lc * u + c.qc * u**2


def d_g_discharge(w, re, stage, mp, eta_d, mode=ObjectiveMode.WELFARE_MAX, price=None):
    c = _stage_coefficients(re, stage, mp, 1.0, eta_d, mode, price)
    return c.ld - 2.0 * c.qd * w


def d_g_charge(u, re, stage, mp, eta_c, mode=ObjectiveMode.WELFARE_MAX, price=None):
    c = _stage_coefficients(re, stage, mp, eta_c, 1.0, mode, price)
    return c.lc + 2.0 * c.qc * u


def reward(u, w, re, stage: StageMarket, mp: MarketParams, eta_c: float, eta_d: float,
           mode=ObjectiveMode.WELFARE_MAX, price=None):
    """``g_discharge(w) - g_charge(u)``."""
    return g_discharge(w, re, stage, mp, eta_d, mode, price) - g_charge(u, re, stage, mp, eta_c, mode, price)


def resolve_stages(p0_forecast: Sequence[float], max_load: Sequence[float], table: SlopeTable) -> list[StageMarket]:
    """Build per-stage market data, keying the slope on each forecast price."""
    p0 = np.asarray(p0_forecast, dtype=float)
    a = np.asarray(max_load, dtype=float)
    if p0.shape != a.shape:
        raise ValueError(f"price series has {p0.size} points but load series has {a.size}")
    h = np.atleast_1d(slope_lookup(p0, table))
    return [StageMarket(float(p), float(s), float(l)) for p, s, l in zip(p0, h, a)]
