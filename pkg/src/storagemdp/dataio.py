"""Time-series ingestion, run configuration, instance assembly and table serialization.

CSV schemas (timestamps ISO-8601, UTC):

* prices     ``timestamp,price_usd_per_mwh``
* load       ``timestamp,max_load_mwh``
* renewable  ``timestamp,re_mwh``
* slopes     ``price_lo,price_hi,slope``
* policy     ``t,x_index,re_index,u_mwh,w_mwh``
* values     ``t,x_index,re_index,value_usd``
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources
from io import StringIO
from pathlib import Path
from typing import Sequence

import numpy as np

from .market import DemandParams, MarketParams, ObjectiveMode, SlopeTable, resolve_stages
from .mdp import MdpInstance, StorageSpec
from .policy import PolicyTable, ValueTable
from .uncertainty import PriceForecastModel, RenewableChain, estimate_chain

BUNDLED_PREFIX = "bundled:"


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("storagemdp") / "data" / name))


def _resolve(path: "str | Path", base: Path | None = None) -> Path:
    s = str(path)
    if s.startswith(BUNDLED_PREFIX):
        return bundled_path(s[len(BUNDLED_PREFIX):])
    p = Path(s).expanduser()
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True, eq=False)
class Series:
    timestamps: tuple[datetime, ...]
    values: np.ndarray
    name: str = "value"

    def __len__(self):
        return self.values.size


def load_series(path: "str | Path", stage_minutes: float | None = None) -> Series:
    """Read a two-column ``timestamp,<value>`` CSV.

    With ``stage_minutes`` set, a coarser series is linearly interpolated
    onto that granularity (first to last timestamp inclusive).
    """
    path = _resolve(path)
    stamps, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2 or header[0].strip() != "timestamp":
            raise DataError(f"{path}:1: expected header 'timestamp,<value column>', got {header}")
        name = header[1].strip()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                val = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not np.isfinite(val):
                raise DataError(f"{path}:{lineno}: non-finite value {row[1]!r}")
            if stamps and ts <= stamps[-1]:
                raise DataError(f"{path}:{lineno}: timestamp {row[0]} does not increase")
            stamps.append(ts)
            values.append(val)
    if not stamps:
        raise DataError(f"{path}: no data rows")
    series = Series(tuple(stamps), np.array(values), name)
    if stage_minutes is not None:
        series = resample(series, stage_minutes)
    return series


def resample(series: Series, stage_minutes: float) -> Series:
    """Linear interpolation onto a regular ``stage_minutes`` grid."""
    if stage_minutes <= 0:
        raise ValueError(f"stage_minutes must be > 0, got {stage_minutes}")
    t0 = series.timestamps[0]
    secs = np.array([(ts - t0).total_seconds() for ts in series.timestamps])
    step = stage_minutes * 60.0
    if len(secs) > 1 and np.all(np.isclose(np.diff(secs), step)):
        return series
    grid = np.arange(0.0, secs[-1] + 1e-9, step)
    vals = np.interp(grid, secs, series.values)
    stamps = tuple(t0 + timedelta(seconds=float(s)) for s in grid)
    return Series(stamps, vals, series.name)


def write_series(path: "str | Path", timestamps: Sequence[datetime], values, column: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", column])
        for ts, v in zip(timestamps, values):
            writer.writerow([format_timestamp(ts), repr(float(v))])


@dataclass(frozen=True, eq=False)
class Scenario:
    """Full historical data plus the settings needed to cut out instances.

    The renewable chain is estimated once on the whole renewable series;
    :meth:`instance` takes a window of stages from the price and load data.
    """

    price: np.ndarray
    load: np.ndarray
    renewable: np.ndarray
    mp: MarketParams
    spec: StorageSpec
    chain: RenewableChain
    n_soc: int = 20
    mode: ObjectiveMode = ObjectiveMode.WELFARE_MAX
    forecast: PriceForecastModel = field(default_factory=PriceForecastModel)
    timestamps: tuple[datetime, ...] = ()

    def __post_init__(self):
        n = self.price.size
        if self.load.size != n or self.renewable.size != n:
            raise DataError(
                f"series lengths differ: price {n}, load {self.load.size}, renewable {self.renewable.size}"
            )

    @property
    def n_stages(self) -> int:
        return self.price.size

    def instance(self, start: int = 0, T: int | None = None, **overrides) -> MdpInstance:
        """Instance over stages ``[start, start + T)``.

        ``overrides`` may replace ``mode``, ``n_soc``, ``capacity``,
        ``x_init``, ``eta_c`` or ``eta_d``.
        """
        T = self.n_stages - start if T is None else T
        if T < 1 or start < 0 or start + T > self.n_stages:
            raise DataError(f"window [{start}, {start + T}) outside the {self.n_stages}-stage data")
        spec_keys = {f.name for f in dataclasses.fields(StorageSpec)}
        spec = dataclasses.replace(self.spec, **{k: overrides.pop(k) for k in list(overrides) if k in spec_keys})
        mode = ObjectiveMode.parse(overrides.pop("mode", self.mode))
        n_soc = overrides.pop("n_soc", self.n_soc)
        if overrides:
            raise TypeError(f"unexpected overrides {sorted(overrides)}")
        window = slice(start, start + T)
        stages = resolve_stages(self.price[window], self.load[window], self.mp.slope_table)
        re_init = int(self.chain.bin_of(self.renewable[start]))
        return MdpInstance(
            spec=spec, mode=mode, stages=tuple(stages), mp=self.mp, chain=self.chain,
            n_soc=n_soc, re_init=re_init, forecast=self.forecast,
        )

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]


@dataclass
class RunConfig:
    """Everything a run needs; mirrors the sections of the ``.cfg`` file."""

    capacity: float = 20.0
    eta_c: float = 0.9
    eta_d: float = 0.9
    x_init: float = 0.0
    b: float = 0.2
    b_all: float = 0.5
    p_max: float = 240.0
    a: float = 10.0
    slope_table: str = BUNDLED_PREFIX + "table1_slopes.csv"
    prices: str = BUNDLED_PREFIX + "synthetic_prices.csv"
    load: str | None = BUNDLED_PREFIX + "synthetic_load.csv"
    renewable: str = BUNDLED_PREFIX + "synthetic_renewable.csv"
    start: int = 0
    stages: int | None = 288
    stage_minutes: float = 5.0
    n_soc: int = 20
    n_res: int = 3
    alpha: float = 1.0
    mode: ObjectiveMode = ObjectiveMode.WELFARE_MAX
    solver: str = "sdp"
    forecast_sigma: float = 0.0
    seed: int = 0
    n_paths: int = 1
    workers: int = 1
    capital_cost: float = 0.0
    capacities: list[float] = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 30.0, 40.0])
    grids: list[int] = field(default_factory=lambda: [20, 40, 80])
    periodicities: list[int] = field(default_factory=lambda: [72, 144, 216, 288, 360, 432])
    x_inits: list[float] = field(default_factory=lambda: [0.0, 10.0, 20.0])
    stages_per_quarter_day: int = 72
    soc_per_mwh: float | None = None
    base_dir: Path | None = None

    _SCHEMA = {
        "storage": {"capacity": float, "eta_c": float, "eta_d": float, "x_init": float},
        "market": {"b": float, "b_all": float, "p_max": float, "a": float, "slope_table": str},
        "data": {"prices": str, "load": str, "renewable": str},
        "horizon": {"start": int, "stages": int, "stage_minutes": float},
        "grid": {"n_soc": int, "n_res": int, "alpha": float},
        "objective": {"mode": ObjectiveMode.parse, "solver": str},
        "simulation": {"forecast_sigma": float, "seed": int, "n_paths": int},
        "studies": {
            "workers": int, "capital_cost": float, "capacities": _floats, "grids": _ints,
            "periodicities": _ints, "x_inits": _floats, "stages_per_quarter_day": int,
            "soc_per_mwh": float,
        },
    }

    @classmethod
    def from_file(cls, path: "str | Path") -> "RunConfig":
        path = _resolve(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not parser.read(path):
            raise FileNotFoundError(path)
        cfg = cls._from_parser(parser, str(path))
        cfg.base_dir = path.parent
        return cfg

    @classmethod
    def from_string(cls, text: str, base_dir: "str | Path | None" = None) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(text)
        cfg = cls._from_parser(parser, "<string>")
        cfg.base_dir = Path(base_dir) if base_dir is not None else None
        return cfg

    @classmethod
    def _from_parser(cls, parser: configparser.ConfigParser, source: str) -> "RunConfig":
        kwargs = {}
        for section in parser.sections():
            if section not in cls._SCHEMA:
                raise DataError(f"{source}: unknown section [{section}]")
            for key, raw in parser.items(section):
                conv = cls._SCHEMA[section].get(key)
                if conv is None:
                    raise DataError(f"{source}: unknown key {key!r} in [{section}]")
                if raw.strip().lower() in ("", "none"):
                    kwargs[key] = None
                    continue
                try:
                    kwargs[key] = conv(raw.strip())
                except ValueError as exc:
                    raise DataError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from None
        return cls(**kwargs)

    def to_string(self) -> str:
        parser = configparser.ConfigParser()
        for section, keys in self._SCHEMA.items():
            parser[section] = {}
            for key in keys:
                val = getattr(self, key)
                if isinstance(val, list):
                    val = ", ".join(repr(v) for v in val)
                elif isinstance(val, ObjectiveMode):
                    val = val.value
                parser[section][key] = "none" if val is None else str(val)
        buf = StringIO()
        parser.write(buf)
        return buf.getvalue()

    def path(self, value: str) -> Path:
        return _resolve(value, self.base_dir)

    def market_params(self) -> MarketParams:
        return MarketParams(
            DemandParams(self.a, self.b, self.p_max), SlopeTable.from_csv(self.path(self.slope_table)), self.b_all
        )

    def storage_spec(self) -> StorageSpec:
        return StorageSpec(self.capacity, self.eta_c, self.eta_d, self.x_init)


def read_inputs(cfg: RunConfig) -> tuple[Series, Series | None, Series]:
    for key in ("prices", "renewable", "load"):
        value = getattr(cfg, key)
        if value is not None and not cfg.path(value).is_file():
            raise FileNotFoundError(f"{key} file not found: {cfg.path(value)}")
    prices = load_series(cfg.path(cfg.prices), cfg.stage_minutes)
    renewable = load_series(cfg.path(cfg.renewable), cfg.stage_minutes)
    load = load_series(cfg.path(cfg.load), cfg.stage_minutes) if cfg.load else None
    return prices, load, renewable


def scenario_from_config(cfg: RunConfig) -> Scenario:
    mp = cfg.market_params()
    spec = cfg.storage_spec()
    prices, load, renewable = read_inputs(cfg)
    n = len(prices)
    load_vals = np.full(n, cfg.a) if load is None else load.values
    lengths = {"prices": n, "renewable": len(renewable), "load": load_vals.size}
    if len(set(lengths.values())) != 1:
        raise DataError(f"series length mismatch: {lengths}")
    if load is not None and load.timestamps != prices.timestamps:
        raise DataError("load and price timestamps differ")
    if renewable.timestamps != prices.timestamps:
        raise DataError("renewable and price timestamps differ")
    if np.ptp(renewable.values) == 0:
        chain = RenewableChain.constant(float(renewable.values[0]))
    else:
        chain = estimate_chain(renewable.values, cfg.n_res, cfg.alpha)
    return Scenario(
        price=prices.values, load=load_vals, renewable=renewable.values, mp=mp, spec=spec, chain=chain,
        n_soc=cfg.n_soc, mode=cfg.mode, forecast=PriceForecastModel(cfg.forecast_sigma),
        timestamps=prices.timestamps,
    )


def assemble(cfg: RunConfig) -> MdpInstance:
    """Build the instance described by ``cfg``."""
    return scenario_from_config(cfg).instance(cfg.start, cfg.stages)


def write_policy(path: "str | Path", policy: PolicyTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x_index", "re_index", "u_mwh", "w_mwh"])
        T, n1, n_re = policy.u.shape
        for t in range(T):
            for k in range(n1):
                for r in range(n_re):
                    writer.writerow([t, k, r, repr(float(policy.u[t, k, r])), repr(float(policy.w[t, k, r]))])


def _read_table(path: "str | Path", columns: Sequence[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(columns):
            raise DataError(f"{path}:1: expected header {','.join(columns)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise DataError(f"{path}:{lineno}: expected {len(columns)} fields")
            try:
                rows.append((int(row[0]), int(row[1]), int(row[2]), *map(float, row[3:])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty table")
    idx = np.array([r[:3] for r in rows])
    if idx.min() < 0:
        raise DataError(f"{path}: negative index")
    shape = tuple(idx.max(axis=0) + 1)
    if len(rows) != np.prod(shape):
        raise DataError(f"{path}: table is not a full (t, x_index, re_index) grid")
    arrays = [np.full(shape, np.nan) for _ in columns[3:]]
    for r in rows:
        for a, v in zip(arrays, r[3:]):
            a[r[:3]] = v
    if any(np.isnan(a).any() for a in arrays):
        raise DataError(f"{path}: duplicate or missing entries")
    return arrays


def read_policy(path: "str | Path", capacity: float) -> PolicyTable:
    u, w = _read_table(path, ["t", "x_index", "re_index", "u_mwh", "w_mwh"])
    levels = np.linspace(0.0, capacity, u.shape[1])
    return PolicyTable(levels, u, w)


def write_values(path: "str | Path", values: ValueTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x_index", "re_index", "value_usd"])
        T, n1, n_re = values.v.shape
        for t in range(T):
            for k in range(n1):
                for r in range(n_re):
                    writer.writerow([t, k, r, repr(float(values.v[t, k, r]))])


def read_values(path: "str | Path", capacity: float) -> ValueTable:
    (v,) = _read_table(path, ["t", "x_index", "re_index", "value_usd"])
    return ValueTable(np.linspace(0.0, capacity, v.shape[1]), v)


def write_marginals(path: "str | Path", levels: np.ndarray, marginals: np.ndarray) -> None:
    """Per-stage marginal-value curves: ``t,x_index,level_mwh,re_index,h_usd_per_mwh``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x_index", "level_mwh", "re_index", "h_usd_per_mwh"])
        T, n1, n_re = marginals.shape
        for t in range(T):
            for k in range(n1):
                for r in range(n_re):
                    writer.writerow([t, k, repr(float(levels[k])), r, repr(float(marginals[t, k, r]))])
