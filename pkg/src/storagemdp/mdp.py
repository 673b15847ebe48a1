"""The finite-horizon storage MDP: storage spec, grid, dynamics, terminal stage."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .market import (
    MarketParams,
    ObjectiveMode,
    RewardCoefficients,
    StageMarket,
    reward,
    reward_coefficients,
)
from .uncertainty import PriceForecastModel, RenewableChain

# slack for float round-off when checking action bounds
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class StorageSpec:
    capacity: float
    eta_c: float = 0.9
    eta_d: float = 0.9
    x_init: float = 0.0

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError(f"capacity must be > 0, got {self.capacity}")
        for name in ("eta_c", "eta_d"):
            eta = getattr(self, name)
            if not 0 < eta <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {eta}")
        if not 0 <= self.x_init <= self.capacity:
            raise ValueError(f"x_init={self.x_init} outside [0, {self.capacity}]")


@dataclass(frozen=True)
class StorageGrid:
    """``n_soc + 1`` equally spaced storage levels from 0 to ``capacity``."""

    capacity: float
    n_soc: int

    def __post_init__(self):
        if self.n_soc < 1:
            raise ValueError(f"n_soc must be >= 1, got {self.n_soc}")

    @cached_property
    def levels(self) -> np.ndarray:
        lv = np.linspace(0.0, self.capacity, self.n_soc + 1)
        lv.setflags(write=False)
        return lv

    @property
    def spacing(self) -> float:
        return self.capacity / self.n_soc

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Grid index of level ``x``; raises if ``x`` is off the grid."""
        pos = x / self.spacing
        k = int(round(pos))
        if abs(pos - k) > tol or not 0 <= k <= self.n_soc:
            raise ValueError(f"level {x} is not on the {self.n_soc}-interval grid over [0, {self.capacity}]")
        return k


@dataclass(frozen=True, eq=False)
class MdpInstance:
    """Complete problem statement for one scheduling period.

    Stage ``T - 1`` (zero-based) is the forced stage that returns the storage
    to ``spec.x_init``; stages ``0 .. T-2`` are decision stages.  ``re_init``
    is the renewable bin observed at the first stage.
    """

    spec: StorageSpec
    mode: ObjectiveMode
    stages: tuple[StageMarket, ...]
    mp: MarketParams
    chain: RenewableChain
    n_soc: int
    re_init: int = 0
    forecast: PriceForecastModel = field(default_factory=PriceForecastModel)

    def __post_init__(self):
        object.__setattr__(self, "mode", ObjectiveMode.parse(self.mode))
        object.__setattr__(self, "stages", tuple(self.stages))
        if len(self.stages) < 1:
            raise ValueError("horizon must have at least one stage")
        if self.n_soc < 1:
            raise ValueError(f"n_soc must be >= 1, got {self.n_soc}")
        if any(s.h < 0 for s in self.stages):
            raise ValueError("all stage slopes must be >= 0")
        if not 0 <= self.re_init < self.chain.n_states:
            raise ValueError(f"re_init {self.re_init} outside chain states")
        self.grid.index_of(self.spec.x_init)

    @property
    def T(self) -> int:
        return len(self.stages)

    @cached_property
    def grid(self) -> StorageGrid:
        return StorageGrid(self.spec.capacity, self.n_soc)

    @property
    def x_init_index(self) -> int:
        return self.grid.index_of(self.spec.x_init)

    def replace(self, **changes) -> "MdpInstance":
        """Copy with fields replaced; ``capacity``/``x_init``/``eta_*`` go to the spec."""
        spec_keys = {f.name for f in dataclasses.fields(StorageSpec)}
        spec_changes = {k: changes.pop(k) for k in list(changes) if k in spec_keys}
        if spec_changes:
            changes["spec"] = dataclasses.replace(self.spec, **spec_changes)
        return dataclasses.replace(self, **changes)

    @cached_property
    def stage_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(p0_forecast, h, a_t)`` as length-``T`` arrays."""
        return tuple(np.array([getattr(s, k) for s in self.stages]) for k in ("p0_forecast", "h", "a_t"))

    @cached_property
    def ex_ante_prices(self) -> np.ndarray:
        """Mean ex-ante price per ``(stage, renewable bin)``."""
        p0, h, _ = self.stage_arrays
        re = self.chain.bin_values
        return p0[:, None] - h[:, None] * re[None, :] / (1.0 + self.mp.b_all * h[:, None])

    def coefficients(self, mode: "ObjectiveMode | str | None" = None) -> RewardCoefficients:
        """Reward coefficients of shape ``(T, n_re)`` under ``mode`` (default: own mode)."""
        mode = self.mode if mode is None else ObjectiveMode.parse(mode)
        _, h, a = self.stage_arrays
        return reward_coefficients(
            self.ex_ante_prices, h[:, None], a[:, None], self.chain.bin_values[None, :],
            self.mp.demand.b, self.mp.b_all, self.spec.eta_c, self.spec.eta_d, mode,
        )


def feasible_bounds(x: float, spec: StorageSpec) -> tuple[float, float]:
    """``(u_max, w_max)`` at storage level ``x``."""
    if not -BOUND_TOL <= x <= spec.capacity + BOUND_TOL:
        raise ValueError(f"level {x} outside [0, {spec.capacity}]")
    x = min(max(x, 0.0), spec.capacity)
    return spec.capacity - x, x


def transition(x: float, u: float, w: float, spec: StorageSpec) -> float:
    """Next storage level ``x + u - w`` after checking the action is feasible."""
    u_max, w_max = feasible_bounds(x, spec)
    if u < 0 or w < 0:
        raise ValueError(f"actions must be non-negative, got u={u}, w={w}")
    if u > 0 and w > 0:
        raise ValueError(f"cannot charge and discharge in the same stage (u={u}, w={w})")
    if u > u_max + BOUND_TOL:
        raise ValueError(f"charge {u} exceeds headroom {u_max}")
    if w > w_max + BOUND_TOL:
        raise ValueError(f"discharge {w} exceeds stored energy {w_max}")
    return min(max(x + u - w, 0.0), spec.capacity)


def terminal_action(x_T: float, spec: StorageSpec) -> tuple[float, float]:
    """Forced ``(u, w)`` that brings the storage back to ``x_init``."""
    feasible_bounds(x_T, spec)
    if x_T < spec.x_init:
        return spec.x_init - x_T, 0.0
    return 0.0, x_T - spec.x_init


def terminal_value(x_T: float, re: float, stage: StageMarket, mp: MarketParams, spec: StorageSpec,
                   mode: ObjectiveMode = ObjectiveMode.WELFARE_MAX) -> float:
    u, w = terminal_action(x_T, spec)
    return float(reward(u, w, re, stage, mp, spec.eta_c, spec.eta_d, mode))


def build_instance(
    spec: StorageSpec,
    mp: MarketParams,
    chain: RenewableChain,
    stages: Sequence[StageMarket],
    *,
    mode: "ObjectiveMode | str" = ObjectiveMode.WELFARE_MAX,
    n_soc: int = 20,
    re_init: int = 0,
    forecast: PriceForecastModel | None = None,
) -> MdpInstance:
    return MdpInstance(
        spec=spec, mode=ObjectiveMode.parse(mode), stages=tuple(stages), mp=mp, chain=chain,
        n_soc=n_soc, re_init=re_init, forecast=forecast or PriceForecastModel(),
    )
