"""Parameter sweeps built on the solvers: timing, capacity and periodicity.

Sweeps that re-solve independent instances accept ``workers``; results are
collected in input order, so the output never depends on the worker count.
The numba kernels release the GIL, which makes a thread pool effective.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .dataio import DataError, Scenario
from .mdp import MdpInstance
from .sdp import backward_induction
from .threshold import solve as solve_threshold

log = logging.getLogger(__name__)

SOLVERS: dict[str, Callable[[MdpInstance], object]] = {
    "sdp": backward_induction,
    "threshold": solve_threshold,
}

_T = TypeVar("_T")
_R = TypeVar("_R")


def solver(name: str) -> Callable[[MdpInstance], object]:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


def parallel_map(fn: Callable[[_T], _R], items: Iterable[_T], workers: int = 1) -> list[_R]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def optimal_value(instance: MdpInstance, solver_name: str = "sdp") -> float:
    return float(solver(solver_name)(instance).optimal_value)


# -- benchmark ---------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkReport:
    """Rows are solvers, columns are grid sizes."""

    solvers: tuple[str, ...]
    grids: tuple[int, ...]
    seconds: np.ndarray
    values: np.ndarray

    def exponent(self, solver_name: str) -> float:
        """Least-squares slope of log(time) against log(n_soc)."""
        i = self.solvers.index(solver_name)
        return float(np.polyfit(np.log(self.grids), np.log(self.seconds[i]), 1)[0])

    def speedup(self, fast: str = "threshold", slow: str = "sdp") -> np.ndarray:
        return self.seconds[self.solvers.index(slow)] / self.seconds[self.solvers.index(fast)]


def _warm_up(instance: MdpInstance, names: Sequence[str]) -> None:
    small = instance.replace(stages=instance.stages[: min(3, instance.T)])
    for name in names:
        solver(name)(small)


def benchmark(
    instance: MdpInstance,
    grids: Sequence[int],
    repeats: int = 5,
    solvers: Sequence[str] = ("sdp", "threshold"),
) -> BenchmarkReport:
    """Wall-clock time (best of ``repeats``) and optimal value per solver and grid.

    Solvers are compiled before timing starts.  Each repeat runs every
    (grid, solver) pair once, so slow phases of the machine hit all cells
    alike instead of biasing one grid size.  Timing is
    sequential by design; parallel runs would distort it.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    solvers = tuple(solvers)
    grids = tuple(int(g) for g in grids)
    _warm_up(instance, solvers)
    seconds = np.full((len(solvers), len(grids)), np.inf)
    values = np.empty((len(solvers), len(grids)))
    instances = [instance.replace(n_soc=n) for n in grids]
    for _ in range(repeats):
        for j, inst in enumerate(instances):
            for i, name in enumerate(solvers):
                fn = solver(name)
                t0 = time.perf_counter()
                res = fn(inst)
                seconds[i, j] = min(seconds[i, j], time.perf_counter() - t0)
                values[i, j] = res.optimal_value
    return BenchmarkReport(solvers, grids, seconds, values)


# -- capacity planning -----------------------------------------------------


@dataclass(frozen=True)
class CapacityCurve:
    capacities: np.ndarray
    values: np.ndarray
    eta_c: float
    eta_d: float

    @property
    def slopes(self) -> np.ndarray:
        """Finite-difference slopes between consecutive samples."""
        return np.diff(self.values) / np.diff(self.capacities)

    def monotonicity_violation(self) -> float:
        """Largest decrease of U between consecutive samples (0 if none)."""
        return float(max(0.0, -np.diff(self.values).min(initial=0.0)))

    def slope_increase(self) -> float:
        """Largest increase of the slope sequence (0 if non-increasing)."""
        return float(max(0.0, np.diff(self.slopes).max(initial=0.0)))


@dataclass(frozen=True)
class CapacityPlan:
    curve: CapacityCurve
    rho: float
    c_star: float
    c_star_argmax: float
    c_star_refined: float

    @property
    def net_values(self) -> np.ndarray:
        return self.curve.values - self.rho * self.curve.capacities


def slope_crossing(capacities: np.ndarray, slopes: np.ndarray, rho: float) -> tuple[int, float]:
    """Sample index where the marginal value of capacity first drops to ``rho``.

    Returns the index ``i`` of the first segment ``[C_i, C_{i+1}]`` whose
    slope is ``<= rho`` (the last index if none), and a refined capacity
    found by interpolating the slope sequence, placed at segment midpoints,
    to the level ``rho``.
    """
    k = int(np.argmax(slopes <= rho)) if np.any(slopes <= rho) else len(capacities) - 1
    mids = 0.5 * (capacities[1:] + capacities[:-1])
    if k == len(capacities) - 1:
        refined = float(capacities[-1])
    elif k == 0:
        refined = float(capacities[0]) if slopes[0] <= rho else float(mids[0])
    else:
        s0, s1 = slopes[k - 1], slopes[k]
        frac = (s0 - rho) / (s0 - s1) if s0 != s1 else 0.5
        refined = float(mids[k - 1] + frac * (mids[k] - mids[k - 1]))
    return k, refined


def capacity_curve(
    instance: MdpInstance,
    capacities: Sequence[float],
    solver_name: str = "sdp",
    workers: int = 1,
    soc_per_mwh: float | None = None,
) -> CapacityCurve:
    """U(C) by re-solving at each capacity.

    With ``soc_per_mwh`` the grid is rescaled so that ``n_soc`` tracks the
    capacity; otherwise the instance's ``n_soc`` is kept.
    """
    caps = np.asarray(capacities, dtype=float)
    if caps.ndim != 1 or caps.size < 1:
        raise ValueError("need at least one capacity")
    if np.any(np.diff(caps) <= 0):
        raise ValueError("capacities must be strictly ascending")

    def one(c: float) -> float:
        n = instance.n_soc if soc_per_mwh is None else max(1, int(round(soc_per_mwh * c)))
        x0 = min(instance.spec.x_init, c)
        return optimal_value(instance.replace(capacity=c, x_init=x0, n_soc=n), solver_name)

    values = np.array(parallel_map(one, caps, workers))
    return CapacityCurve(caps, values, instance.spec.eta_c, instance.spec.eta_d)


def plan_capacity(curve: CapacityCurve, rho: float) -> CapacityPlan:
    """Choose C* for capital cost ``rho`` ($ per MWh over the horizon)."""
    if rho < 0:
        raise ValueError(f"capital cost must be >= 0, got {rho}")
    caps = curve.capacities
    if caps.size == 1:
        c = float(caps[0])
        return CapacityPlan(curve, rho, c, c, c)
    k, refined = slope_crossing(caps, curve.slopes, rho)
    argmax = int(np.argmax(curve.values - rho * caps))
    if argmax != k:
        log.warning("slope crossing (C=%g) and sample argmax (C=%g) disagree; U(C) is not concave",
                    caps[k], caps[argmax])
    return CapacityPlan(curve, rho, float(caps[k]), float(caps[argmax]), refined)


def capacity_sweep(
    instance: MdpInstance,
    capacities: Sequence[float],
    rho: float,
    solver_name: str = "sdp",
    workers: int = 1,
    soc_per_mwh: float | None = None,
) -> CapacityPlan:
    return plan_capacity(capacity_curve(instance, capacities, solver_name, workers, soc_per_mwh), rho)


# -- periodicity -----------------------------------------------------------


@dataclass(frozen=True)
class PeriodicityStudy:
    """Average value per quarter day; rows are periodicities, columns initial levels."""

    periodicities: tuple[int, ...]
    x_inits: tuple[float, ...]
    values: np.ndarray
    windows: tuple[int, ...]


def periodicity_study(
    scenario: Scenario,
    periodicities: Sequence[int],
    x_inits: Sequence[float],
    stages_per_quarter_day: int = 72,
    solver_name: str = "sdp",
    workers: int = 1,
    start: int = 0,
) -> PeriodicityStudy:
    """Optimal value for every (periodicity, initial level) pair.

    The data from ``start`` on is cut into consecutive windows of ``T``
    stages; each window is solved separately and the mean window value is
    rescaled to one quarter day.
    """
    span = scenario.n_stages - start
    jobs = []
    windows = []
    for T in periodicities:
        if T < 1:
            raise DataError(f"periodicity must be >= 1, got {T}")
        count = span // T
        if count == 0:
            raise DataError(f"periodicity {T} needs {T} stages but only {span} are available")
        if span % T:
            log.warning("periodicity %d does not divide %d stages; using %d full windows", T, span, count)
        windows.append(count)
        for x0 in x_inits:
            for k in range(count):
                jobs.append((T, float(x0), start + k * T))

    def one(job):
        T, x0, s = job
        return optimal_value(scenario.instance(s, T, x_init=x0), solver_name)

    flat = parallel_map(one, jobs, workers)
    values = np.empty((len(periodicities), len(x_inits)))
    pos = 0
    for i, (T, count) in enumerate(zip(periodicities, windows)):
        for j in range(len(x_inits)):
            values[i, j] = np.mean(flat[pos:pos + count]) * stages_per_quarter_day / T
            pos += count
    return PeriodicityStudy(tuple(int(t) for t in periodicities), tuple(float(x) for x in x_inits),
                            values, tuple(windows))
