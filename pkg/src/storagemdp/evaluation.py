"""Forward simulation and valuation of storage policies.

Every stage's cash flow is split into the storage owner's arbitrage income
and the community welfare change caused by the storage action.  Valuation
always uses the price-impact market, whatever objective the policy was
planned with; this is what exposes a price-taking plan's misestimate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .market import (
    ObjectiveMode,
    ex_ante_price,
    ex_post_charge_price,
    ex_post_discharge_price,
    reward,
    welfare_charge,
    welfare_discharge,
)
from .mdp import MdpInstance, terminal_action, terminal_value
from .policy import PolicyTable
from .uncertainty import sample_path

log = logging.getLogger(__name__)

# net actions smaller than this are treated as idle
ACTION_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One simulated scheduling period.

    ``x`` has ``T + 1`` entries (levels before each stage and the final
    level); every other array has one entry per stage.
    """

    x: np.ndarray
    re: np.ndarray
    re_value: np.ndarray
    u: np.ndarray
    w: np.ndarray
    p_ante: np.ndarray
    p_post: np.ndarray
    arbitrage: np.ndarray
    welfare: np.ndarray

    @property
    def T(self) -> int:
        return self.u.size

    @property
    def arbitrage_sum(self) -> float:
        return float(self.arbitrage.sum())

    @property
    def welfare_sum(self) -> float:
        return float(self.welfare.sum())

    @property
    def total(self) -> float:
        return self.arbitrage_sum + self.welfare_sum

    def report(self) -> "ValueReport":
        return ValueReport(self.arbitrage_sum, self.welfare_sum)


@dataclass(frozen=True)
class ValueReport:
    """Arbitrage and welfare totals; ``*_se`` are Monte Carlo standard errors."""

    arbitrage: float
    welfare: float
    arbitrage_se: float = 0.0
    welfare_se: float = 0.0
    total_se: float = 0.0
    n_paths: int = 0

    @property
    def total(self) -> float:
        return self.arbitrage + self.welfare


def _split_action(x: float, target: float) -> tuple[float, float]:
    step = target - x
    if step > ACTION_EPS:
        return step, 0.0
    if step < -ACTION_EPS:
        return 0.0, -step
    return 0.0, 0.0


def rollout(
    policy: PolicyTable,
    instance: MdpInstance,
    re_path: "Sequence[int] | None" = None,
    seed=None,
    price_noise: "Sequence[float] | None" = None,
) -> Trajectory:
    """Simulate ``policy`` through the price-impact market.

    The renewable path (bin indices, one per stage) is either given or drawn
    from the instance's chain starting at ``instance.re_init``.
    ``price_noise`` is added to each stage's forecast price to form the
    realized ex-ante price.
    """
    T = instance.T
    if policy.T != T or policy.n_re != instance.chain.n_states:
        raise KeyError(
            f"policy shape (T={policy.T}, n_re={policy.n_re}) does not match instance "
            f"(T={T}, n_re={instance.chain.n_states})"
        )
    if abs(policy.capacity - instance.spec.capacity) > 1e-9:
        raise KeyError(f"policy capacity {policy.capacity} differs from storage capacity {instance.spec.capacity}")
    if re_path is None:
        re_path = sample_path(instance.chain, instance.re_init, T, seed)
    re_path = np.asarray(re_path, dtype=int)
    if re_path.shape != (T,):
        raise ValueError(f"renewable path must have {T} entries, got {re_path.shape}")
    noise = np.zeros(T) if price_noise is None else np.asarray(price_noise, dtype=float)
    if noise.shape != (T,):
        raise ValueError(f"price noise must have {T} entries, got {noise.shape}")

    spec, mp = instance.spec, instance.mp
    re_value = instance.chain.bin_values[re_path]
    x = np.empty(T + 1)
    u = np.zeros(T)
    w = np.zeros(T)
    p_ante = np.empty(T)
    p_post = np.empty(T)
    arb = np.empty(T)
    wel = np.empty(T)
    x[0] = spec.x_init
    for t, stage in enumerate(instance.stages):
        r = int(re_path[t])
        if t == T - 1:
            ut, wt = terminal_action(x[t], spec)
        else:
            ut, wt = _split_action(x[t], policy.next_level(t, x[t], r))
        u[t], w[t] = ut, wt
        pt = float(ex_ante_price(stage, re_value[t], mp)) + noise[t]
        p_ante[t] = pt
        if ut > 0:
            pp = ex_post_charge_price(pt, ut, stage, mp, spec.eta_c)
        elif wt > 0:
            pp = ex_post_discharge_price(pt, wt, stage, mp, spec.eta_d)
        else:
            pp = pt
        p_post[t] = pp
        arb[t] = spec.eta_d * wt * pp - ut * pp / spec.eta_c
        wel[t] = (
            welfare_charge(ut, re_value[t], pt, stage, mp, spec.eta_c)
            + welfare_discharge(wt, re_value[t], pt, stage, mp, spec.eta_d)
        )
        x[t + 1] = min(max(x[t] + ut - wt, 0.0), spec.capacity)
    return Trajectory(x, re_path, re_value, u, w, p_ante, p_post, arb, wel)


def _grid_successors(policy: PolicyTable, tol: float = 1e-9) -> np.ndarray:
    n = policy.levels.size - 1
    delta = policy.capacity / n
    pos = (policy.levels[None, :, None] + policy.net()) / delta
    idx = np.rint(pos)
    if np.max(np.abs(pos - idx)) > tol:
        raise ValueError("policy moves off the storage grid; use monte_carlo instead")
    return np.clip(idx, 0, n).astype(np.int64)


def evaluate_policy(policy: PolicyTable, instance: MdpInstance) -> ValueReport:
    """Exact expected arbitrage and welfare of a grid-to-grid policy.

    Runs the same backward recursion as the solver but with the policy's
    fixed actions, once for each component of the reward.
    """
    T, n_re = instance.T, instance.chain.n_states
    nxt = _grid_successors(policy)
    nxt[T - 1] = instance.x_init_index
    levels = policy.levels[None, :, None]
    step = nxt * (policy.capacity / (levels.size - 1)) - levels
    u = np.maximum(step, 0.0)
    w = np.maximum(-step, 0.0)

    def stage_reward(mode):
        c = instance.coefficients(mode)
        ld, qd, lc, qc = (a[:, None, :] for a in c)
        return ld * w - qd * w**2 - lc * u - qc * u**2

    arb = stage_reward(ObjectiveMode.PROFIT_MAX)
    wel = stage_reward(ObjectiveMode.WELFARE_MAX) - arb
    P = instance.chain.transition
    cols = np.arange(n_re)[None, :]

    def expect(r_stage):
        val = r_stage[T - 1].copy()
        for t in range(T - 2, -1, -1):
            cont = val @ P.T
            val = r_stage[t] + cont[nxt[t], cols]
        return float(val[instance.x_init_index, instance.re_init])

    return ValueReport(expect(arb), expect(wel))


def _path_seeds(seed, n_paths: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_paths)


def monte_carlo(
    policy: PolicyTable, instance: MdpInstance, n_paths: int = 100, seed=0
) -> ValueReport:
    """Sample-mean arbitrage and welfare over ``n_paths`` simulated periods.

    Each path has its own child seed, so results do not depend on the order
    in which paths are simulated.  Forecast noise is drawn when the
    instance's forecast model has ``sigma > 0``.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    sigma = instance.forecast.sigma
    arb = np.empty(n_paths)
    wel = np.empty(n_paths)
    for i, ss in enumerate(_path_seeds(seed, n_paths)):
        rng = np.random.default_rng(ss)
        re_path = sample_path(instance.chain, instance.re_init, instance.T, rng)
        noise = instance.forecast.sample(rng, instance.T) if sigma > 0 else None
        tr = rollout(policy, instance, re_path, price_noise=noise)
        arb[i], wel[i] = tr.arbitrage_sum, tr.welfare_sum

    def se(a):
        return float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0

    return ValueReport(float(arb.mean()), float(wel.mean()), se(arb), se(wel), se(arb + wel), n_paths)


@dataclass(frozen=True)
class CaseReport:
    case: int
    mode: ObjectiveMode
    planned: float
    realized: ValueReport

    @property
    def total(self) -> float:
        return self.realized.total


CASE_MODES = (
    (1, ObjectiveMode.PRICE_TAKER),
    (2, ObjectiveMode.PROFIT_MAX),
    (3, ObjectiveMode.WELFARE_MAX),
)


@dataclass(frozen=True)
class CaseComparison:
    cases: tuple[CaseReport, ...] = field(default_factory=tuple)

    def __getitem__(self, case: int) -> CaseReport:
        for c in self.cases:
            if c.case == case:
                return c
        raise KeyError(case)

    @property
    def ordered(self) -> bool:
        """Welfare-max total >= profit-max total >= price-taker total."""
        return self[3].total >= self[2].total >= self[1].total


def compare_cases(instance: MdpInstance, n_paths: int = 0, seed=0) -> CaseComparison:
    """Plan under each objective, then value every plan in the true market.

    With ``n_paths == 0`` the valuation is the exact expectation; otherwise
    it is a Monte Carlo estimate over common seeds.
    """
    from .sdp import backward_induction

    reports = []
    for case, mode in CASE_MODES:
        res = backward_induction(instance.replace(mode=mode))
        if n_paths:
            realized = monte_carlo(res.policy, instance, n_paths, seed)
        else:
            realized = evaluate_policy(res.policy, instance)
        reports.append(CaseReport(case, mode, res.optimal_value, realized))
    return CaseComparison(tuple(reports))


class BudgetExceeded(RuntimeError):
    pass


def oracle_budget(instance: MdpInstance) -> int:
    """Leaf count of the full scenario tree explored by :func:`oracle_enumerate`."""
    n_re = instance.chain.n_states
    return (instance.n_soc + 1) ** max(instance.T - 1, 0) * n_re ** instance.T


def oracle_enumerate(instance: MdpInstance, budget: int = 2_000_000) -> float:
    """Optimal expected value by exhaustive search of the scenario tree.

    Every node of the tree (stage, history of levels and renewable bins)
    chooses its best next grid level independently, so the search covers
    all history-dependent grid policies.  Nothing is memoized and rewards
    come from the scalar market functions, which makes this an independent
    check on the vectorized solvers.
    """
    if oracle_budget(instance) > budget:
        raise BudgetExceeded(
            f"scenario tree has {oracle_budget(instance)} leaves, above the budget of {budget}"
        )
    spec, mp, chain = instance.spec, instance.mp, instance.chain
    levels = [float(v) for v in instance.grid.levels]
    P = chain.transition
    T = instance.T
    mode = instance.mode

    def node(t: int, x: float, r: int) -> float:
        stage = instance.stages[t]
        re = float(chain.bin_values[r])
        if t == T - 1:
            return terminal_value(x, re, stage, mp, spec, mode)
        best = -np.inf
        for y in levels:
            ut, wt = max(y - x, 0.0), max(x - y, 0.0)
            val = float(reward(ut, wt, re, stage, mp, spec.eta_c, spec.eta_d, mode))
            for j in range(chain.n_states):
                if P[r, j] > 0:
                    val += P[r, j] * node(t + 1, y, j)
            best = max(best, val)
        return best

    return node(0, float(spec.x_init), instance.re_init)
