"""Exact backward induction over the discretized (storage, renewable) grid.

Actions are restricted to grid-to-grid moves, so each state enumerates
every reachable next level: O(n_soc**2) work per stage and renewable bin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .mdp import MdpInstance
from .policy import PolicyTable, ValueTable


@njit(cache=True, nogil=True)
def _move_rewards(ld, qd, lc, qc, n, delta, out):
    # out[m + n] is the reward of moving m grid steps (m > 0 charges)
    out[n] = 0.0
    for m in range(1, n + 1):
        e = m * delta
        out[n + m] = -lc * e - qc * e * e
        out[n - m] = ld * e - qd * e * e


@njit(cache=True, nogil=True)
def _expect(P, vnext, r, out):
    # vnext is (n_re, n + 1); sum over next renewable bins in ascending order
    n_re, n1 = vnext.shape
    for k in range(n1):
        out[k] = 0.0
    for j in range(n_re):
        p = P[r, j]
        vj = vnext[j]
        for k in range(n1):
            out[k] += p * vj[k]


@njit(cache=True, nogil=True)
def _backward(ld, qd, lc, qc, P, n, delta, k_init):
    # arrays are (T, n_re, n + 1) so the level loops are contiguous
    T, n_re = ld.shape
    V = np.empty((T, n_re, n + 1))
    nxt = np.empty((T, n_re, n + 1), dtype=np.int64)
    u = np.zeros((T, n_re, n + 1))
    w = np.zeros((T, n_re, n + 1))
    rew = np.empty(2 * n + 1)
    cont = np.empty(n + 1)
    for r in range(n_re):
        _move_rewards(ld[T - 1, r], qd[T - 1, r], lc[T - 1, r], qc[T - 1, r], n, delta, rew)
        for k in range(n + 1):
            V[T - 1, r, k] = rew[n + k_init - k]
            nxt[T - 1, r, k] = k_init
            if k_init > k:
                u[T - 1, r, k] = (k_init - k) * delta
            else:
                w[T - 1, r, k] = (k - k_init) * delta
    for t in range(T - 2, -1, -1):
        for r in range(n_re):
            _move_rewards(ld[t, r], qd[t, r], lc[t, r], qc[t, r], n, delta, rew)
            _expect(P, V[t + 1], r, cont)
            Vt = V[t, r]
            for k in range(n + 1):
                # discharge and charge scans each keep their smallest maximizing move
                bd = -np.inf
                md = 0
                for m in range(1, k + 1):
                    g = rew[n - m] + cont[k - m]
                    if g > bd:
                        bd = g
                        md = m
                bc = -np.inf
                mc = 0
                for m in range(1, n - k + 1):
                    g = rew[n + m] + cont[k + m]
                    if g > bc:
                        bc = g
                        mc = m
                # ties go to idle, then the smaller move, then discharge
                best = rew[n] + cont[k]
                arg = k
                if bd > best or bc > best:
                    if bd > bc or (bd == bc and md <= mc):
                        best = bd
                        arg = k - md
                    else:
                        best = bc
                        arg = k + mc
                Vt[k] = best
                nxt[t, r, k] = arg
                if arg > k:
                    u[t, r, k] = (arg - k) * delta
                elif arg < k:
                    w[t, r, k] = (k - arg) * delta
    return V, nxt, u, w


@dataclass(frozen=True, eq=False)
class SdpResult:
    values: ValueTable
    policy: PolicyTable
    next_index: np.ndarray
    x_init_index: int
    re_init: int

    @property
    def optimal_value(self) -> float:
        """Expected value from the initial level and renewable bin."""
        return float(self.values.v[0, self.x_init_index, self.re_init])


def expected_continuation(v_next: np.ndarray, re: int, P: np.ndarray) -> np.ndarray:
    """``E[V_{t+1}(x', RE') | RE = re]`` for every grid level ``x'``.

    ``v_next`` has shape ``(n_levels, n_re)``.
    """
    v_next = np.ascontiguousarray(np.asarray(v_next, dtype=float).T)
    out = np.empty(v_next.shape[1])
    _expect(np.ascontiguousarray(P, dtype=float), v_next, re, out)
    return out


def backward_induction(instance: MdpInstance) -> SdpResult:
    """Optimal values and grid policy for every stage, level and renewable bin."""
    c = instance.coefficients()
    n = instance.n_soc
    delta = instance.grid.spacing
    k_init = instance.x_init_index
    args = [np.ascontiguousarray(a, dtype=float) for a in c]
    P = np.ascontiguousarray(instance.chain.transition, dtype=float)
    V, nxt, u, w = (np.swapaxes(a, 1, 2) for a in _backward(*args, P, n, delta, k_init))
    levels = instance.grid.levels
    return SdpResult(
        values=ValueTable(levels, V),
        policy=PolicyTable(levels, u, w),
        next_index=nxt,
        x_init_index=k_init,
        re_init=instance.re_init,
    )
