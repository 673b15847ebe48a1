"""Threshold-structured solver working on expected marginal-value curves.

Instead of enumerating next storage levels, each state compares the current
marginal reward of charging/discharging with the expected marginal value of
stored energy one stage ahead, ``H(x')``.  Concavity of the value function
makes ``H`` non-increasing, so the optimal action falls in one of five
cases:

1. full discharge, if ``dg_d(x) >= H(0)``
2. full charge, if ``dg_c(C - x) <= H(C)``
3. partial discharge to the crossing ``dg_d(w) = H(x - w)``
4. partial charge to the crossing ``dg_c(y) = H(x + y)``
5. idle

``H`` is stored on the storage grid and interpolated linearly, so each
crossing is a binary search over knots plus one linear solve.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .market import RewardCoefficients
from .mdp import MdpInstance, StorageSpec
from .policy import PolicyTable, ValueTable
from .uncertainty import RenewableChain

log = logging.getLogger(__name__)

FULL_DISCHARGE, FULL_CHARGE, PARTIAL_DISCHARGE, PARTIAL_CHARGE, IDLE = 1, 2, 3, 4, 5
# returned when a partial case finds no bracketing segment (round-off only)
IDLE_FALLBACK = -5

CLIP_TOL = 1e-9


@njit(cache=True, nogil=True, inline="always")
def _interp(H, delta, n, x):
    j = int(x / delta)
    if j >= n:
        j = n - 1
    if j < 0:
        j = 0
    f = x / delta - j
    return H[j] + f * (H[j + 1] - H[j])


@njit(cache=True, nogil=True, inline="always")
def _floor_index(z, delta, n, x):
    j = int(np.floor(x / delta + 1e-9))
    if j > n:
        j = n
    if j < 0:
        j = 0
    while j > 0 and z[j] > x:
        j -= 1
    return j


@njit(cache=True, nogil=True, inline="always")
def _psi_neg(j, x, z, H, ld, qd):
    return ld - 2.0 * qd * (x - z[j]) - H[j] < 0.0


@njit(cache=True, nogil=True, inline="always")
def _chi_pos(j, x, z, H, lc, qc):
    return H[j] - lc - 2.0 * qc * (z[j] - x) >= 0.0


@njit(cache=True, nogil=True, inline="always")
def _search_discharge(x, kf, z, H, ld, qd, hint):
    # largest j in [0, kf) with psi(z[j]) < 0, given psi(z[0]) < 0 <= psi(z[kf]);
    # gallops from ``hint`` then bisects
    g = min(max(hint, 0), kf - 1)
    if _psi_neg(g, x, z, H, ld, qd):
        lo, step = g, 1
        while lo + step < kf and _psi_neg(lo + step, x, z, H, ld, qd):
            lo += step
            step *= 2
        hi = min(lo + step, kf)
    else:
        hi, step = g, 1
        while hi - step > 0 and not _psi_neg(hi - step, x, z, H, ld, qd):
            hi -= step
            step *= 2
        lo = max(hi - step, 0)
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if _psi_neg(mid, x, z, H, ld, qd):
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True, inline="always")
def _search_charge(x, kc, n, z, H, lc, qc, hint):
    # largest j in [kc, n) with chi(z[j]) >= 0, given chi(z[kc]) >= 0 > chi(z[n])
    g = min(max(hint, kc), n - 1)
    if _chi_pos(g, x, z, H, lc, qc):
        lo, step = g, 1
        while lo + step < n and _chi_pos(lo + step, x, z, H, lc, qc):
            lo += step
            step *= 2
        hi = min(lo + step, n)
    else:
        hi, step = g, 1
        while hi - step > kc and not _chi_pos(hi - step, x, z, H, lc, qc):
            hi -= step
            step *= 2
        lo = max(hi - step, kc)
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if _chi_pos(mid, x, z, H, lc, qc):
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True, inline="always")
def _decide_core(x, kf, hx, z, H, delta, n, ld, qd, lc, qc, hint):
    """Return ``(case, u, w, next_level, marginal, seg)``.

    ``kf`` is the last knot at or below ``x`` and ``hx = H(x)``; ``seg`` is
    the knot segment holding ``next_level``.  ``hint`` is a starting knot
    for the crossing search (any value is correct; a close one is fast).
    """
    C = z[n]
    dgd_full = ld - 2.0 * qd * x
    if dgd_full >= H[0]:
        return FULL_DISCHARGE, 0.0, x, 0.0, dgd_full, 0
    dgc_full = lc + 2.0 * qc * (C - x)
    if dgc_full <= H[n]:
        return FULL_CHARGE, C - x, 0.0, C, dgc_full, n - 1
    seg_x = kf if kf < n else n - 1
    if ld > hx:
        # psi(z) = dg_d(x - z) - H(z) increases in z; psi(0) < 0 < psi(x)
        if _psi_neg(kf, x, z, H, ld, qd):
            j = kf
        else:
            j = _search_discharge(x, kf, z, H, ld, qd, hint)
        if j >= n:
            return IDLE_FALLBACK, 0.0, 0.0, x, hx, seg_x
        a = z[j]
        psi_a = ld - 2.0 * qd * (x - a) - H[j]
        s = (H[j + 1] - H[j]) / delta
        den = 2.0 * qd - s
        if not den > 0.0:
            return IDLE_FALLBACK, 0.0, 0.0, x, hx, seg_x
        zs = a - psi_a / den
        if zs > x:
            zs = x
        if zs < a:
            zs = a
        return PARTIAL_DISCHARGE, 0.0, x - zs, zs, H[j] + s * (zs - a), j
    if lc < hx:
        # chi(z) = H(z) - dg_c(z - x) decreases in z; chi(x) > 0 > chi(C)
        kc = kf + 1
        if kc > n or not _chi_pos(kc, x, z, H, lc, qc):
            j = kf
            a = x
            chi_a = hx - lc
        else:
            j = _search_charge(x, kc, n, z, H, lc, qc, hint)
            a = z[j]
            chi_a = H[j] - lc - 2.0 * qc * (a - x)
        if j >= n:
            return IDLE_FALLBACK, 0.0, 0.0, x, hx, seg_x
        s = (H[j + 1] - H[j]) / delta
        den = 2.0 * qc - s
        if not den > 0.0:
            return IDLE_FALLBACK, 0.0, 0.0, x, hx, seg_x
        zs = a + chi_a / den
        if zs > z[j + 1]:
            zs = z[j + 1]
        if zs < a:
            zs = a
        return PARTIAL_CHARGE, zs - x, 0.0, zs, H[j] + s * (zs - z[j]), j
    return IDLE, 0.0, 0.0, x, hx, seg_x


@njit(cache=True, nogil=True)
def _decide(x, z, H, delta, n, ld, qd, lc, qc):
    kf = _floor_index(z, delta, n, x)
    return _decide_core(x, kf, _interp(H, delta, n, x), z, H, delta, n, ld, qd, lc, qc, n // 2)


@njit(cache=True, nogil=True)
def _expected_curve(P, h_next, r, out):
    # h_next is (n_re, n + 1); sum over next renewable bins in ascending order
    n_re, n1 = h_next.shape
    for k in range(n1):
        out[k] = 0.0
    for j in range(n_re):
        p = P[r, j]
        hj = h_next[j]
        for k in range(n1):
            out[k] += p * hj[k]
    # running minimum restores monotonicity lost to round-off
    clip = 0.0
    for k in range(1, n1):
        if out[k] > out[k - 1]:
            if out[k] - out[k - 1] > clip:
                clip = out[k] - out[k - 1]
            out[k] = out[k - 1]
    return clip


@njit(cache=True, nogil=True)
def _sweep(ld, qd, lc, qc, P, z, delta, k_init):
    # arrays are (T, n_re, n + 1) so the inner loops over levels are contiguous
    T, n_re = ld.shape
    n = z.size - 1
    h = np.empty((T, n_re, n + 1))
    V = np.empty((T, n_re, n + 1))
    u = np.zeros((T, n_re, n + 1))
    w = np.zeros((T, n_re, n + 1))
    case = np.zeros((T, n_re, n + 1), dtype=np.int8)
    x_init = z[k_init]
    for r in range(n_re):
        for k in range(n + 1):
            x = z[k]
            if k < k_init:
                e = x_init - x
                h[T - 1, r, k] = lc[T - 1, r] + 2.0 * qc[T - 1, r] * e
                V[T - 1, r, k] = -lc[T - 1, r] * e - qc[T - 1, r] * e * e
                u[T - 1, r, k] = e
            else:
                e = x - x_init
                h[T - 1, r, k] = ld[T - 1, r] - 2.0 * qd[T - 1, r] * e
                V[T - 1, r, k] = ld[T - 1, r] * e - qd[T - 1, r] * e * e
                w[T - 1, r, k] = e
    max_clip = 0.0
    H = np.empty(n + 1)
    EV = np.empty(n + 1)
    inv_delta = 1.0 / delta
    for t in range(T - 2, -1, -1):
        for r in range(n_re):
            c = _expected_curve(P, h[t + 1], r, H)
            if c > max_clip:
                max_clip = c
            EV[:] = 0.0
            for j in range(n_re):
                p = P[r, j]
                Vj = V[t + 1, j]
                for k in range(n + 1):
                    EV[k] += p * Vj[k]
            a_d, b_d, a_c, b_c = ld[t, r], qd[t, r], lc[t, r], qc[t, r]
            hint_d, hint_c = 0, 0
            for k in range(n + 1):
                # crossings move monotonically with k, so seed each search with the last one
                hint = hint_d if a_d > H[k] else hint_c
                cs, uu, ww, xn, hh, j = _decide_core(z[k], k, H[k], z, H, delta, n, a_d, b_d, a_c, b_c, hint)
                if cs == PARTIAL_DISCHARGE:
                    hint_d = j
                elif cs == PARTIAL_CHARGE:
                    hint_c = j
                case[t, r, k] = cs
                u[t, r, k] = uu
                w[t, r, k] = ww
                h[t, r, k] = hh
                ev = EV[j] + (xn - z[j]) * inv_delta * (EV[j + 1] - EV[j])
                V[t, r, k] = a_d * ww - b_d * ww * ww - a_c * uu - b_c * uu * uu + ev
    return h, V, u, w, case, max_clip


@dataclass(frozen=True, eq=False)
class MarginalCurve:
    """Non-increasing piecewise-linear marginal value of stored energy."""

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if levels.ndim != 1 or levels.size < 2 or levels.shape != values.shape:
            raise ValueError("marginal curve needs matching 1-d knots and values (>= 2 knots)")
        if np.any(np.diff(levels) <= 0) or levels[0] != 0.0:
            raise ValueError("knots must start at 0 and ascend strictly")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)

    @classmethod
    def flat(cls, levels, value: float) -> "MarginalCurve":
        return cls(levels, np.full(len(levels), float(value)))

    def __call__(self, x):
        return np.interp(x, self.levels, self.values)

    def monotonicity_violation(self) -> float:
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return max(0.0, float(np.diff(self.values).max())) / scale

    def _uniform(self):
        n = self.levels.size - 1
        delta = self.levels[-1] / n
        if not np.allclose(self.levels, np.linspace(0.0, self.levels[-1], n + 1), rtol=0, atol=1e-12 * self.levels[-1]):
            raise ValueError("threshold decisions need a uniform knot grid")
        return n, delta


class Decision(NamedTuple):
    case: int
    u: float
    w: float
    next_level: float
    marginal: float


def expected_marginal(curves: Sequence[MarginalCurve], re: int, chain: RenewableChain) -> MarginalCurve:
    """Transition-weighted average of next-stage curves, clipped to be non-increasing."""
    if len(curves) != chain.n_states:
        raise ValueError(f"need one curve per renewable state ({chain.n_states}), got {len(curves)}")
    levels = curves[0].levels
    for c in curves[1:]:
        if c.levels.shape != levels.shape or np.any(c.levels != levels):
            raise ValueError("marginal curves must share the same knot grid")
    stack = np.ascontiguousarray(np.vstack([c.values for c in curves]))
    out = np.empty(levels.size)
    clip = _expected_curve(np.ascontiguousarray(chain.transition), stack, re, out)
    _log_clip(clip, out)
    return MarginalCurve(levels, out)


def _log_clip(clip, values):
    scale = max(1.0, float(np.max(np.abs(values))))
    if clip > CLIP_TOL * scale:
        log.warning("expected marginal curve needed a monotonicity clip of %.3g", clip)


def _as_floats(coef) -> tuple[float, float, float, float]:
    return tuple(float(np.asarray(v)) for v in coef)


def threshold_policy(x: float, h_next: MarginalCurve, coef: RewardCoefficients) -> Decision:
    """Optimal action at level ``x`` given the expected next-stage marginal curve.

    ``coef`` holds scalar reward coefficients for the stage and renewable
    state (see :meth:`MdpInstance.coefficients`).
    """
    n, delta = h_next._uniform()
    C = h_next.levels[-1]
    if not -1e-9 <= x <= C + 1e-9:
        raise ValueError(f"level {x} outside [0, {C}]")
    x = min(max(float(x), 0.0), C)
    ld, qd, lc, qc = _as_floats(coef)
    out = _decide(x, h_next.levels, h_next.values, delta, n, ld, qd, lc, qc)
    if out[0] == IDLE_FALLBACK:
        log.warning("no crossing found at level %g; staying idle", x)
    return Decision(*out[:5])


def marginal_update(x: float, h_next: MarginalCurve, coef: RewardCoefficients) -> float:
    """Marginal value of storage at ``x`` this stage."""
    return threshold_policy(x, h_next, coef).marginal


def terminal_marginal(x: float, coef: RewardCoefficients, spec: StorageSpec) -> float:
    """Derivative of the forced-return reward; right derivative at ``x_init``."""
    ld, qd, lc, qc = _as_floats(coef)
    if x < spec.x_init:
        return lc + 2.0 * qc * (spec.x_init - x)
    return ld - 2.0 * qd * (x - spec.x_init)


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    policy: PolicyTable
    marginals: np.ndarray  # h_t(x, re), shape (T, n+1, n_re)
    values: ValueTable
    cases: np.ndarray
    max_clip: float
    x_init_index: int
    re_init: int

    @property
    def optimal_value(self) -> float:
        return float(self.values.v[0, self.x_init_index, self.re_init])

    def curve(self, t: int, re: int) -> MarginalCurve:
        return MarginalCurve(self.policy.levels, self.marginals[t, :, re])

    def curves(self):
        for t in range(self.marginals.shape[0]):
            for r in range(self.marginals.shape[2]):
                yield t, r, self.curve(t, r)


def solve(instance: MdpInstance) -> ThresholdResult:
    """Backward sweep producing a continuous-action policy and marginal curves.

    Values are carried alongside the marginals, interpolating the expected
    next-stage value linearly at off-grid next levels.
    """
    c = instance.coefficients()
    args = [np.ascontiguousarray(a, dtype=float) for a in c]
    levels = instance.grid.levels
    z = np.ascontiguousarray(levels, dtype=float)
    P = np.ascontiguousarray(instance.chain.transition, dtype=float)
    out = _sweep(*args, P, z, instance.grid.spacing, instance.x_init_index)
    h, V, u, w, case = (np.swapaxes(a, 1, 2) for a in out[:-1])
    max_clip = out[-1]
    fallbacks = int(np.count_nonzero(case == IDLE_FALLBACK))
    if fallbacks:
        log.warning("%d states found no crossing and stayed idle", fallbacks)
    _log_clip(max_clip, h)
    return ThresholdResult(
        policy=PolicyTable(levels, u, w),
        marginals=h,
        values=ValueTable(levels, V),
        cases=case,
        max_clip=float(max_clip),
        x_init_index=instance.x_init_index,
        re_init=instance.re_init,
    )
