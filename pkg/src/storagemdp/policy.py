"""Lookup tables produced by the solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import BOUND_TOL


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Optimal ``(u, w)`` per ``(stage, storage grid index, renewable bin)``.

    The last stage holds the forced return-to-start action.  Actions may be
    off-grid (threshold solver); :meth:`next_level` interpolates the target
    level linearly in ``x`` between grid points.
    """

    levels: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.w.shape or self.u.ndim != 3 or self.u.shape[1] != self.levels.size:
            raise ValueError(
                f"policy arrays must be (T, {self.levels.size}, n_re), got {self.u.shape} and {self.w.shape}"
            )

    @property
    def T(self) -> int:
        return self.u.shape[0]

    @property
    def n_re(self) -> int:
        return self.u.shape[2]

    @property
    def capacity(self) -> float:
        return float(self.levels[-1])

    def net(self) -> np.ndarray:
        return self.u - self.w

    def action(self, t: int, k: int, re: int) -> tuple[float, float]:
        return float(self.u[t, k, re]), float(self.w[t, k, re])

    def next_level(self, t: int, x: float, re: int) -> float:
        """Target level from state ``x`` (possibly off-grid)."""
        if not (0 <= t < self.T and 0 <= re < self.n_re):
            raise KeyError(f"no policy entry for stage {t}, renewable bin {re}")
        if not -BOUND_TOL <= x <= self.capacity + BOUND_TOL:
            raise KeyError(f"level {x} outside policy grid [0, {self.capacity}]")
        target = self.levels + self.net()[t, :, re]
        nxt = float(np.interp(x, self.levels, target))
        return min(max(nxt, 0.0), self.capacity)

    def complementarity_violations(self) -> int:
        return int(np.count_nonzero((self.u > 0) & (self.w > 0)))

    def bound_violations(self, tol: float = BOUND_TOL) -> int:
        x = self.levels[None, :, None]
        bad = (self.u < -tol) | (self.w < -tol) | (self.u > self.capacity - x + tol) | (self.w > x + tol)
        return int(np.count_nonzero(bad))


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Optimal expected value per ``(stage, storage grid index, renewable bin)``."""

    levels: np.ndarray
    v: np.ndarray

    def concavity_violation(self) -> float:
        """Largest positive second difference along the storage axis, scaled.

        Returns ``max(d2) / scale`` where ``scale = max(1, max|v|)``; a
        concave table gives a value <= 0 up to round-off.
        """
        if self.v.shape[1] < 3:
            return 0.0
        d2 = self.v[:, 2:, :] - 2.0 * self.v[:, 1:-1, :] + self.v[:, :-2, :]
        scale = max(1.0, float(np.max(np.abs(self.v))))
        return float(d2.max()) / scale
