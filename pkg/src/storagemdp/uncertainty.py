"""Renewable-generation Markov chain and price-forecast error model."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RenewableChain:
    """Discretized renewable output with a time-homogeneous transition matrix.

    ``transition[i, j]`` is the probability of moving from bin ``i`` to bin
    ``j`` in one stage.  ``bin_values`` are the representative outputs (bin
    midpoints) the reward is evaluated at.
    """

    bin_edges: np.ndarray
    bin_values: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        values = np.asarray(self.bin_values, dtype=float)
        P = np.asarray(self.transition, dtype=float)
        n = values.size
        if n < 1:
            raise ValueError("chain needs at least one state")
        if edges.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} bin edges, got {edges.size}")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if P.shape != (n, n):
            raise ValueError(f"transition matrix must be {n}x{n}, got {P.shape}")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be non-negative")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("transition rows must sum to 1")
        for name, arr in (("bin_edges", edges), ("bin_values", values), ("transition", P)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.bin_values.size

    @classmethod
    def constant(cls, value: float = 0.0) -> "RenewableChain":
        """Single-state chain pinned at ``value``."""
        return cls(np.array([value - 0.5, value + 0.5]), np.array([value]), np.ones((1, 1)))

    def bin_of(self, values) -> np.ndarray:
        """Bin index of each observation; the top edge is inclusive."""
        values = np.asarray(values, dtype=float)
        idx = np.searchsorted(self.bin_edges, values, side="right") - 1
        return np.clip(idx, 0, self.n_states - 1)

    def stationary_distribution(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.transition.T)
        k = np.argmin(np.abs(vals - 1.0))
        pi = np.real(vecs[:, k])
        return pi / pi.sum()

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "bin_values": self.bin_values.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RenewableChain":
        return cls(np.array(data["bin_edges"]), np.array(data["bin_values"]), np.array(data["transition"]))

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: "str | Path") -> "RenewableChain":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PriceForecastModel:
    """Zero-mean Gaussian error on the ex-ante price forecast."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(size)
        return rng.normal(0.0, self.sigma, size)


def _check_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("renewable series is empty")
    if np.any(~np.isfinite(x)):
        raise ValueError("renewable series contains non-finite values")
    if np.any(x < 0):
        raise ValueError("renewable series contains negative values")
    return x


def discretize(series, n_bins: int) -> RenewableChain:
    """Equal-width bins over ``[0, max(series)]``.

    Returns a chain whose transition matrix is still the identity; use
    :func:`estimate_chain` to fit transitions.
    """
    x = _check_series(series)
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    top = x.max()
    if top == 0:
        raise ValueError("renewable series is identically zero; use RenewableChain.constant(0.0)")
    edges = np.linspace(0.0, top, n_bins + 1)
    if np.any(np.diff(edges) <= 0):
        raise ValueError(f"range [0, {top}] is too narrow for {n_bins} distinct bins")
    values = 0.5 * (edges[:-1] + edges[1:])
    return RenewableChain(edges, values, np.eye(n_bins))


def transition_counts(bins: np.ndarray, n_bins: int) -> np.ndarray:
    counts = np.zeros((n_bins, n_bins))
    np.add.at(counts, (bins[:-1], bins[1:]), 1.0)
    return counts


def estimate_chain(series, n_bins: int, alpha: float = 1.0) -> RenewableChain:
    """Fit a transition matrix by counting consecutive bin pairs.

    Counts get additive (Laplace) smoothing ``alpha``.  With ``alpha=0`` a
    never-visited state is made absorbing.
    """
    x = _check_series(series)
    if x.size < 2:
        raise ValueError("need at least two observations to estimate transitions")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    skeleton = discretize(x, n_bins)
    counts = transition_counts(skeleton.bin_of(x), n_bins) + alpha
    rows = counts.sum(axis=1, keepdims=True)
    empty = rows[:, 0] == 0
    counts[empty, :] = np.eye(n_bins)[empty]
    rows[empty] = 1.0
    P = counts / rows
    # renormalize so rows sum to one to the last ulp
    P /= P.sum(axis=1, keepdims=True)
    return RenewableChain(skeleton.bin_edges, skeleton.bin_values, P)


def sample_path(chain: RenewableChain, start_bin: int, T: int, seed=None) -> np.ndarray:
    """Bin indices of a ``T``-stage path starting in ``start_bin``."""
    if not 0 <= start_bin < chain.n_states:
        raise ValueError(f"start_bin {start_bin} outside [0, {chain.n_states})")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(chain.transition, axis=1)
    cdf[:, -1] = 1.0
    draws = rng.random(T - 1)
    path = np.empty(T, dtype=np.int64)
    path[0] = start_bin
    for t in range(1, T):
        path[t] = np.searchsorted(cdf[path[t - 1]], draws[t - 1], side="right")
    return path
