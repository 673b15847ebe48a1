"""Shared test helpers."""
from __future__ import annotations

import numpy as np

from storagemdp.market import DemandParams, MarketParams, ObjectiveMode, SlopeTable, StageMarket, slope_lookup
from storagemdp.mdp import StorageSpec, build_instance
from storagemdp.uncertainty import RenewableChain

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_chain(rng: np.random.Generator, n_re: int, top: float = 6.0) -> RenewableChain:
    edges = np.linspace(0.0, top, n_re + 1)
    P = rng.dirichlet(np.ones(n_re), size=n_re)
    P /= P.sum(axis=1, keepdims=True)
    return RenewableChain(edges, 0.5 * (edges[:-1] + edges[1:]), P)


def random_instance(rng: np.random.Generator, *, T=None, n_soc=None, n_re=None, mode=None,
                    market_params=None, eta=None):
    """Small instance with random prices, loads, chain, capacity and start level."""
    T = int(rng.integers(1, 5)) if T is None else T
    n_soc = int(rng.integers(1, 6)) if n_soc is None else n_soc
    n_re = int(rng.integers(1, 4)) if n_re is None else n_re
    mp = market_params or MarketParams(DemandParams(10.0, 0.2, 240.0), SlopeTable.table_one(), 0.5)
    prices = rng.uniform(5.0, 90.0, T)
    loads = rng.uniform(8.0, 16.0, T)
    stages = [StageMarket(float(p), float(slope_lookup(p, mp.slope_table)), float(a)) for p, a in zip(prices, loads)]
    capacity = float(rng.choice([1.0, 5.0, 10.0, 20.0]))
    eta_c, eta_d = (float(v) for v in rng.uniform(0.7, 1.0, 2)) if eta is None else (eta, eta)
    x_init = capacity * int(rng.integers(0, n_soc + 1)) / n_soc
    spec = StorageSpec(capacity, eta_c, eta_d, x_init)
    mode = ObjectiveMode(rng.choice([m.value for m in ObjectiveMode])) if mode is None else mode
    chain = random_chain(rng, n_re)
    return build_instance(spec, mp, chain, stages, mode=mode, n_soc=n_soc,
                          re_init=int(rng.integers(0, n_re)))
