"""Demand mixing by downtown share and bus-to-AMoD fleet equivalence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Commute, Scenario, ScenarioError

BUS_EQUIVALENTS = {"PCE": 2, "CCE": 4}  # cars per removed bus: road space, capital cost


@dataclass(frozen=True)
class DemandSeed:
    """Seed weights per commute (vectors over intervals) for each commuter kind."""

    local: dict = field(default_factory=dict)
    downtown: dict = field(default_factory=dict)
    total_demand: float = 12400.0
    jitter: float = 0.0  # relative multiplicative noise on the weights

    @classmethod
    def from_scenario(cls, sc: Scenario, total_demand: float | None = None, jitter: float = 0.0):
        local = {c.id: tuple(c.demand) for c in sc.commutes if c.kind == "local"}
        downtown = {c.id: tuple(c.demand) for c in sc.commutes if c.kind == "downtown"}
        total = float(sc.demand.sum()) if total_demand is None else total_demand
        return cls(local, downtown, total, jitter)


def _scaled(weights: dict, total: float, rng, jitter: float, kind: str) -> dict:
    if not weights:
        if total > 0:
            raise ScenarioError(f"{kind} share is positive but the {kind} seed is empty")
        return {}
    w = {k: np.asarray(v, dtype=float) for k, v in weights.items()}
    if jitter > 0:
        w = {k: v * rng.uniform(1 - jitter, 1 + jitter, size=v.shape) for k, v in w.items()}
    s = sum(float(v.sum()) for v in w.values())
    if s <= 0:
        if total > 0:
            raise ScenarioError(f"{kind} seed has no positive weight")
        return {k: np.zeros_like(v) for k, v in w.items()}
    return {k: v * (total / s) for k, v in w.items()}


def generate_demand(seed: DemandSeed, psi: float, rng_seed: int = 0) -> dict:
    """Per-commute demand with ``psi`` of the total going downtown."""
    if not 0 <= psi <= 1:
        raise ValueError(f"downtown share must lie in [0, 1], got {psi}")
    rng = np.random.default_rng(rng_seed)
    out = _scaled(seed.downtown, seed.total_demand * psi, rng, seed.jitter, "downtown")
    out.update(_scaled(seed.local, seed.total_demand * (1 - psi), rng, seed.jitter, "local"))
    return out


def with_demand(sc: Scenario, demand: dict) -> Scenario:
    commutes = tuple(
        Commute(c.id, c.kind, tuple(float(v) for v in demand.get(c.id, c.demand)), c.origin, c.destination)
        for c in sc.commutes)
    return sc.replace(commutes=commutes)


def removed_buses(gamma: float, B_bus: float, horizon_h: float) -> int:
    """Buses withdrawn when only ``gamma`` of the runs remain, one run per bus per hour."""
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    # round half up; the epsilon absorbs binary representation of decimal inputs
    return int(math.floor(B_bus * (1 - gamma) / horizon_h + 0.5 + 1e-9))


def equivalent_fleet(gamma: float, B_bus: float = 814.0, horizon_h: float = 4.0, rule: str = "PCE") -> int:
    """AMoD fleet size equivalent to the withdrawn buses."""
    try:
        per_bus = BUS_EQUIVALENTS[rule.upper()]
    except KeyError:
        raise ValueError(f"fleet rule must be PCE or CCE, got {rule!r}") from None
    return per_bus * removed_buses(gamma, B_bus, horizon_h)
