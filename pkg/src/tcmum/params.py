from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class OptimizerParams:
    """Settings of the successive-LP design optimizer.

    Defaults follow the case-study settings: termination threshold 0.1,
    15 iterations, rail step 0.1, integer bus moves of one departure,
    fleet step 10 vehicles, discount step 0.1 and 15 random starts.
    """

    rho_rail: float = 0.1
    rho_bus: float = 1.0
    eta: float = 10.0
    sigma: float = 0.1
    epsilon: float = 0.1
    max_iter: int = 15
    starts: int = 15
    seed: int = 0
    # fractional bus values enumerated exactly up to this count, rounded beyond
    bus_enum_limit: int = 3

    def halved(self) -> "OptimizerParams":
        return OptimizerParams(
            rho_rail=self.rho_rail / 2, rho_bus=self.rho_bus / 2, eta=self.eta / 2,
            sigma=self.sigma / 2, epsilon=self.epsilon, max_iter=self.max_iter,
            starts=self.starts, seed=self.seed, bus_enum_limit=self.bus_enum_limit,
        )
