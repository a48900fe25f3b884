from __future__ import annotations

import math
from dataclasses import dataclass

JOULES_PER_KWH = 3_600_000.0


@dataclass(frozen=True)
class Objective:
    """Weighted sum of seconds, dollars and energy.

    Energy enters as ``joules * energy_unit`` (kWh by default). Weights are
    rescaled by their maximum before use, so multiplying all of them by a
    positive constant does not change any argmin.
    """

    time: float = 1.0
    cost: float = 0.0
    energy: float = 0.0
    energy_unit: float = 1.0 / JOULES_PER_KWH
    mode: str = "weightedSum"

    def __post_init__(self):
        ws = (self.time, self.cost, self.energy)
        if any(not math.isfinite(w) or w < 0 for w in ws):
            raise ValueError("objective weights must be finite and >= 0")
        if not any(ws):
            raise ValueError("at least one objective weight must be positive")
        if self.mode != "weightedSum":
            raise ValueError(f"unsupported objective mode {self.mode!r}")

    def normalized(self) -> tuple[float, float, float]:
        """(time, cost, energy-per-joule) weights scaled so the largest is 1."""
        top = max(self.time, self.cost, self.energy)
        return self.time / top, self.cost / top, self.energy / top * self.energy_unit

    def score(self, seconds: float, dollars: float, joules: float) -> float:
        wt, wc, we = self.normalized()
        return wt * seconds + wc * dollars + we * joules

    def scaled(self, factor: float) -> "Objective":
        return Objective(self.time * factor, self.cost * factor, self.energy * factor,
                         self.energy_unit, self.mode)
