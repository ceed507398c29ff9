"""A benchmark instance: the MDH problem plus what an episode needs to start."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .belief import HybridBelief
from .mdh import MDHProblem


@dataclass(frozen=True)
class Scenario:
    problem: MDHProblem
    horizon: int
    initial_belief: Callable[[np.random.Generator], HybridBelief]
    initial_state: Callable[[np.random.Generator], np.ndarray]
    nominal_plan: Optional[tuple] = None

    @property
    def labels(self) -> tuple:
        return self.problem.labels

    def with_reward(self, kind: str, weight: float) -> "Scenario":
        return dataclasses.replace(self, problem=self.problem.with_reward(kind, weight))

    def deviations(self, actions) -> int:
        if self.nominal_plan is None:
            return 0
        plan = self.nominal_plan
        return sum(1 for t, a in enumerate(actions) if a != plan[t % len(plan)])
