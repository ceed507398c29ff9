"""Benchmark registry: name -> parameter block and scenario builder."""
from __future__ import annotations

from typing import Optional

from ..estimators import UpdaterConfig
from ..mcts import SolverConfig
from ..mdh import ResolutionSpec
from ..scenario import Scenario
from . import linear, sda, vdp

PROBLEMS = ("vdp_track", "sda", "linear_gaussian_bench")

# config section holding each problem's parameter block
PARAM_SECTIONS = {"vdp_track": "vdp", "sda": "sda", "linear_gaussian_bench": "linear"}


def default_resolution(name: str, params) -> ResolutionSpec:
    if name == "vdp_track":
        return ResolutionSpec(0.2, params.horizon)
    if name == "sda":
        return ResolutionSpec(0.2, params.deadline_steps)
    if name == "linear_gaussian_bench":
        return ResolutionSpec(0.2, params.horizon)
    raise KeyError(name)


def default_updater(name: str, params) -> UpdaterConfig:
    if name == "vdp_track":
        return UpdaterConfig("particle", params.particle_count)
    if name in ("sda", "linear_gaussian_bench"):
        return UpdaterConfig("unscented")
    raise KeyError(name)


def default_solver(name: str) -> SolverConfig:
    if name == "vdp_track":
        return SolverConfig(iterations=300, max_depth=15, rollout_depth=3)
    if name == "sda":
        return SolverConfig(iterations=60, max_depth=10, rollout_depth=10)
    if name == "linear_gaussian_bench":
        return SolverConfig(iterations=200, max_depth=10, rollout_depth=5)
    raise KeyError(name)


def make_scenario(
    name: str,
    params,
    resolution: Optional[ResolutionSpec] = None,
    updater: Optional[UpdaterConfig] = None,
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
) -> Scenario:
    """Build a named benchmark.  Module-level so partials of it pickle for worker processes."""
    resolution = resolution or default_resolution(name, params)
    updater = updater or default_updater(name, params)
    if name == "vdp_track":
        return vdp.build_scenario(params, resolution, reward_kind, weight, updater)
    if name == "sda":
        return sda.build_scenario(params, resolution, reward_kind, weight, updater)
    if name == "linear_gaussian_bench":
        return linear.build_scenario(params, resolution, reward_kind, weight, updater)
    raise KeyError(f"unknown problem {name!r}; choose from {PROBLEMS}")


class ScenarioBuilder:
    """Picklable ``(reward_kind, weight) -> Scenario`` for one configured benchmark."""

    def __init__(self, name: str, params, resolution=None, updater=None):
        if name not in PROBLEMS:
            raise KeyError(f"unknown problem {name!r}; choose from {PROBLEMS}")
        self.name = name
        self.params = params
        self.resolution = resolution
        self.updater = updater

    def __call__(self, reward_kind: str, weight: float) -> Scenario:
        return make_scenario(self.name, self.params, self.resolution, self.updater, reward_kind, weight)
