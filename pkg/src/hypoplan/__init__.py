"""Belief-space planning with multiple dynamics hypotheses.

Hybrid beliefs (a categorical belief over dynamics hypotheses plus one
conditional state belief per hypothesis), the multiple-model Bayes update,
hypothesis-resolution rewards, a progressive-widening tree search over
beliefs, two benchmarks and a seeded experiment harness.
"""
from .belief import CategoricalBelief, GaussianBelief, HybridBelief, ParticleBelief
from .estimators import UpdaterConfig, mm_update
from .mcts import SolverConfig, plan
from .mdh import MDHProblem, ResolutionSpec, construct, generate_belief

__version__ = "0.1.0"

__all__ = [
    "CategoricalBelief",
    "GaussianBelief",
    "HybridBelief",
    "MDHProblem",
    "ParticleBelief",
    "ResolutionSpec",
    "SolverConfig",
    "UpdaterConfig",
    "construct",
    "generate_belief",
    "mm_update",
    "plan",
]
