"""Monte Carlo tree search over beliefs with progressive widening.

The search needs only a belief generative model: any object with
``actions``, ``discount`` and ``generate_belief(belief, action, rng)``
returning ``(next_belief, observation, reward)``.  Action nodes widen their
set of belief children sublinearly in their visit count; children created
from an identical observation are merged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 1000
    max_depth: int = 15
    exploration_constant: Optional[float] = None  # None: 2x the observed return range
    widening_factor: float = 4.0
    widening_exponent: float = 0.1
    rollout_depth: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.exploration_constant is not None and self.exploration_constant <= 0.0:
            raise ValueError("exploration_constant must be > 0")
        if self.widening_factor <= 0.0:
            raise ValueError("widening_factor must be > 0")
        if not 0.0 < self.widening_exponent < 1.0:
            raise ValueError("widening_exponent must lie in (0, 1)")
        if self.rollout_depth < 0:
            raise ValueError("rollout_depth must be >= 0")


class BeliefNode:
    __slots__ = ("belief", "visits", "edges")

    def __init__(self, belief):
        self.belief = belief
        self.visits = 0
        self.edges: list[ActionNode] | None = None


class ActionNode:
    __slots__ = ("action", "visits", "value", "children", "keys", "counts", "total")

    def __init__(self, action):
        self.action = action
        self.visits = 0
        self.value = 0.0
        self.children: list[tuple[BeliefNode, float]] = []
        self.keys: dict = {}
        self.counts: list[int] = []
        self.total = 0


def _obs_key(obs) -> Any:
    if isinstance(obs, np.ndarray):
        return obs.tobytes()
    return obs


class SearchTree:
    """One search tree plus the bookkeeping of a single ``plan`` call."""

    def __init__(self, problem, belief, config: SolverConfig, rng: np.random.Generator):
        self.problem = problem
        self.config = config
        self.rng = rng
        self.actions = tuple(problem.actions)
        self.discount = problem.discount
        self.root = BeliefNode(belief)
        self._lo = math.inf
        self._hi = -math.inf

    # -- statistics -------------------------------------------------------

    def root_values(self) -> dict:
        if self.root.edges is None:
            return {}
        return {e.action: e.value for e in self.root.edges}

    def best_action(self):
        edges = self.root.edges
        if not edges:
            raise RuntimeError("search has not been run")
        best = edges[0]
        for e in edges[1:]:
            if e.visits > 0 and (best.visits == 0 or e.value > best.value):
                best = e
        return best.action

    def _exploration(self) -> float:
        c = self.config.exploration_constant
        if c is not None:
            return c
        return 2.0 * (self._hi - self._lo) if self._hi > self._lo else 1.0

    # -- search -----------------------------------------------------------

    def run(self, iterations: int | None = None) -> "SearchTree":
        n = self.config.iterations if iterations is None else iterations
        if n < 1:
            raise ValueError("at least one iteration is required")
        for _ in range(n):
            self.simulate(self.root, 0)
        return self

    def _select(self, node: BeliefNode) -> "ActionNode":
        edges = node.edges
        for e in edges:
            if e.visits == 0:
                return e
        c = self._exploration()
        log_n = math.log(node.visits)
        best, best_score = edges[0], -math.inf
        for e in edges:
            score = e.value + c * math.sqrt(log_n / e.visits)
            if score > best_score:
                best, best_score = e, score
        return best

    def simulate(self, node: BeliefNode, depth: int) -> float:
        cfg = self.config
        if depth >= cfg.max_depth:
            return 0.0
        if node.edges is None:
            node.edges = [ActionNode(a) for a in self.actions]
        edge = self._select(node)
        edge.visits += 1
        if len(edge.children) < cfg.widening_factor * edge.visits**cfg.widening_exponent:
            b2, obs, r = self.problem.generate_belief(node.belief, edge.action, self.rng)
            key = _obs_key(obs)
            idx = edge.keys.get(key)
            if idx is None:
                edge.keys[key] = len(edge.children)
                edge.children.append((BeliefNode(b2), r))
                edge.counts.append(1)
                edge.total += 1
                q = r + self.discount * self.rollout(b2, depth + 1)
            else:
                edge.counts[idx] += 1
                edge.total += 1
                q = r + self.discount * self.simulate(edge.children[idx][0], depth + 1)
        else:
            child, r = edge.children[self._pick_child(edge)]
            q = r + self.discount * self.simulate(child, depth + 1)
        edge.value += (q - edge.value) / edge.visits
        node.visits += 1
        if q < self._lo:
            self._lo = q
        if q > self._hi:
            self._hi = q
        return q

    def _pick_child(self, edge: ActionNode) -> int:
        # proportional to how often each observation was generated;
        # uniform when every child came from a distinct observation
        u = self.rng.random() * edge.total
        acc = 0
        for i, c in enumerate(edge.counts):
            acc += c
            if u < acc:
                return i
        return len(edge.counts) - 1

    def rollout(self, belief, depth: int) -> float:
        steps = min(self.config.rollout_depth, self.config.max_depth - depth)
        return rollout(belief, steps, self.problem, self.rng)


def rollout(belief, depth: int, problem, rng: np.random.Generator) -> float:
    """Uniform-random action rollout of ``depth`` steps; discounted return."""
    actions = tuple(problem.actions)
    n = len(actions)
    gamma = problem.discount
    total, scale = 0.0, 1.0
    for _ in range(max(depth, 0)):
        a = actions[int(rng.random() * n)]
        belief, _, r = problem.generate_belief(belief, a, rng)
        total += scale * r
        scale *= gamma
    return total


def search(problem, belief, config: SolverConfig, rng: np.random.Generator) -> SearchTree:
    return SearchTree(problem, belief, config, rng).run()


def plan(problem, belief, config: SolverConfig, rng: np.random.Generator):
    """Action maximizing the estimated action value at ``belief`` (lowest index on ties)."""
    if len(problem.actions) == 1:
        return problem.actions[0]
    return search(problem, belief, config, rng).best_action()
