"""Closed-loop episodes and Monte-Carlo campaigns.

Seeding: episode ``run`` of weight cell ``cell`` gets the integer seed
``episode_seed(seed_base, cell, run)``, a 63-bit draw from
``SeedSequence([seed_base, cell, run])``.  That seed is then split into
three independent streams (environment, filter, planner), so the ground
truth trajectory of a seed does not depend on what the planner did with
its own random numbers.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .belief import BeliefError
from .estimators import NumericalError, mm_update
from .mcts import SolverConfig, plan
from .mdh import REWARD_KINDS, ResolutionSpec, discounted_sum, generate_state, hypothesis_reward
from .scenario import Scenario

FLOAT_FORMAT = "%.9g"

CAMPAIGN_FIELDS = (
    "weight",
    "reward_kind",
    "true_hypothesis",
    "seed",
    "steps",
    "failed",
    "decision_step",
    "decision_hypothesis",
    "in_time_success",
    "late_success",
    "cumulative_base_reward",
    "cumulative_hypothesis_reward",
    "cumulative_total_reward",
    "deviations",
    "p_true_at_decision",
    "p_true_at_deadline",
    "p_true_final",
    "deadline",
    "trace",
)

SUMMARY_FIELDS = (
    "weight",
    "reward_kind",
    "runs",
    "failed",
    "base_reward_mean",
    "base_reward_sem",
    "total_reward_mean",
    "total_reward_sem",
    "decided",
    "steps_to_decide_mean",
    "steps_to_decide_sem",
    "in_time_success",
    "late_success",
    "deviations_mean",
    "deviations_sem",
    "p_true_at_deadline_mean",
    "p_true_at_deadline_sem",
)


class CampaignError(RuntimeError):
    """A campaign could not be completed or its stored output is malformed."""


@dataclass(frozen=True)
class CampaignConfig:
    problem: str = "vdp_track"
    reward_kind: str = "resolution_time"
    weight_list: tuple = (50.0,)
    runs_per_cell: int = 50
    solver: SolverConfig = SolverConfig()
    seed_base: int = 0

    def __post_init__(self):
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be >= 1")
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"reward_kind must be one of {REWARD_KINDS}")
        weights = tuple(float(w) for w in self.weight_list)
        if not weights:
            raise ValueError("weight_list must be nonempty")
        if any(w < 0.0 for w in weights):
            raise ValueError("weights must be >= 0")
        object.__setattr__(self, "weight_list", weights)


@dataclass
class EpisodeRecord:
    seed: int
    true_hypothesis: int
    weight: float
    reward_kind: str
    discount: float
    resolution: ResolutionSpec
    labels: tuple
    actions: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    # row 0 is the prior, row t the belief after step t
    probabilities: list = field(default_factory=list)
    base_rewards: list = field(default_factory=list)
    hypothesis_rewards: list = field(default_factory=list)
    resolved: list = field(default_factory=list)
    deviations: int = 0
    failed: bool = False
    error: str = ""

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def decision_step(self) -> Optional[int]:
        for t, flag in enumerate(self.resolved, start=1):
            if flag:
                return t
        return None

    @property
    def decision_hypothesis(self) -> Optional[int]:
        t = self.decision_step
        if t is None:
            return None
        return int(np.argmax(self.probabilities[t]))

    @property
    def step_rewards(self) -> list:
        return [b + self.weight * h for b, h in zip(self.base_rewards, self.hypothesis_rewards)]

    @property
    def cumulative_base_reward(self) -> float:
        return discounted_sum(self.base_rewards, self.discount)

    @property
    def cumulative_hypothesis_reward(self) -> float:
        return discounted_sum(self.hypothesis_rewards, self.discount)

    @property
    def cumulative_total_reward(self) -> float:
        return discounted_sum(self.step_rewards, self.discount)

    @property
    def in_time_success(self) -> bool:
        t = self.decision_step
        return t is not None and t <= self.resolution.deadline and self.decision_hypothesis == self.true_hypothesis

    @property
    def late_success(self) -> bool:
        # in-time successes count as late successes too, so in-time <= late
        if self.in_time_success:
            return True
        if self.decision_step is None:
            return False
        return int(np.argmax(self.probabilities[-1])) == self.true_hypothesis

    def p_true_at(self, step: int) -> float:
        step = min(step, len(self.probabilities) - 1)
        return float(self.probabilities[step][self.true_hypothesis])

    def summary_row(self, trace: str = "") -> dict:
        t = self.decision_step
        return {
            "weight": self.weight,
            "reward_kind": self.reward_kind,
            "true_hypothesis": self.true_hypothesis,
            "seed": self.seed,
            "steps": self.steps,
            "failed": int(self.failed),
            "decision_step": t,
            "decision_hypothesis": self.decision_hypothesis,
            "in_time_success": int(self.in_time_success),
            "late_success": int(self.late_success),
            "cumulative_base_reward": self.cumulative_base_reward,
            "cumulative_hypothesis_reward": self.cumulative_hypothesis_reward,
            "cumulative_total_reward": self.cumulative_total_reward,
            "deviations": self.deviations,
            "p_true_at_decision": None if t is None else self.p_true_at(t),
            "p_true_at_deadline": self.p_true_at(self.resolution.deadline),
            "p_true_final": self.p_true_at(self.steps),
            "deadline": self.resolution.deadline,
            "trace": trace,
        }


def episode_seed(seed_base: int, cell: int, run: int) -> int:
    words = np.random.SeedSequence([seed_base, cell, run]).generate_state(2, np.uint32)
    return int((int(words[0]) << 31) ^ int(words[1]))


def run_episode(
    scenario: Scenario,
    true_hypothesis: int,
    solver: SolverConfig,
    seed: int,
    horizon: Optional[int] = None,
) -> EpisodeRecord:
    """Plan, act on the ground truth, observe, update; for ``horizon`` steps.

    Numerical failures abort the loop and return the partial record
    flagged ``failed``.
    """
    problem = scenario.problem
    if not 0 <= true_hypothesis < problem.n_hypotheses:
        raise ValueError(f"true_hypothesis {true_hypothesis} out of range")
    horizon = scenario.horizon if horizon is None else horizon
    env_ss, filt_ss, plan_ss = np.random.SeedSequence(seed).spawn(3)
    env_rng = np.random.default_rng(env_ss)
    filt_rng = np.random.default_rng(filt_ss)
    plan_rng = np.random.default_rng(plan_ss)

    rec = EpisodeRecord(
        seed=seed,
        true_hypothesis=true_hypothesis,
        weight=problem.weight,
        reward_kind=problem.hypothesis_reward_kind,
        discount=problem.discount,
        resolution=problem.resolution,
        labels=problem.labels,
    )
    truth = problem.conditioned_problems[true_hypothesis]
    belief = scenario.initial_belief(filt_rng)
    state = scenario.initial_state(env_rng)
    rec.probabilities.append(belief.probabilities.copy())
    try:
        for t in range(horizon):
            action = plan(problem, belief, solver, plan_rng)
            state, obs, r_base = generate_state(truth, state, action, env_rng, t)
            nxt = mm_update(problem, belief, action, obs, filt_rng)
            rho = hypothesis_reward(problem, belief, nxt)
            rec.actions.append(action)
            rec.observations.append(np.asarray(obs, dtype=float).copy())
            rec.probabilities.append(nxt.probabilities.copy())
            rec.base_rewards.append(r_base)
            rec.hypothesis_rewards.append(rho)
            rec.resolved.append(nxt.resolved)
            belief = nxt
    except (NumericalError, BeliefError, ArithmeticError, ValueError) as exc:
        rec.failed = True
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.deviations = scenario.deviations(rec.actions)
    return rec


# --------------------------------------------------------------------------
# scoring


def _mean_sem(values: Sequence[float]) -> tuple[Optional[float], Optional[float]]:
    x = np.asarray([v for v in values if v is not None], dtype=float)
    if x.size == 0:
        return None, None
    if x.size == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def score_rows(rows: Sequence[dict]) -> dict:
    """Table-style metrics of one cell from its flat per-episode rows."""
    if not rows:
        raise ValueError("cannot score an empty cell")
    n = len(rows)
    base_m, base_s = _mean_sem([r["cumulative_base_reward"] for r in rows])
    tot_m, tot_s = _mean_sem([r["cumulative_total_reward"] for r in rows])
    steps = [r["decision_step"] for r in rows if r["decision_step"] is not None]
    step_m, step_s = _mean_sem(steps)
    dev_m, dev_s = _mean_sem([r["deviations"] for r in rows])
    pd_m, pd_s = _mean_sem([r["p_true_at_deadline"] for r in rows])
    return {
        "weight": rows[0]["weight"],
        "reward_kind": rows[0]["reward_kind"],
        "runs": n,
        "failed": sum(int(r["failed"]) for r in rows),
        "base_reward_mean": base_m,
        "base_reward_sem": base_s,
        "total_reward_mean": tot_m,
        "total_reward_sem": tot_s,
        "decided": len(steps),
        "steps_to_decide_mean": step_m,
        "steps_to_decide_sem": step_s,
        "in_time_success": sum(int(r["in_time_success"]) for r in rows) / n,
        "late_success": sum(int(r["late_success"]) for r in rows) / n,
        "deviations_mean": dev_m,
        "deviations_sem": dev_s,
        "p_true_at_deadline_mean": pd_m,
        "p_true_at_deadline_sem": pd_s,
    }


def score_campaign(records: Sequence[EpisodeRecord], spec: Optional[ResolutionSpec] = None) -> dict:
    """Score one cell of records.  ``spec`` overrides each record's own deadline/threshold."""
    if not records:
        raise ValueError("cannot score an empty campaign")
    if spec is not None:
        records = [dataclasses.replace(r, resolution=spec) for r in records]
    metrics = score_rows([r.summary_row() for r in records])
    if metrics["in_time_success"] > metrics["late_success"]:
        raise CampaignError("in-time success exceeds late success")
    return metrics


def group_cells(rows: Iterable[dict]) -> list[list[dict]]:
    """Rows grouped by (reward_kind, weight), in order of first appearance."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["reward_kind"], float(r["weight"])), []).append(r)
    return list(cells.values())


# --------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class EpisodeTask:
    builder: Callable[[str, float], Scenario]
    reward_kind: str
    weight: float
    true_hypothesis: int
    seed: int
    solver: SolverConfig
    cell: int
    run: int


def _run_task(task: EpisodeTask) -> EpisodeRecord:
    scenario = task.builder(task.reward_kind, task.weight)
    return run_episode(scenario, task.true_hypothesis, task.solver, task.seed)


def campaign_tasks(config: CampaignConfig, builder, n_hypotheses: int) -> list[EpisodeTask]:
    tasks = []
    for cell, w in enumerate(config.weight_list):
        for run in range(config.runs_per_cell):
            tasks.append(
                EpisodeTask(
                    builder,
                    config.reward_kind,
                    w,
                    run % n_hypotheses,
                    episode_seed(config.seed_base, cell, run),
                    config.solver,
                    cell,
                    run,
                )
            )
    return tasks


def sweep_weights(
    config: CampaignConfig,
    builder: Callable[[str, float], Scenario],
    workers: int = 1,
    progress: Optional[Callable[[EpisodeTask, EpisodeRecord], None]] = None,
) -> list[list[EpisodeRecord]]:
    """Run ``runs_per_cell`` episodes per weight; ground truth cycles over the hypotheses.

    ``builder(reward_kind, weight)`` must be picklable when ``workers > 1``
    because every worker process rebuilds its own scenario.  Returns one
    list of records per weight, ordered by run index.
    """
    n_h = builder(config.reward_kind, config.weight_list[0]).problem.n_hypotheses
    tasks = campaign_tasks(config, builder, n_h)
    results: dict = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for task, rec in zip(tasks, pool.map(_run_task, tasks)):
                results[(task.cell, task.run)] = rec
                if progress:
                    progress(task, rec)
    else:
        for task in tasks:
            rec = _run_task(task)
            results[(task.cell, task.run)] = rec
            if progress:
                progress(task, rec)
    return [
        [results[(cell, run)] for run in range(config.runs_per_cell)]
        for cell in range(len(config.weight_list))
    ]


# --------------------------------------------------------------------------
# CSV output


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_csv(path: str, fields: Sequence[str], rows: Iterable[dict]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])


def write_trace(path: str, rec: EpisodeRecord) -> None:
    n = len(rec.labels)
    fields = ("step", *[f"p{i}" for i in range(n)], "action", "reward", "resolved", "base_reward", "hypothesis_reward")
    rows = []
    rewards = rec.step_rewards
    for t in range(rec.steps):
        row = {"step": t + 1, "action": rec.actions[t], "reward": rewards[t], "resolved": rec.resolved[t]}
        row.update({f"p{i}": rec.probabilities[t + 1][i] for i in range(n)})
        row["base_reward"] = rec.base_rewards[t]
        row["hypothesis_reward"] = rec.hypothesis_rewards[t]
        rows.append(row)
    write_csv(path, fields, rows)


_INT_FIELDS = {"true_hypothesis", "seed", "steps", "failed", "decision_step", "decision_hypothesis",
               "in_time_success", "late_success", "deviations", "deadline", "runs", "decided"}
_STR_FIELDS = {"reward_kind", "trace"}


def _parse(field_name: str, text: str):
    if text == "":
        return None if field_name not in _STR_FIELDS else ""
    if field_name in _STR_FIELDS:
        return text
    if field_name in _INT_FIELDS:
        return int(text)
    return float(text)


def read_csv(path: str, fields: Sequence[str]) -> list[dict]:
    """Read a campaign or summary CSV written by :func:`write_csv`; raises CampaignError if malformed."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != tuple(fields):
                raise CampaignError(f"{path}: unexpected header {header}")
            rows = []
            for lineno, line in enumerate(reader, start=2):
                if len(line) != len(fields):
                    raise CampaignError(f"{path}:{lineno}: expected {len(fields)} columns, got {len(line)}")
                rows.append({f: _parse(f, v) for f, v in zip(fields, line)})
    except (OSError, ValueError) as exc:
        raise CampaignError(f"{path}: {exc}") from exc
    return rows


def read_trace(path: str) -> dict:
    """Columns of a per-episode trace as numpy arrays; ``p`` is (steps, n_hypotheses)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = [[float(v) for v in line] for line in reader]
    except (OSError, ValueError, StopIteration) as exc:
        raise CampaignError(f"{path}: {exc}") from exc
    arr = np.asarray(data, dtype=float).reshape(len(data), len(header))
    cols = {h: arr[:, i] for i, h in enumerate(header)}
    pcols = sorted((h for h in header if h.startswith("p") and h[1:].isdigit()), key=lambda h: int(h[1:]))
    cols["p"] = arr[:, [header.index(h) for h in pcols]]
    return cols


def write_campaign(out_dir: str, records: Sequence[EpisodeRecord], trace_prefix: str = "") -> list[dict]:
    """Write traces and campaign.csv for ``records``; returns the rows as stored on disk."""
    rows = []
    for rec in records:
        rel = os.path.join(trace_prefix, "traces", f"{rec.seed}.csv")
        write_trace(os.path.join(out_dir, "traces", f"{rec.seed}.csv"), rec)
        rows.append(rec.summary_row(rel))
    path = os.path.join(out_dir, "campaign.csv")
    write_csv(path, CAMPAIGN_FIELDS, rows)
    return read_csv(path, CAMPAIGN_FIELDS)


def summarize(rows: Sequence[dict]) -> list[dict]:
    summary = []
    for cell in group_cells(rows):
        metrics = score_rows(cell)
        if metrics["in_time_success"] > metrics["late_success"]:
            raise CampaignError("in-time success exceeds late success")
        summary.append(metrics)
    return summary


def write_summary(out_dir: str, rows: Sequence[dict]) -> list[dict]:
    summary = summarize(rows)
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_FIELDS, summary)
    return summary


def format_summary(summary: Sequence[dict]) -> str:
    """Plain-text table of the summary rows for the console."""
    cols = ("weight", "reward_kind", "runs", "base_reward_mean", "base_reward_sem", "steps_to_decide_mean",
            "steps_to_decide_sem", "in_time_success", "late_success", "deviations_mean")
    cells = [[_fmt(r[c]) if r[c] is not None else "-" for c in cols] for r in summary]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
