"""Rebuild summaries, plot-ready tables and figures from a stored campaign."""
from __future__ import annotations

import os
from collections import defaultdict

import numpy as np

from . import plotting
from .harness import CAMPAIGN_FIELDS, CampaignError, read_csv, read_trace, write_csv, write_summary

DECISION_FIELDS = ("weight", "reward_kind", "seed", "true_hypothesis", "decision_step", "decision_hypothesis",
                   "p_true_at_decision", "p_true_at_deadline")
MEAN_TRACE_FIELDS = ("weight", "reward_kind", "step", "runs", "p_true_mean", "p_true_sem")
RUN_TRACE_FIELDS = ("weight", "reward_kind", "seed", "true_hypothesis", "step", "p_true", "p_max", "action", "resolved")


def load_campaign(campaign_dir: str) -> tuple[list[dict], dict]:
    """Rows of campaign.csv and the trace of each row, keyed by seed."""
    path = os.path.join(campaign_dir, "campaign.csv")
    if not os.path.isfile(path):
        raise CampaignError(f"{path}: not found")
    rows = read_csv(path, CAMPAIGN_FIELDS)
    if not rows:
        raise CampaignError(f"{path}: no episode rows")
    traces = {}
    for r in rows:
        if not r["trace"]:
            raise CampaignError(f"{path}: seed {r['seed']} has no trace path")
        traces[(r["reward_kind"], r["weight"], r["seed"])] = read_trace(os.path.join(campaign_dir, r["trace"]))
    return rows, traces


def run_trace_rows(rows, traces) -> list[dict]:
    out = []
    for r in rows:
        tr = traces[(r["reward_kind"], r["weight"], r["seed"])]
        p = tr["p"]
        for k in range(p.shape[0]):
            out.append({
                "weight": r["weight"],
                "reward_kind": r["reward_kind"],
                "seed": r["seed"],
                "true_hypothesis": r["true_hypothesis"],
                "step": int(tr["step"][k]),
                "p_true": float(p[k, r["true_hypothesis"]]),
                "p_max": float(p[k].max()),
                "action": int(tr["action"][k]),
                "resolved": int(tr["resolved"][k]),
            })
    return out


def mean_trace_rows(run_rows) -> list[dict]:
    cells = defaultdict(lambda: defaultdict(list))
    for r in run_rows:
        cells[(r["reward_kind"], r["weight"])][r["step"]].append(r["p_true"])
    out = []
    for (kind, w), by_step in cells.items():
        for step in sorted(by_step):
            v = np.asarray(by_step[step], dtype=float)
            sem = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
            out.append({"weight": w, "reward_kind": kind, "step": step, "runs": int(v.size),
                        "p_true_mean": float(v.mean()), "p_true_sem": sem})
    return out


def build_report(campaign_dir: str, out_dir: str, figures: bool = True) -> list[dict]:
    """Write summary.csv, the long-format tables and (optionally) PNG figures into ``out_dir``."""
    if os.path.abspath(campaign_dir) == os.path.abspath(out_dir):
        raise CampaignError("report output must differ from the campaign directory")
    rows, traces = load_campaign(campaign_dir)
    os.makedirs(out_dir, exist_ok=True)
    summary = write_summary(out_dir, rows)
    write_csv(os.path.join(out_dir, "decision_times.csv"), DECISION_FIELDS, rows)
    runs = run_trace_rows(rows, traces)
    means = mean_trace_rows(runs)
    write_csv(os.path.join(out_dir, "run_traces.csv"), RUN_TRACE_FIELDS, runs)
    write_csv(os.path.join(out_dir, "mean_traces.csv"), MEAN_TRACE_FIELDS, means)
    if figures:
        plotting.decision_probabilities(rows, os.path.join(out_dir, "decision_probabilities.png"))
        plotting.mean_traces(means, os.path.join(out_dir, "mean_traces.png"))
        plotting.run_traces(runs, os.path.join(out_dir, "run_traces.png"))
    return summary
