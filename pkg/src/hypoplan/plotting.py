"""Figures for the report command (matplotlib, file output only)."""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KIND_COLORS = {"resolution_time": "tab:blue", "entropy": "tab:orange", "none": "tab:gray"}
HYP_COLORS = ("tab:blue", "tab:green", "tab:red", "tab:purple", "tab:brown")


def _cell_label(kind: str, weight: float) -> str:
    return f"{kind} w={weight:g}"


def decision_probabilities(rows, path: str, threshold: float | None = None) -> None:
    """True-hypothesis probability at the deadline for every run, against the weight."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    kinds = sorted({r["reward_kind"] for r in rows})
    for k, kind in enumerate(kinds):
        sel = [r for r in rows if r["reward_kind"] == kind]
        x = [float(r["weight"]) for r in sel]
        y = np.array([r["p_true_at_deadline"] for r in sel], dtype=float)
        # small deterministic offsets keep the reward kinds apart
        off = (k - (len(kinds) - 1) / 2) * 0.15
        jitter = np.linspace(-0.05, 0.05, len(sel)) if len(sel) > 1 else np.zeros(1)
        uniq = sorted({float(r["weight"]) for r in rows})
        xs = np.array([uniq.index(v) for v in x], dtype=float) + off + jitter
        ax.scatter(xs, y, s=10, alpha=0.6, color=KIND_COLORS.get(kind), label=kind)
        ax.set_xticks(range(len(uniq)), [f"{w:g}" for w in uniq])
    if threshold is not None:
        ax.axhline(threshold, color="k", lw=0.8, ls="--")
    ax.set_xlabel("weight w")
    ax.set_ylabel("p(true hypothesis) at deadline")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def mean_traces(mean_rows, path: str) -> None:
    """Mean true-hypothesis probability against time, one line per (reward kind, weight)."""
    cells = defaultdict(list)
    for r in mean_rows:
        cells[(r["reward_kind"], r["weight"])].append(r)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for (kind, w), rs in sorted(cells.items()):
        rs.sort(key=lambda r: r["step"])
        t = np.array([r["step"] for r in rs])
        m = np.array([r["p_true_mean"] for r in rs])
        s = np.array([r["p_true_sem"] for r in rs])
        (line,) = ax.plot(t, m, label=_cell_label(kind, w))
        ax.fill_between(t, m - s, m + s, color=line.get_color(), alpha=0.2, lw=0)
    ax.set_xlabel("step")
    ax.set_ylabel("mean p(true hypothesis)")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_traces(run_rows, path: str) -> None:
    """Per-run true-hypothesis probability traces; one panel per (reward kind, weight)."""
    cells = defaultdict(lambda: defaultdict(list))
    for r in run_rows:
        cells[(r["reward_kind"], r["weight"])][(r["seed"], r["true_hypothesis"])].append(r)
    keys = sorted(cells)
    n = max(len(keys), 1)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False, sharey=True)
    for ax, key in zip(axes[0], keys):
        for (seed, h), rs in sorted(cells[key].items()):
            rs.sort(key=lambda r: r["step"])
            ax.plot([r["step"] for r in rs], [r["p_true"] for r in rs], lw=0.7, alpha=0.6,
                    color=HYP_COLORS[h % len(HYP_COLORS)])
        ax.set_title(_cell_label(*key), fontsize=9)
        ax.set_xlabel("step")
    axes[0][0].set_ylabel("p(true hypothesis)")
    axes[0][0].set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
