"""Command line: ``hypoplan run|sweep|report <path>``.

Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback

from .config import ConfigError, RunConfig, dump_config, load_config
from .harness import (
    CAMPAIGN_FIELDS,
    SUMMARY_FIELDS,
    CampaignError,
    format_summary,
    summarize,
    sweep_weights,
    write_campaign,
    write_csv,
)
from .problems import ScenarioBuilder
from .report import build_report

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _say(msg: str, stream=None) -> None:
    print(msg, file=stream or sys.stdout, flush=True)


def _prepare_output(cfg: RunConfig) -> str:
    out = cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output_dir: {out} is not writable ({exc.strerror})") from exc
    with open(os.path.join(out, "effective_config.yaml"), "w") as fh:
        fh.write(dump_config(cfg))
    return out


def _progress(total: int):
    done = [0]

    def report(task, rec):
        done[0] += 1
        d = rec.decision_step
        status = "FAILED " + rec.error if rec.failed else (
            f"decided H{rec.decision_hypothesis} at step {d}" if d is not None else "undecided"
        )
        _say(f"[{done[0]}/{total}] {task.reward_kind} w={task.weight:g} run {task.run} "
             f"true=H{task.true_hypothesis} seed={task.seed}: {status}")

    return report


def _campaign(cfg: RunConfig):
    builder = ScenarioBuilder(cfg.problem, cfg.params, cfg.resolution, cfg.updater)
    campaign = cfg.campaign_config()
    total = len(campaign.weight_list) * campaign.runs_per_cell
    cells = sweep_weights(campaign, builder, workers=cfg.workers, progress=_progress(total))
    return campaign, cells


def _weight_dir(w: float) -> str:
    return f"w_{w:g}"


def cmd_run(cfg: RunConfig) -> int:
    out = _prepare_output(cfg)
    _, cells = _campaign(cfg)
    rows = write_campaign(out, [r for cell in cells for r in cell])
    summary = summarize(rows)
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_FIELDS, summary)
    _say(format_summary(summary))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    out = _prepare_output(cfg)
    campaign, cells = _campaign(cfg)
    all_rows = []
    for w, records in zip(campaign.weight_list, cells):
        sub = _weight_dir(w)
        rows = write_campaign(os.path.join(out, sub), records, trace_prefix=sub)
        write_csv(os.path.join(out, sub, "summary.csv"), SUMMARY_FIELDS, summarize(rows))
        all_rows.extend(rows)
    write_csv(os.path.join(out, "campaign.csv"), CAMPAIGN_FIELDS, all_rows)
    summary = summarize(all_rows)
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_FIELDS, summary)
    _say(format_summary(summary))
    return EXIT_OK


def cmd_report(campaign_dir: str, output: str | None) -> int:
    out = output or campaign_dir.rstrip("/\\") + "-report"
    summary = build_report(campaign_dir, out)
    _say(format_summary(summary))
    _say(f"report written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hypoplan",
        description="Hypothesis-driven belief-space planning experiments.",
    )
    p.add_argument("command", choices=("run", "sweep", "report"))
    p.add_argument("path", help="config file (run, sweep) or campaign directory (report)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. solver.iterations=10 (repeatable)")
    p.add_argument("--seed", type=int, default=None, help="campaign seed_base")
    p.add_argument("--output", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "report":
            return cmd_report(args.path, args.output)
        overrides = list(args.overrides)
        if args.workers is not None:
            overrides.append(f"workers={args.workers}")
        cfg = load_config(args.path, overrides, seed=args.seed, output=args.output)
        return cmd_run(cfg) if args.command == "run" else cmd_sweep(cfg)
    except (ConfigError, CampaignError) as exc:
        _say(f"error: {exc}", sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        _say("interrupted", sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        traceback.print_exc()
        _say(f"error: {type(exc).__name__}: {exc}", sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
