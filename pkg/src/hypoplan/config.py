"""Run configuration: YAML file plus dotted ``key=value`` overrides.

Sections mirror the parameter dataclasses::

    problem: vdp_track
    output_dir: results/vdp
    workers: 1
    campaign: {reward_kind: resolution_time, weight_list: [0, 50], runs_per_cell: 50, seed_base: 0}
    solver:   {iterations: 300, max_depth: 15, ...}
    resolution: {epsilon: 0.2, deadline: 30}
    updater:  {kind: particle, particle_count: 250}
    vdp: {...}   sda: {...}   linear: {...}

Omitted sections take the selected problem's defaults.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import yaml

from .estimators import UpdaterConfig
from .harness import CampaignConfig
from .mcts import SolverConfig
from .mdh import REWARD_KINDS, ResolutionSpec
from .problems import PARAM_SECTIONS, PROBLEMS, default_resolution, default_solver, default_updater
from .problems.linear import LinearParams
from .problems.sda import SdaParams
from .problems.vdp import VdpParams


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


@dataclass(frozen=True)
class CampaignSection:
    reward_kind: str = "resolution_time"
    weight_list: tuple = (50.0,)
    runs_per_cell: int = 50
    seed_base: int = 0


@dataclass(frozen=True)
class RunConfig:
    problem: str = "vdp_track"
    output_dir: str = "results"
    workers: int = 1
    campaign: CampaignSection = field(default_factory=CampaignSection)
    solver: Optional[SolverConfig] = None
    resolution: Optional[ResolutionSpec] = None
    updater: Optional[UpdaterConfig] = None
    vdp: VdpParams = field(default_factory=VdpParams)
    sda: SdaParams = field(default_factory=SdaParams)
    linear: LinearParams = field(default_factory=LinearParams)

    @property
    def params(self):
        return getattr(self, PARAM_SECTIONS[self.problem])

    def campaign_config(self) -> CampaignConfig:
        c = self.campaign
        return CampaignConfig(self.problem, c.reward_kind, c.weight_list, c.runs_per_cell, self.solver, c.seed_base)

    def with_defaults(self) -> "RunConfig":
        """Fill the problem-dependent sections left unset."""
        p = self.params
        return dataclasses.replace(
            self,
            solver=self.solver or default_solver(self.problem),
            resolution=self.resolution or default_resolution(self.problem, p),
            updater=self.updater or default_updater(self.problem, p),
        )


# --------------------------------------------------------------------------
# dict <-> dataclass


def _strip_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _coerce(value: Any, tp, path: str):
    tp, optional = _strip_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{path}: value required")
    if dataclasses.is_dataclass(tp):
        return build_dataclass(tp, value, path)
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tp is tuple or typing.get_origin(tp) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        for i, v in enumerate(value):
            if isinstance(v, (dict, list)):
                raise ConfigError(f"{path}[{i}]: expected a scalar, got {v!r}")
        return tuple(value)
    return value


def build_dataclass(cls, data: Any, path: str = ""):
    """Instantiate ``cls`` from a mapping; unknown keys and bad types raise ConfigError."""
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{path or cls.__name__}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"{where}: unknown field (known: {', '.join(sorted(names))})")
    kwargs = {k: _coerce(v, hints[k], f"{path}.{k}" if path else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


def to_dict(obj) -> Any:
    """Plain YAML-able structure (tuples become lists)."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


# --------------------------------------------------------------------------
# overrides and loading


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` -> (['a', 'b', 'c'], parsed value); the value is read as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected dotted.key=value")
    key, raw = text.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override {text!r}: empty key component")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{key}: cannot parse value {raw!r}: {exc}") from exc
    return parts, value


def apply_override(data: dict, parts: list[str], value: Any) -> None:
    node = data
    for i, p in enumerate(parts[:-1]):
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"{'.'.join(parts[: i + 1])}: not a section")
        node = nxt
    node[parts[-1]] = value


def load_mapping(path: str) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: config file not found") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def config_from_mapping(data: dict) -> RunConfig:
    cfg = build_dataclass(RunConfig, data)
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"problem: unknown problem {cfg.problem!r} (choose from {', '.join(PROBLEMS)})")
    if cfg.campaign.reward_kind not in REWARD_KINDS:
        raise ConfigError(f"campaign.reward_kind: must be one of {', '.join(REWARD_KINDS)}")
    if cfg.campaign.runs_per_cell < 1:
        raise ConfigError("campaign.runs_per_cell: must be >= 1")
    if not cfg.campaign.weight_list:
        raise ConfigError("campaign.weight_list: must be nonempty")
    if any(float(w) < 0 for w in cfg.campaign.weight_list):
        raise ConfigError("campaign.weight_list: weights must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    cfg = cfg.with_defaults()
    try:
        cfg.resolution.check_against(len(_hypothesis_count(cfg)))
    except ValueError as exc:
        raise ConfigError(f"resolution: {exc}") from exc
    return cfg


def _hypothesis_count(cfg: RunConfig) -> tuple:
    if cfg.problem == "vdp_track":
        return cfg.vdp.hypothesis_mus
    if cfg.problem == "sda":
        return cfg.sda.drag_multipliers
    return cfg.linear.retention


def load_config(path: str, overrides=(), seed: Optional[int] = None, output: Optional[str] = None) -> RunConfig:
    """Read ``path``, apply ``--set`` overrides and the ``--seed``/``--output`` shortcuts."""
    data = load_mapping(path)
    for text in overrides:
        apply_override(data, *parse_override(text))
    if seed is not None:
        apply_override(data, ["campaign", "seed_base"], seed)
    if output is not None:
        data["output_dir"] = output
    return config_from_mapping(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)
