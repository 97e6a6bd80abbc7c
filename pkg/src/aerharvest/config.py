"""Run configuration: JSON documents with strict key checking and per-map defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelParams
from .learner import Hyperparams, NetworkSpec
from .reward import RewardParams
from .scenario import SCENARIO_PRESETS, ScenarioRanges


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkShape:
    conv_layers: int = 2
    conv_filters: int = 16
    kernel_size: int = 5
    hidden: tuple[int, ...] = (256, 256, 256)


@dataclass(frozen=True)
class RunConfig:
    map: str = "manhattan32"
    seed: int = 0
    output_dir: str = "runs/default"
    checkpoint_interval: int = 100_000
    eval_interval_episodes: int = 5
    comm_slots: int = 4
    mission_slot_s: float = 1.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    reward: RewardParams = field(default_factory=RewardParams)
    learner: Hyperparams = field(default_factory=Hyperparams)
    network: NetworkShape = field(default_factory=NetworkShape)
    scenario: ScenarioRanges = field(default_factory=ScenarioRanges)

    def to_dict(self) -> dict:
        d = json.loads(json.dumps(dataclasses.asdict(self)))
        for section, keys in _HIDDEN.items():
            for key in keys:
                d[section].pop(key, None)
        return d

    def network_spec(self, map_size: int) -> NetworkSpec:
        return NetworkSpec.for_map(
            map_size,
            self.learner.local_size,
            self.learner.pool,
            conv_layers=self.network.conv_layers,
            conv_filters=self.network.conv_filters,
            kernel_size=self.network.kernel_size,
            hidden=tuple(self.network.hidden),
            flying_time_scale=float(self.scenario.flying_time[1]),
            data_scale=float(self.scenario.data[1]),
        )


_SECTIONS = {
    "channel": ChannelParams,
    "reward": RewardParams,
    "learner": Hyperparams,
    "network": NetworkShape,
    "scenario": ScenarioRanges,
}
# power_ratio is derived from the map, never configured
_HIDDEN = {"channel": {"power_ratio"}}


def _section(name: str, cls, base, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)} - _HIDDEN.get(name, set())
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return dataclasses.replace(base, **converted)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


def map_defaults(map_name: str) -> RunConfig:
    """Defaults for the bundled maps; anything else gets the 32x32 settings."""
    key = Path(map_name).stem.lower()
    cfg = RunConfig(map=map_name, scenario=SCENARIO_PRESETS.get(key, ScenarioRanges()))
    if key == "urban50":
        cfg = dataclasses.replace(cfg, learner=Hyperparams(max_steps=4_000_000, pool=5))
    return cfg


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = map_defaults(str(data.get("map", RunConfig.map)))
    updates = {}
    for key, value in data.items():
        if key in _SECTIONS:
            updates[key] = _section(key, _SECTIONS[key], getattr(base, key), value)
        else:
            updates[key] = value
    try:
        cfg = dataclasses.replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.learner.local_size % 2 == 0:
        raise ConfigError(f"learner.local_size must be odd, got {cfg.learner.local_size}")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Load a config file; a bare name like ``tiny8`` selects a bundled config."""
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).parent / "configs" / f"{p.stem.lower()}.json"
        if p.parent == Path(".") and bundled.exists():
            p = bundled
        else:
            raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(data)
