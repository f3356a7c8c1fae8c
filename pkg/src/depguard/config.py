"""Run configuration with dotted-path overrides."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from depguard.core import NUMERIC_CONTROLS, CpBounds


@dataclass(frozen=True)
class EnergyConfig:
    e_tx: float = 0.020  # J per broadcast
    e_rx: float = 0.010  # J per reception
    e_idle: float = 0.001  # J per awake second
    e_sleep: float = 0.00001  # J per asleep second
    initial_battery: float = 100.0  # J


@dataclass(frozen=True)
class GossipConfig:
    ttl: int = 8
    record_ticks: int = 64  # per-tick link records retained for monitoring


@dataclass(frozen=True)
class MonitorConfig:
    window: int = 10
    capacity: int = 512


@dataclass(frozen=True)
class AnalysisConfig:
    prediction_window: int = 30
    horizon: int = 100
    unreachable_after: int = 5
    band_k: float = 2.0
    min_samples: int = 10
    min_trend_points: int = 30  # fresh frames needed before a trend is extrapolated
    min_balanced_accuracy: float = 0.75
    relearn_every: int = 50
    bootstrap_battery: float = 10.0
    bootstrap_rssi_margin: float = 3.0
    bootstrap_neighbors: float = 1.0
    bootstrap_messages: float = 1.0


@dataclass(frozen=True)
class AdaptationConfig:
    exploration_rate: float = 0.1
    cooldown: int = 10  # ticks after an action before the same node is adjusted again


@dataclass(frozen=True)
class EvaluationConfig:
    repair_delay: int = 50


@dataclass(frozen=True)
class Config:
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    gossip: GossipConfig = field(default_factory=GossipConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    bounds: CpBounds = field(default_factory=CpBounds)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            value = getattr(self, f.name)
            d[f.name] = value.to_dict() if isinstance(value, CpBounds) else asdict(value)
        return d


def _coerce(path: str, current, value):
    if isinstance(current, bool) or isinstance(value, bool):
        raise ValueError(f"config.{path}: booleans are not valid here")
    if isinstance(current, tuple):
        if not (isinstance(value, (list, tuple)) and len(value) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            raise ValueError(f"config.{path}: expected [lo, hi]")
        if isinstance(current[0], int):
            if any(float(v) != int(v) for v in value):
                raise ValueError(f"config.{path}: expected integer bounds")
            return (int(value[0]), int(value[1]))
        return (float(value[0]), float(value[1]))
    if isinstance(current, int):
        if not isinstance(value, (int, float)) or float(value) != int(value):
            raise ValueError(f"config.{path}: expected an integer")
        return int(value)
    if isinstance(current, float):
        if not isinstance(value, (int, float)):
            raise ValueError(f"config.{path}: expected a number")
        return float(value)
    raise ValueError(f"config.{path}: cannot override")


def apply_overrides(config: Config, overrides: dict) -> Config:
    """Return a copy of ``config`` with ``{"section.key": value}`` overrides applied."""
    for path in sorted(overrides):
        parts = path.split(".")
        if len(parts) != 2:
            raise ValueError(f"config.{path}: expected 'section.key'")
        section_name, key = parts
        if section_name not in {f.name for f in fields(config)}:
            raise ValueError(f"config.{path}: unknown section {section_name!r}")
        section = getattr(config, section_name)
        names = NUMERIC_CONTROLS if isinstance(section, CpBounds) else [f.name for f in fields(section)]
        if key not in names:
            raise ValueError(f"config.{path}: unknown key {key!r}")
        value = _coerce(path, getattr(section, key), overrides[path])
        config = replace(config, **{section_name: replace(section, **{key: value})})
    return config
