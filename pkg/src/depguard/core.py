"""Shared vocabulary: features, observables, controllable parameters, labels."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace


class FeatureKind(enum.Enum):
    RESOURCE = "resource"
    FUNCTION = "function"


class Feature(enum.Enum):
    BATTERY = "battery"
    COMMUNICATION = "communication"

    @property
    def kind(self) -> FeatureKind:
        return FeatureKind.RESOURCE if self is Feature.BATTERY else FeatureKind.FUNCTION


class Observable(enum.Enum):
    """Observable parameters, in the fixed frame order."""

    RSSI_MEAN = "rssi_mean"
    NEIGHBOR_COUNT = "neighbor_count"
    MESSAGES_RECEIVED = "messages_received"
    BATTERY_LEVEL = "battery_level"

    @property
    def feature(self) -> Feature:
        return observable_feature(self)

    @property
    def unit(self) -> str:
        return _UNITS[self]


OBSERVABLES: tuple[Observable, ...] = tuple(Observable)
for _i, _obs in enumerate(OBSERVABLES):
    _obs.index = _i  # position in an observation frame
del _i, _obs
_UNITS = {
    Observable.RSSI_MEAN: "dBm",
    Observable.NEIGHBOR_COUNT: "count",
    Observable.MESSAGES_RECEIVED: "count-per-window",
    Observable.BATTERY_LEVEL: "joules",
}
_FEATURE_OF = {
    Observable.RSSI_MEAN: Feature.COMMUNICATION,
    Observable.NEIGHBOR_COUNT: Feature.COMMUNICATION,
    Observable.MESSAGES_RECEIVED: Feature.COMMUNICATION,
    Observable.BATTERY_LEVEL: Feature.BATTERY,
}


def observable_feature(obs: Observable) -> Feature:
    return _FEATURE_OF[obs]


class Resource(enum.Enum):
    RADIO = "radio"
    SENSOR = "sensor"
    ACTUATOR = "actuator"


ALL_RESOURCES = frozenset(Resource)


class AppState(enum.Enum):
    NORMAL = "Normal"
    FAILURE = "Failure"


class Dimension(enum.Enum):
    PRESENCE_SETTING = "PresenceSetting"
    ABSENCE_SETTING = "AbsenceSetting"
    REACTION_DELAY = "ReactionDelay"


@dataclass(frozen=True)
class ApplicationLabel:
    state: AppState = AppState.NORMAL
    violated: Dimension | None = None

    def __post_init__(self):
        if (self.state is AppState.FAILURE) != (self.violated is not None):
            raise ValueError("violated dimension must be set exactly when state is Failure")

    @property
    def normal(self) -> bool:
        return self.state is AppState.NORMAL

    @classmethod
    def failure(cls, dim: Dimension) -> "ApplicationLabel":
        return cls(AppState.FAILURE, dim)


NORMAL = ApplicationLabel()


@dataclass(frozen=True)
class ControlSettings:
    tx_power: float = 0.0  # dBm
    rx_sensitivity: float = -90.0  # dBm
    tx_schedules: int = 1  # per round
    rx_schedules: int = 1
    round_time: float = 1.0  # s
    sleep_fraction: float = 0.0
    active_resources: frozenset = field(default_factory=lambda: ALL_RESOURCES)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["active_resources"] = sorted(r.value for r in self.active_resources)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ControlSettings":
        d = dict(d)
        if "active_resources" in d:
            d["active_resources"] = frozenset(Resource(r) for r in d["active_resources"])
        return cls(**d)


NUMERIC_CONTROLS = ("tx_power", "rx_sensitivity", "tx_schedules", "rx_schedules",
                    "round_time", "sleep_fraction")
INTEGER_CONTROLS = ("tx_schedules", "rx_schedules")


@dataclass(frozen=True)
class CpBounds:
    """Closed interval per numeric control field."""

    tx_power: tuple[float, float] = (-10.0, 5.0)
    rx_sensitivity: tuple[float, float] = (-95.0, -80.0)
    tx_schedules: tuple[int, int] = (1, 4)
    rx_schedules: tuple[int, int] = (1, 4)
    round_time: tuple[float, float] = (0.25, 4.0)
    sleep_fraction: tuple[float, float] = (0.0, 0.95)

    def __post_init__(self):
        for name in NUMERIC_CONTROLS:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"bound {name}: lo {lo} > hi {hi}")
        if self.sleep_fraction[1] >= 1.0:
            raise ValueError("sleep_fraction upper bound must be < 1")
        if self.round_time[0] <= 0:
            raise ValueError("round_time lower bound must be > 0")

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in NUMERIC_CONTROLS}


def clamp_controls(settings: ControlSettings, bounds: CpBounds) -> ControlSettings:
    """Clamp every numeric field into its bound; in-range fields are untouched."""
    changes = {}
    for name in NUMERIC_CONTROLS:
        value = getattr(settings, name)
        lo, hi = getattr(bounds, name)
        clamped = min(max(value, lo), hi)
        if name in INTEGER_CONTROLS:
            clamped = int(round(clamped))
        if clamped != value or type(clamped) is not type(value):
            changes[name] = clamped
    return replace(settings, **changes) if changes else settings
