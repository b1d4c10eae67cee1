"""Experiment configuration: one TOML document, strict keys, stable hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class PolicySource:
    # "scripted", or a pair of bundle paths per mode
    source: str = "scripted"
    coop: list[str] = field(default_factory=list)
    defect: list[str] = field(default_factory=list)


@dataclass
class TrainSection:
    scheme: str = "JAC"
    settings: list[list[float]] = field(default_factory=lambda: [[1.0, 0.0], [0.5, 0.5], [0.75, 0.25],
                                                                 [0.25, 0.75]])
    episodes: int = 3000
    steps_per_episode: int = 100
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    anneal_steps: int = 20000
    lr: float = 1e-4
    actor_lr: float | None = None
    batch: int = 128
    replay_capacity: int = 25000
    gamma: float = 0.99
    tau: float | None = None
    update_every: int | None = None
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    log_every: int = 10


@dataclass
class HeatmapSection:
    grid: int = 11
    episodes: int = 1000
    gamma: float = 0.99


@dataclass
class SpdSection:
    episodes: int = 1000
    gamma: float = 0.99


@dataclass
class DetectorSection:
    n: int = 8
    samples_per_class: int = 5000
    targets: list[int] = field(default_factory=lambda: [1, 0])
    offsets: str = "end"
    opponent_degrees: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    encoder: list[int] = field(default_factory=lambda: [256, 64])
    recurrent: int = 32
    recon_weight: float = 0.5
    w1: float = 1.0
    w2: float = 2.0
    lr: float = 1e-3
    epochs: int = 60
    batch: int = 128
    holdout: float = 0.2
    augment: bool = True
    calibration_episodes: int = 50
    own_grid: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])


@dataclass
class DetectorEvalSection:
    episodes: int = 50
    grid: int = 11
    own_grid: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0])
    target: int = 1


@dataclass
class AgentSection:
    estimator: str = "trained"
    detector_dir: str = ""
    n: int = 8
    alpha: float = 1.0
    delta: float = 0.1
    initial_degree: float = 0.5
    literal_update: bool = False


@dataclass
class SelfplaySection:
    episodes: int = 200
    runs: int = 5
    cases: list[str] = field(default_factory=lambda: ["CC", "CD", "DC", "DD"])
    threshold: float = 0.8
    window: int = 10


@dataclass
class SwitchingSection:
    periods: list[int] = field(default_factory=lambda: [50, 80, 110, 140, 170, 200])
    unit: str = "episodes"
    episodes: int = 440
    runs: int = 5
    trailing: int = 20


@dataclass
class ReplaySection:
    input: str = ""
    w1: float = 1.0
    w2: float = 1.0
    episodes: int = 3


@dataclass
class ExperimentConfig:
    game: str = "applepear"
    seed: int = 0
    out: str = "runs"
    plots: bool = False
    env: dict[str, Any] = field(default_factory=dict)
    policies: PolicySource = field(default_factory=PolicySource)
    train: TrainSection = field(default_factory=TrainSection)
    heatmap: HeatmapSection = field(default_factory=HeatmapSection)
    spd: SpdSection = field(default_factory=SpdSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    detector_eval: DetectorEvalSection = field(default_factory=DetectorEvalSection)
    agent: AgentSection = field(default_factory=AgentSection)
    selfplay: SelfplaySection = field(default_factory=SelfplaySection)
    switching: SwitchingSection = field(default_factory=SwitchingSection)
    replay: ReplaySection = field(default_factory=ReplaySection)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """First 16 hex digits of the SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _build(cls, table: dict[str, Any], where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where or 'top level'}]: {', '.join(unknown)}")
    kwargs = {}
    for name, value in table.items():
        default = getattr(cls(), name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, name)
        else:
            kwargs[name] = _coerce(default, value, f"{where}.{name}" if where else name)
    return cls(**kwargs)


def _coerce(default: Any, value: Any, where: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if default is not None and not isinstance(default, (dict, list)) and not isinstance(value, type(default)):
        raise ConfigError(f"{where} must be of type {type(default).__name__}")
    return value


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def packaged_config(name: str) -> Path:
    """Path of a bundled example config, e.g. ``packaged_config("applepear")``."""
    path = Path(__file__).parent / "configs" / f"{name}.toml"
    if not path.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return path
