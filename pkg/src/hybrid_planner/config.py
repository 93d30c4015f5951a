"""Run configuration: one JSON document covering every stage.

Layout::

    {"preset": "full" | "desk",
     "seed": 0, "out_dir": "runs/x",
     "env": {...}, "masac": {...}, "backend": {...}, "metrics": {...}}

Every section is optional; omitted keys keep their defaults.  The ``desk``
preset swaps the full training sizes for the reduced CPU setup.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .env import EnvConfig
from .masac import MasacConfig, desk_config
from .minsnap import BackendConfig

OUT_DIR_ENV = "HYBRID_PLANNER_OUT"
PRESETS = ("full", "desk")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsConfig:
    dt_out: float = 0.02
    n_scenarios: int = 100
    eval_seed: int = 2024  # evaluation stream, kept apart from the training seed
    scenario_kind: str = "random"

    def __post_init__(self):
        if self.dt_out <= 0:
            raise ConfigError("metrics.dt_out must be positive")
        if self.n_scenarios < 0:
            raise ConfigError("metrics.n_scenarios must be non-negative")


def default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, "runs")


@dataclass
class RunConfig:
    preset: str = "full"
    seed: int = 0
    out_dir: str = field(default_factory=default_out_dir)
    env: EnvConfig = field(default_factory=EnvConfig)
    masac: MasacConfig = field(default_factory=MasacConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "env": asdict(self.env),
            "masac": self.masac.to_dict(),
            "backend": self.backend.to_dict(),
            "metrics": asdict(self.metrics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def echo(self, directory, name: str = "config.json") -> Path:
        """Write the fully resolved configuration next to an output artifact."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        p = d / name
        p.write_text(self.to_json() + "\n")
        return p


def _section(cls, data, name):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {unknown}")
    return dict(data)


def _build(cls, name, base=None, **values):
    try:
        if base is not None:
            return replace(base, **values)
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {"preset", "seed", "out_dir", "env", "masac", "backend", "metrics"}
    unknown = sorted(set(doc) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    preset = doc.get("preset", "full")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")

    masac_vals = _section(MasacConfig, doc.get("masac"), "masac")
    for key in ("critic_hidden", "actor_hidden"):
        if key in masac_vals:
            masac_vals[key] = tuple(masac_vals[key])
    masac_vals.setdefault("seed", seed)
    try:
        masac = desk_config(**masac_vals) if preset == "desk" else MasacConfig(**masac_vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"masac: {exc}") from exc

    return RunConfig(
        preset=preset,
        seed=seed,
        out_dir=str(doc.get("out_dir", default_out_dir())),
        env=_build(EnvConfig, "env", **_section(EnvConfig, doc.get("env"), "env")),
        masac=masac,
        backend=_build(BackendConfig, "backend", **_section(BackendConfig, doc.get("backend"), "backend")),
        metrics=_build(MetricsConfig, "metrics", **_section(MetricsConfig, doc.get("metrics"), "metrics")),
    )


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(doc)


def with_overrides(cfg: RunConfig, seed=None, robots=None, episodes=None, out_dir=None,
                   scenarios=None, dt_out=None) -> RunConfig:
    """Apply command-line overrides; the seed propagates to training."""
    try:
        masac = cfg.masac
        if seed is not None:
            masac = replace(masac, seed=seed)
        if robots is not None:
            masac = replace(masac, n_robots=robots)
        if episodes is not None:
            masac = replace(masac, episodes=episodes, warmup_episodes=min(masac.warmup_episodes, episodes))
        metrics = cfg.metrics
        if scenarios is not None:
            metrics = replace(metrics, n_scenarios=scenarios)
        if dt_out is not None:
            metrics = replace(metrics, dt_out=dt_out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(
        cfg,
        seed=cfg.seed if seed is None else seed,
        out_dir=cfg.out_dir if out_dir is None else str(out_dir),
        masac=masac,
        metrics=metrics,
    )
