"""Scenario configuration: TOML files describing the world, the vehicle and every planner knob."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .budget import BudgetModel, distance_rate
from .dubins import VehicleParams
from .environment import (
    DensityRegion,
    Domain,
    FovParams,
    Landmark,
    WorldModel,
    load_features_csv,
    load_landmarks_csv,
    synthetic_features,
)
from .gatekeeper import GatekeeperParams
from .nominal import NominalParams
from .reroot import GrowthParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass(frozen=True)
class BudgetConfig:
    rate_fraction: float = 0.03  # budget units per meter flown
    b_reset: float = 0.0
    cap: float = 9.0  # B


@dataclass(frozen=True)
class FeatureSource:
    file: Path | None = None
    seed: int = 0
    density: float = 0.012  # features per square meter
    regions: tuple[DensityRegion, ...] = ()


@dataclass(frozen=True)
class LandmarkSpec:
    landmark: Landmark
    known: bool = False  # renewal orbit known before the run starts


@dataclass(frozen=True)
class Limits:
    max_iterations: int = 600  # K, at one gatekeeper iteration per second
    wall_clock: float = 120.0  # seconds; 0 disables the cap


@dataclass(frozen=True)
class ScenarioConfig:
    domain: Domain
    landmarks: tuple[LandmarkSpec, ...]
    vehicle: VehicleParams = VehicleParams()
    fov: FovParams = FovParams()
    n_f: int = 8
    budget: BudgetConfig = BudgetConfig()
    features: FeatureSource = FeatureSource()
    capture_radius: float = 15.0
    goal_landmark_id: int | None = None  # defaults to the landmark of kind "goal"
    goal_point: tuple[float, float] | None = None  # a goal position with no renewal orbit; overrides landmarks
    gatekeeper: GatekeeperParams = GatekeeperParams()
    growth: GrowthParams = GrowthParams()
    nominal: NominalParams = NominalParams()
    limits: Limits = Limits()
    loop_length: float = 0.0  # initial out-and-back loop; 0 means a pure orbit hold
    orbit_radius: float | None = None  # defaults to the vehicle's minimum turn radius
    seed: int = 0
    name: str = "scenario"
    source: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        validate_config(self)

    # ------------------------------------------------------------------ builders

    def budget_model(self) -> BudgetModel:
        return BudgetModel(distance_rate(self.budget.rate_fraction, self.vehicle.speed), self.budget.b_reset,
                           self.budget.cap)

    def feature_points(self) -> tuple[np.ndarray, np.ndarray | None]:
        src = self.features
        if src.file is not None:
            ids, pts = load_features_csv(src.file)
            return pts, ids
        pts = synthetic_features(self.domain, src.density, np.random.default_rng(src.seed), src.regions)
        return pts, None

    def build_world(self) -> WorldModel:
        pts, ids = self.feature_points()
        rho = self.orbit_radius if self.orbit_radius is not None else self.vehicle.min_turn_radius
        try:
            return WorldModel(pts, [s.landmark for s in self.landmarks], self.domain, self.n_f, rho, ids)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def landmark(self, kind: str) -> Landmark:
        for s in self.landmarks:
            if s.landmark.kind == kind:
                return s.landmark
        raise ConfigError(f"no {kind} landmark")

    def goal_landmark(self) -> Landmark | None:
        """The landmark whose neighbourhood ends the mission (None: run until the iteration cap)."""
        for s in self.landmarks:
            if self.goal_landmark_id is not None and s.landmark.id == self.goal_landmark_id:
                return s.landmark
            if self.goal_landmark_id is None and s.landmark.kind == "goal":
                return s.landmark
        return None

    def goal_position(self) -> tuple[float, float] | None:
        """(north, east) of the mission goal, or None when the run has no goal."""
        if self.goal_point is not None:
            return self.goal_point
        lm = self.goal_landmark()
        return None if lm is None else (lm.north, lm.east)

    @property
    def known_landmark_ids(self) -> list[int]:
        return [s.landmark.id for s in self.landmarks if s.known or s.landmark.kind == "start"]

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def validate_config(cfg: ScenarioConfig) -> None:
    """Raise ConfigError on any inconsistency."""
    b = cfg.budget
    if not (b.cap > b.b_reset):
        raise ConfigError(f"budget cap B={b.cap} must exceed the reset value b_reset={b.b_reset} (B > b_reset)")
    if b.rate_fraction < 0 or b.b_reset < 0:
        raise ConfigError("budget rate and reset value must be non-negative")
    if cfg.n_f < 0:
        raise ConfigError("n_f must be non-negative")
    if cfg.capture_radius <= 0:
        raise ConfigError("capture radius must be positive")
    if cfg.limits.max_iterations <= 0 or cfg.limits.wall_clock < 0:
        raise ConfigError("run limits must be positive")
    if cfg.loop_length < 0:
        raise ConfigError("loop length must be non-negative")
    ratio = cfg.gatekeeper.horizon / cfg.vehicle.dt
    if abs(ratio - round(ratio)) > 1e-6 or abs(cfg.gatekeeper.decrement / cfg.vehicle.dt
                                                 - round(cfg.gatekeeper.decrement / cfg.vehicle.dt)) > 1e-6:
        raise ConfigError("gatekeeper horizon and decrement must be multiples of dt")
    if abs(1.0 / cfg.vehicle.dt - round(1.0 / cfg.vehicle.dt)) > 1e-6:
        raise ConfigError("dt must divide one second")
    kinds = [s.landmark.kind for s in cfg.landmarks]
    if kinds.count("start") != 1:
        raise ConfigError("exactly one start landmark is required")
    if kinds.count("goal") > 1:
        raise ConfigError("at most one goal landmark is allowed")
    ids = [s.landmark.id for s in cfg.landmarks]
    if len(set(ids)) != len(ids):
        raise ConfigError("landmark ids must be unique")
    for s in cfg.landmarks:
        if not cfg.domain.contains(s.landmark.north, s.landmark.east):
            raise ConfigError(f"landmark {s.landmark.id} lies outside the domain")
    if cfg.goal_landmark_id is not None and cfg.goal_landmark_id not in ids:
        raise ConfigError(f"goal landmark {cfg.goal_landmark_id} is not defined")
    if cfg.goal_point is not None:
        if cfg.goal_landmark_id is not None:
            raise ConfigError("give either a goal landmark or a goal position, not both")
        if not cfg.domain.contains(*cfg.goal_point):
            raise ConfigError("goal position lies outside the domain")
    if cfg.features.file is not None and not Path(cfg.features.file).exists():
        raise ConfigError(f"feature file not found: {cfg.features.file}")


# ---------------------------------------------------------------------- TOML


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _build(cls, sec: dict, name: str, rename: dict[str, str] | None = None, **extra):
    rename = rename or {}
    allowed = {f.name for f in fields(cls)}
    kwargs: dict[str, Any] = dict(extra)
    for key, value in sec.items():
        target = rename.get(key, key)
        if target not in allowed or target in extra:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        kwargs[target] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{name}]: {e}") from e


_TOP_LEVEL = {"name", "seed", "domain", "vehicle", "fov", "safety", "budget", "features", "landmarks", "landmarks_file",
              "goal", "gatekeeper", "growth", "nominal", "limits", "initial"}


def config_from_dict(doc: dict, base_dir: Path | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed TOML document; paths are relative to ``base_dir``."""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    unknown = set(doc) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "domain" not in doc:
        raise ConfigError("missing [domain]")
    domain = _build(Domain, _section(doc, "domain"), "domain")
    vehicle = _build(VehicleParams, _section(doc, "vehicle"), "vehicle")
    fov_sec = dict(_section(doc, "fov"))
    if "half_angle_deg" in fov_sec:
        fov_sec["half_angle"] = math.radians(fov_sec.pop("half_angle_deg"))
    fov = _build(FovParams, fov_sec, "fov")
    safety = _section(doc, "safety")
    if set(safety) - {"n_f"}:
        raise ConfigError(f"unknown keys in [safety]: {sorted(set(safety) - {'n_f'})}")
    budget = _build(BudgetConfig, _section(doc, "budget"), "budget")

    feat = dict(_section(doc, "features"))
    regions = tuple(_build(DensityRegion, r, "features.regions") for r in feat.pop("regions", []))
    if "file" in feat:
        feat["file"] = base_dir / feat["file"]
    features = _build(FeatureSource, feat, "features", regions=regions)

    specs: list[LandmarkSpec] = []
    if "landmarks_file" in doc:
        path = base_dir / doc["landmarks_file"]
        if not path.exists():
            raise ConfigError(f"landmark file not found: {path}")
        try:
            specs += [LandmarkSpec(lm, lm.kind != "mid") for lm in load_landmarks_csv(path)]
        except ValueError as e:
            raise ConfigError(str(e)) from e
    for row in doc.get("landmarks", []):
        row = dict(row)
        known = bool(row.pop("known", False))
        specs.append(LandmarkSpec(_build(Landmark, row, "landmarks"), known))
    if not specs:
        raise ConfigError("no landmarks given")

    goal = _section(doc, "goal")
    if set(goal) - {"capture_radius", "landmark", "north", "east"}:
        raise ConfigError(f"unknown keys in [goal]: {sorted(set(goal) - {'capture_radius', 'landmark', 'north', 'east'})}")
    if ("north" in goal) != ("east" in goal):
        raise ConfigError("[goal] position needs both north and east")
    goal_point = (float(goal["north"]), float(goal["east"])) if "north" in goal else None
    initial = _section(doc, "initial")
    if set(initial) - {"loop_length", "orbit_radius"}:
        raise ConfigError("unknown keys in [initial]")
    try:
        return ScenarioConfig(
            domain=domain,
            landmarks=tuple(specs),
            vehicle=vehicle,
            fov=fov,
            n_f=int(safety.get("n_f", 8)),
            budget=budget,
            features=features,
            capture_radius=float(goal.get("capture_radius", 15.0)),
            goal_landmark_id=goal.get("landmark"),
            goal_point=goal_point,
            gatekeeper=_build(GatekeeperParams, _section(doc, "gatekeeper"), "gatekeeper"),
            growth=_build(GrowthParams, _section(doc, "growth"), "growth"),
            nominal=_build(NominalParams, _section(doc, "nominal"), "nominal"),
            limits=_build(Limits, _section(doc, "limits"), "limits"),
            loop_length=float(initial.get("loop_length", 0.0)),
            orbit_radius=initial.get("orbit_radius"),
            seed=int(doc.get("seed", 0)),
            name=str(doc.get("name", "scenario")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> ScenarioConfig:
    """Parse a TOML scenario file."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return replace(config_from_dict(doc, path.parent), source=path)


def packaged_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``b9`` or ``b5``)."""
    p = Path(__file__).parent / "scenarios" / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"no packaged scenario {name!r}")
    return p
