"""Budget-constrained Dubins planning: a gatekeeper safety filter backed by a multi-root reverse RRT* forest."""

from .budget import BudgetModel, BudgetTrace
from .dubins import DubinsPath, State, Trajectory, VehicleParams, dubins_shortest_path
from .environment import FovParams, KnownWorld, Landmark, RenewalOrbit, WorldModel
from .gatekeeper import CommittedTrajectory, GatekeeperParams, gatekeeper_step
from .nominal import NominalParams, plan_nominal
from .reroot import GrowthParams, ReRootForest, backup_from_reroot, init_forest
from .scenario import ConfigError, ScenarioConfig, load_config, packaged_scenario
from .sim import ConstraintViolation, RunResult, RunTrace, run

__version__ = "0.1.0"

__all__ = [
    "BudgetModel", "BudgetTrace", "CommittedTrajectory", "ConfigError", "ConstraintViolation", "DubinsPath",
    "FovParams", "GatekeeperParams", "GrowthParams", "KnownWorld", "Landmark", "NominalParams", "ReRootForest",
    "RenewalOrbit", "RunResult", "RunTrace", "ScenarioConfig", "State", "Trajectory", "VehicleParams", "WorldModel",
    "backup_from_reroot", "dubins_shortest_path", "gatekeeper_step", "init_forest", "load_config",
    "packaged_scenario", "plan_nominal", "run",
]
