"""Main autonomy loop: sense, grow the ReRoot forest, gatekeep the nominal, fly the commitment.

The loop runs one iteration per second of simulated time.  Within an
iteration the vehicle flies the current commitment exactly, sensing every
``round(1 / (sense_rate * dt))`` steps; growth and the gatekeeper run once at
the start of the iteration.  Every step is checked against the ground truth:
off-orbit states must see at least ``N_f`` features and the budget may never
exceed ``B``.  A violation raises :class:`ConstraintViolation`.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .budget import integrate_samples
from .environment import KnownWorld, WorldModel, band_index, sense_and_update
from .gatekeeper import CommittedTrajectory, InitialCommitmentError, gatekeeper_step, make_initial_committed
from .nominal import NominalPlan, plan_nominal
from .reroot import ReRootForest, init_forest
from .scenario import ConfigError, ScenarioConfig

log = logging.getLogger(__name__)

GOAL_REACHED = "goal_reached"
BUDGET_LOOP = "budget_loop"
ITERATION_CAP = "iteration_cap"
MIN_LOOP_REENTRIES = 3  # home-orbit re-entries that make a capped run a budget loop
REPLAN_DEVIATION = 1e-6  # meters/radians; any deviation from the nominal triggers a replan
TRACE_COLUMNS = ("t", "north", "east", "heading", "b", "features_in_fov", "phase", "commit_id")


class ConstraintViolation(AssertionError):
    """The flown state left the true safe set or exceeded the budget cap."""


@dataclass
class RunTrace:
    times: np.ndarray
    states: np.ndarray
    budget: np.ndarray
    features_in_fov: np.ndarray
    phase: np.ndarray  # "nominal" | "backup" | "orbit"
    commit_id: np.ndarray
    gatekeeper: list[dict]
    discoveries: list[dict]
    replans: list[dict]
    status: str
    iterations: int
    home_reentries: int
    seed: int
    cap: float
    n_f: int
    wall_clock_hit: bool = False

    @property
    def max_budget(self) -> float:
        return float(self.budget.max())

    @property
    def off_orbit(self) -> np.ndarray:
        return self.phase != "orbit"

    @property
    def min_features_off_orbit(self) -> int | None:
        off = self.off_orbit
        return int(self.features_in_fov[off].min()) if np.any(off) else None

    def summary(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "seed": self.seed,
            "final_time": float(self.times[-1]),
            "max_budget": self.max_budget,
            "budget_cap": self.cap,
            "min_features_off_orbit": self.min_features_off_orbit,
            "n_f": self.n_f,
            "home_reentries": self.home_reentries,
            "discoveries": self.discoveries,
            "replans": len(self.replans),
            "inherited_iterations": sum(1 for r in self.gatekeeper if r["inherited"]),
            "wall_clock_hit": self.wall_clock_hit,
        }

    def rows(self):
        for i in range(len(self.times)):
            yield (float(self.times[i]), float(self.states[i, 0]), float(self.states[i, 1]), float(self.states[i, 2]),
                   float(self.budget[i]), int(self.features_in_fov[i]), str(self.phase[i]), int(self.commit_id[i]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])

    def write_jsonl(self, path) -> None:
        """One JSON object per event: steps, gatekeeper decisions, discoveries and replans."""
        with open(path, "w") as fh:
            for r in self.rows():
                fh.write(json.dumps({"event": "step", **dict(zip(TRACE_COLUMNS, r))}) + "\n")
            for rec in self.gatekeeper:
                fh.write(json.dumps({"event": "gatekeeper", **rec}) + "\n")
            for rec in self.discoveries:
                fh.write(json.dumps({"event": "discovery", **rec}) + "\n")
            for rec in self.replans:
                fh.write(json.dumps({"event": "replan", **rec}) + "\n")

    def write_gatekeeper_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.gatekeeper:
                fh.write(json.dumps(rec) + "\n")


@dataclass
class RunResult:
    trace: RunTrace
    world: WorldModel
    known: KnownWorld
    forest: ReRootForest
    commitment: CommittedTrajectory
    plan: NominalPlan | None
    timings: dict[str, list[float]] = field(default_factory=dict)  # wall-clock seconds, never written to traces


def start_pose(cfg: ScenarioConfig, world: WorldModel) -> np.ndarray:
    """Pose on the home orbit whose heading points at the goal (bearing 0 without a goal)."""
    home = world.orbit(cfg.landmark("start").id)
    goal = cfg.goal_position()
    if goal is None or (goal[0] == home.center_north and goal[1] == home.center_east):
        return home.pose_at(0.0)
    heading = math.atan2(goal[1] - home.center_east, goal[0] - home.center_north)
    return home.pose_at(heading + math.pi / 2)


def _steps_per(cfg: ScenarioConfig, seconds: float) -> int:
    return int(round(seconds / cfg.vehicle.dt))


def run(cfg: ScenarioConfig, seed: int | None = None, max_iterations: int | None = None,
        wall_clock: float | None = None) -> RunResult:
    """Execute the autonomy loop until goal capture or the iteration cap."""
    seed = cfg.seed if seed is None else int(seed)
    K = cfg.limits.max_iterations if max_iterations is None else max_iterations
    wall_cap = cfg.limits.wall_clock if wall_clock is None else wall_clock
    vehicle, fov, model = cfg.vehicle, cfg.fov, cfg.budget_model()
    cap, b_reset = cfg.budget.cap, cfg.budget.b_reset
    world = cfg.build_world()
    known = KnownWorld.empty(world, fov)
    known.orbits = sorted((world.orbit(i) for i in cfg.known_landmark_ids), key=lambda o: o.landmark_id)
    home = world.orbit(cfg.landmark("start").id)
    goal = cfg.goal_position()
    goal_lm = cfg.goal_landmark() if cfg.goal_point is None else None
    goal_orbit = world.orbit(goal_lm.id) if goal_lm is not None else None

    per_iter = _steps_per(cfg, 1.0)
    sense_every = max(1, _steps_per(cfg, 1.0 / fov.sense_rate))
    n_h = _steps_per(cfg, cfg.gatekeeper.horizon)

    x = start_pose(cfg, world)
    discoveries = [{"t": 0.0, "landmark_id": o.landmark_id, "prior": True} for o in known.orbits]
    for o in sense_and_update(x, world, known):
        discoveries.append({"t": 0.0, "landmark_id": o.landmark_id, "prior": False})
    forest = init_forest(known.orbits, cfg.growth, vehicle, model, cfg.domain)
    pending_roots = []
    try:
        commitment = make_initial_committed(x, home, known, model, vehicle, 0.0, b_reset, cfg.loop_length)
    except InitialCommitmentError as e:
        raise ConfigError(str(e)) from e
    grow_rng = np.random.default_rng([seed, 1])

    times, states, budgets, counts, phases, cids = [], [], [], [], [], []
    gk_records: list[dict] = []
    replans: list[dict] = []
    timings: dict[str, list[float]] = {"growth": [], "gatekeeper": [], "nominal": []}
    b = b_reset
    plan: NominalPlan | None = None
    inherited_streak = 0
    in_home = True
    home_reentries = 0
    status = ITERATION_CAP
    wall_hit = False
    t_start = time.perf_counter()
    k = 0
    for k in range(K):
        t_k = k * per_iter * vehicle.dt
        if goal is not None and math.hypot(x[0] - goal[0], x[1] - goal[1]) <= cfg.capture_radius:
            status = GOAL_REACHED
            break
        if wall_cap and time.perf_counter() - t_start > wall_cap:
            wall_hit = True
            break
        # ReRoot growth over the known world (new orbits were rooted when sensed)
        if pending_roots:
            forest.add_root_nodes(pending_roots)
            pending_roots = []
        t0 = time.perf_counter()
        forest.grow(known, grow_rng)
        timings["growth"].append(time.perf_counter() - t0)

        # nominal replanning
        if goal is not None:
            reason = _replan_reason(plan, x, t_k, inherited_streak, n_h, vehicle.dt)
            if reason:
                t0 = time.perf_counter()
                rng = np.random.default_rng([seed, 2, len(replans)])
                plan = plan_nominal(x, goal, cfg.capture_radius, vehicle, rng, cfg.domain,
                                    cfg.nominal, goal_orbit, t0=t_k, planned_at=k)
                timings["nominal"].append(time.perf_counter() - t0)
                replans.append({"k": k, "t": t_k, "reason": reason, "reached_goal_region": plan.reached_goal_region,
                                "length": plan.length})
        if plan is not None:
            i_k = int(round((t_k - plan.trajectory.start_time) / vehicle.dt))
            window = plan.trajectory.window(i_k, n_h)
            t0 = time.perf_counter()
            commitment, rec = gatekeeper_step(window, forest, known, model, vehicle, b, commitment,
                                              cfg.gatekeeper, k)
            timings["gatekeeper"].append(time.perf_counter() - t0)
            inherited_streak = inherited_streak + 1 if rec.inherited else 0
            gk_records.append(rec.as_dict())

        # fly the commitment for one iteration
        traj = commitment.trajectory
        o_k = int(round((t_k - traj.start_time) / vehicle.dt))
        steps = np.arange(o_k, o_k + per_iter + 1)
        seg = traj.states_at_steps(steps)
        if np.max(np.abs(seg[0, :2] - x[:2])) > 1e-6:
            raise ConstraintViolation(f"commitment does not start at the vehicle state at t={t_k}")
        seg_t = t_k + np.arange(per_iter + 1) * vehicle.dt
        ctrl = np.where(steps < len(traj), traj.controls[np.minimum(steps, len(traj) - 1)],
                        traj.terminal.turn_rate if traj.terminal is not None else 0.0)
        bands = band_index(seg, world.orbits)
        on_orbit = bands >= 0
        seg_b = integrate_samples(seg_t, model.rates(seg, ctrl), on_orbit, b, b_reset)
        seg_n = world.index.count(seg, fov)
        _check_truth(seg_t, seg_b, seg_n, on_orbit, cap, cfg.n_f)
        switch = commitment.candidate.switch_index if commitment.candidate.switch_time > 0 else -1
        seg_phase = np.where(on_orbit, "orbit", np.where(steps <= switch, "nominal", "backup"))

        home_mask = bands == home.landmark_id
        for j in range(per_iter):
            if home_mask[j] and not in_home:
                home_reentries += 1
            in_home = bool(home_mask[j])
            if j % sense_every == 0:
                for o in sense_and_update(seg[j], world, known):
                    discoveries.append({"t": float(seg_t[j]), "landmark_id": o.landmark_id, "prior": False})
                    pending_roots.append(o)
        times.append(seg_t[:-1])
        states.append(seg[:-1])
        budgets.append(seg_b[:-1])
        counts.append(seg_n[:-1])
        phases.append(seg_phase[:-1])
        cids.append(np.full(per_iter, commitment.commit_id))
        x, b = seg[-1].copy(), float(seg_b[-1])
    else:
        k = K
    iterations = k + 1 if status == GOAL_REACHED else k
    # the final state is part of the trace too
    last_n = world.index.count(x[None, :], fov)
    last_band = band_index(x[None, :], world.orbits)
    _check_truth(np.array([0.0]), np.array([b]), last_n, last_band >= 0, cap, cfg.n_f)
    times.append(np.array([(k if status == GOAL_REACHED or wall_hit else K) * per_iter * vehicle.dt]))
    states.append(x[None, :])
    budgets.append(np.array([b]))
    counts.append(last_n)
    phases.append(np.array(["orbit" if last_band[0] >= 0 else (phases[-1][-1] if phases else "orbit")]))
    cids.append(np.array([commitment.commit_id]))
    if status != GOAL_REACHED and home_reentries >= MIN_LOOP_REENTRIES:
        status = BUDGET_LOOP
    trace = RunTrace(
        np.concatenate(times), np.concatenate(states), np.concatenate(budgets), np.concatenate(counts).astype(int),
        np.concatenate(phases), np.concatenate(cids), gk_records, discoveries, replans, status, iterations,
        home_reentries, seed, cap, cfg.n_f, wall_hit,
    )
    return RunResult(trace, world, known, forest, commitment, plan, timings)


def _replan_reason(plan: NominalPlan | None, x, t_k: float, inherited_streak: int, n_h: int, dt: float) -> str | None:
    if plan is None:
        return "initial"
    if inherited_streak >= 2:
        return "inherited"
    i_k = int(round((t_k - plan.trajectory.start_time) / dt))
    expected = plan.trajectory.states_at_steps(np.array([i_k]))[0]
    dh = abs((x[2] - expected[2] + math.pi) % (2 * math.pi) - math.pi)
    if math.hypot(x[0] - expected[0], x[1] - expected[1]) > REPLAN_DEVIATION or dh > REPLAN_DEVIATION:
        return "deviation"
    if not plan.reached_goal_region and i_k + n_h >= len(plan.trajectory):
        return "exhausted"
    return None


def _check_truth(t, b, n, on_orbit, cap: float, n_f: int) -> None:
    over = np.flatnonzero(b > cap + 1e-9)
    if len(over):
        i = over[0]
        raise ConstraintViolation(f"budget {b[i]:.6f} exceeds B={cap} at t={t[i]:.2f}")
    unsafe = np.flatnonzero(~on_orbit & (n < n_f))
    if len(unsafe):
        i = unsafe[0]
        raise ConstraintViolation(f"only {n[i]} features in view (N_f={n_f}) off-orbit at t={t[i]:.2f}")


def write_outputs(result: RunResult, out_dir, trace_format: str = "csv") -> dict[str, Path]:
    """Write trace, gatekeeper log, forest snapshot and summary; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    if trace_format == "csv":
        paths["trace"] = out / "trace.csv"
        result.trace.write_csv(paths["trace"])
    elif trace_format == "jsonl":
        paths["trace"] = out / "trace.jsonl"
        result.trace.write_jsonl(paths["trace"])
    else:
        raise ValueError(f"unknown trace format {trace_format!r}")
    paths["gatekeeper"] = out / "gatekeeper.jsonl"
    result.trace.write_gatekeeper_jsonl(paths["gatekeeper"])
    paths["forest"] = out / "forest.jsonl"
    result.forest.write_jsonl(paths["forest"])
    paths["summary"] = out / "summary.json"
    paths["summary"].write_text(json.dumps(result.trace.summary(), indent=2) + "\n")
    return paths
