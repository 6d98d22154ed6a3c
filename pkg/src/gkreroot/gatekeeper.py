"""Gatekeeper: commit the longest nominal prefix that still admits a safe, budget-feasible backup.

At every iteration the candidate for switch time ``T_S`` follows the nominal
plan for ``T_S`` seconds and then the best backup from the ReRoot forest.  The
first valid candidate in a top-down scan over ``T_S`` is committed; when none
validates, the previous commitment is kept unchanged (it is still valid by
induction, because it ends in a renewal orbit).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .budget import BudgetModel, BudgetTrace, check_budget, integrate_budget
from .dubins import Trajectory, VehicleParams, realize_chain
from .environment import KnownWorld, RenewalOrbit
from .reroot import Backup, ReRootForest, backup_from_reroot

log = logging.getLogger(__name__)


class InitialCommitmentError(ValueError):
    """The scenario does not admit a valid initial commitment from the start pose."""


@dataclass(frozen=True)
class GatekeeperParams:
    horizon: float = 20.0  # T_H
    decrement: float = 2.0  # delta T
    full_scan: bool = False  # evaluate every T_S to report how many were valid

    def __post_init__(self):
        if not (0 < self.decrement <= self.horizon):
            raise ValueError("need 0 < decrement <= horizon")

    def switch_times(self) -> list[float]:
        n = int(math.floor(self.horizon / self.decrement + 1e-9))
        return [self.horizon - i * self.decrement for i in range(n + 1)] + (
            [] if abs(self.horizon - n * self.decrement) < 1e-9 else [0.0]
        )


@dataclass(frozen=True, eq=False)
class CandidateTrajectory:
    switch_time: float
    prefix: Trajectory
    backup: Backup
    trajectory: Trajectory  # prefix followed by backup, ending in an orbit hold
    budget: BudgetTrace
    hold_index: int  # first sample of the terminal orbit hold

    @property
    def switch_index(self) -> int:
        return len(self.prefix) - 1

    @property
    def t_kB(self) -> float:
        return float(self.trajectory.times[self.hold_index])

    @property
    def peak_budget(self) -> float:
        return float(self.budget.values[: self.hold_index + 1].max())


@dataclass(frozen=True, eq=False)
class CommittedTrajectory:
    candidate: CandidateTrajectory
    committed_at: int
    commit_id: int
    valid: bool = True  # False when carried over from an earlier iteration

    @property
    def trajectory(self) -> Trajectory:
        return self.candidate.trajectory


def build_candidate(nominal: Trajectory, switch_time: float, forest: ReRootForest, known: KnownWorld,
                    model: BudgetModel, vehicle: VehicleParams, b_k: float,
                    nominal_budget: BudgetTrace | None = None) -> CandidateTrajectory | None:
    """Nominal prefix up to ``switch_time`` followed by the best ReRoot backup; None without a backup."""
    i = int(round(switch_time / vehicle.dt))
    if i >= len(nominal):
        raise ValueError("nominal trajectory shorter than the switch time")
    if nominal_budget is None:
        nominal_budget = integrate_budget(nominal.slice(0, i), b_k, model, known.orbits)
    b_switch = float(nominal_budget.values[i])
    prefix = nominal.slice(0, i)
    backup = backup_from_reroot(forest, prefix.states[-1], float(prefix.times[-1]), b_switch, known)
    if backup is None:
        return None
    full = prefix.append(backup.trajectory)
    trace = integrate_budget(full, b_k, model, known.orbits)
    return CandidateTrajectory(switch_time, prefix, backup, full, trace, i + backup.hold_index)


def validate(c: CandidateTrajectory, known: KnownWorld, cap: float) -> bool:
    """Known-safe up to orbit entry, budget within ``cap`` until then, and ends in a known orbit."""
    term = c.trajectory.terminal
    if term is None:
        return False
    hold = c.hold_index
    if hold >= len(c.trajectory):
        return False
    entry = c.trajectory.states[hold]
    if known.band_index(entry[None, :])[0] < 0:
        return False
    if not check_budget(c.budget, cap, upto=hold):
        return False
    return bool(np.all(known.safe_mask(c.trajectory.states[: hold + 1])))


@dataclass(frozen=True)
class GatekeeperRecord:
    k: int
    t_k: float
    T_S_committed: float | None
    valid_count: int
    inherited: bool
    b_peak: float
    t_kB: float
    commit_id: int

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "t_k": self.t_k,
            "T_S_committed": self.T_S_committed,
            "valid_count": self.valid_count,
            "inherited": self.inherited,
            "b_peak": self.b_peak,
            "t_kB": self.t_kB,
            "commit_id": self.commit_id,
        }


def gatekeeper_step(nominal: Trajectory, forest: ReRootForest, known: KnownWorld, model: BudgetModel,
                    vehicle: VehicleParams, b_k: float, prev: CommittedTrajectory, params: GatekeeperParams,
                    k: int = 0, next_id: int | None = None) -> tuple[CommittedTrajectory, GatekeeperRecord]:
    """One gatekeeper iteration; never fails to return a commitment."""
    t_k = float(nominal.times[0])
    n_h = int(round(params.horizon / vehicle.dt))
    if len(nominal) < n_h + 1:
        raise ValueError("nominal trajectory must cover the horizon")
    window = nominal.slice(0, n_h)
    # prefix checks are shared by every candidate: compute them once
    safe = known.safe_mask(window.states)
    safe_upto = np.logical_and.accumulate(safe)
    nominal_budget = integrate_budget(window, b_k, model, known.orbits)
    within_upto = np.logical_and.accumulate(nominal_budget.values <= model.cap)
    chosen: CandidateTrajectory | None = None
    valid_count = 0
    for ts in params.switch_times():
        i = int(round(ts / vehicle.dt))
        if not (safe_upto[i] and within_upto[i]):
            continue
        c = build_candidate(window, ts, forest, known, model, vehicle, b_k, nominal_budget)
        if c is None or not validate(c, known, model.cap):
            continue
        valid_count += 1
        if chosen is None:
            chosen = c
        if not params.full_scan:
            break
    if chosen is None:
        committed = replace(prev, valid=False)
        cand = prev.candidate
        rec = GatekeeperRecord(k, t_k, None, 0, True, cand.peak_budget, cand.t_kB, prev.commit_id)
        return committed, rec
    cid = prev.commit_id + 1 if next_id is None else next_id
    committed = CommittedTrajectory(chosen, k, cid, True)
    rec = GatekeeperRecord(k, t_k, chosen.switch_time, valid_count, False, chosen.peak_budget, chosen.t_kB, cid)
    return committed, rec


def make_initial_committed(start, orbit: RenewalOrbit, known: KnownWorld, model: BudgetModel,
                           vehicle: VehicleParams, t0: float = 0.0, b0: float = 0.0,
                           loop_length: float = 0.0) -> CommittedTrajectory:
    """Seed commitment: hold the home orbit, or fly a short straight out-and-back loop first.

    ``start`` must lie exactly on ``orbit``.  A loop flies ``loop_length`` meters
    straight ahead, returns to the start pose along the shortest Dubins path
    and then holds the orbit; it must validate against the known world.
    """
    from .dubins import dubins_shortest_path
    from .reroot import hold_backup

    start = np.asarray(start, float)
    if not orbit.in_band(start)[0]:
        raise InitialCommitmentError("start pose is not on the home orbit")
    hold = hold_backup(start, t0, b0, orbit, known, model, vehicle)
    if loop_length <= 0:
        prefix = Trajectory(np.array([t0]), start[None, :].copy(), np.array([0.0]), vehicle.dt)
        cand = CandidateTrajectory(0.0, prefix, hold, hold.trajectory, hold.budget, 0)
    else:
        rho = vehicle.min_turn_radius
        out = dubins_shortest_path(start, start + [loop_length * math.cos(start[2]), loop_length * math.sin(start[2]), 0.0], rho)
        mid = out.end_pose(start)
        back = dubins_shortest_path(mid, start, rho)
        traj = realize_chain(start, [(start, out), (mid, back)], vehicle, t0, hold=orbit.terminal(vehicle.speed))
        from .dubins import hold_start_index

        hold_i = hold_start_index(out.total_length + back.total_length, vehicle.step_length)
        trace = integrate_budget(traj, b0, model, known.orbits)
        prefix = Trajectory(np.array([t0]), start[None, :].copy(), np.array([0.0]), vehicle.dt)
        bk = Backup(traj, trace, None, float(trace.values[hold_i - 1]) if hold_i > 0 else b0, hold_i, orbit.landmark_id)
        cand = CandidateTrajectory(0.0, prefix, bk, traj, trace, hold_i)
    if not validate(cand, known, model.cap):
        raise InitialCommitmentError(
            "the initial out-and-back loop is not known-safe or exceeds the budget; "
            "the start must admit a valid first commitment"
        )
    return CommittedTrajectory(cand, 0, 0, True)
