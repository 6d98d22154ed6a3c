"""Goal-directed nominal planner: forward Dubins-RRT* toward the goal landmark.

The nominal is deliberately optimistic: it ignores the budget and the
unknown parts of the map (only the domain bounds and an optional ``blocked``
predicate constrain it).  The gatekeeper decides how much of it is flown.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dubins import DubinsPath, State, TerminalOrbit, Trajectory, VehicleParams, dubins_lengths, dubins_shortest_path, realize_chain
from .environment import Domain, RenewalOrbit

Blocked = Callable[[np.ndarray], np.ndarray]  # (N, 2) points -> bool mask of blocked points


@dataclass(frozen=True)
class NominalParams:
    sample_budget: int = 2000
    goal_bias: float = 0.1
    max_steer_length: float = 20.0
    gamma: float = 150.0
    radius_floor: float = 10.0
    n_goal_headings: int = 16
    check_step: float = 2.0  # meters between edge feasibility checks

    def __post_init__(self):
        if self.sample_budget < 0 or not (0.0 <= self.goal_bias <= 1.0) or self.max_steer_length <= 0:
            raise ValueError("invalid nominal planner parameters")


@dataclass(frozen=True, eq=False)
class NominalPlan:
    trajectory: Trajectory  # ends in an open-ended orbit (goal orbit or in-place loiter)
    planned_at: int
    reached_goal_region: bool
    waypoints: np.ndarray  # (m, 3) poses joined by shortest Dubins paths
    length: float  # meters of geometric path before the terminal orbit


def loiter_orbit(pose, vehicle: VehicleParams) -> TerminalOrbit:
    """Circle entered tangentially at ``pose`` with the same turn direction as the renewal orbits."""
    rho = vehicle.min_turn_radius
    n, e, h = pose
    return TerminalOrbit(n + rho * math.sin(h), e - rho * math.cos(h), rho, -vehicle.speed / rho)


def _targets(goal, goal_orbit: RenewalOrbit | None, n: int) -> np.ndarray:
    if goal_orbit is not None:
        return goal_orbit.root_poses(n)
    hs = 2 * math.pi * np.arange(n) / n
    return np.column_stack([np.full(n, goal[0]), np.full(n, goal[1]), hs])


class _Tree:
    def __init__(self, root):
        self.poses = [np.asarray(root, float)]
        self.parent = [-1]
        self.cost = [0.0]
        self.children: list[list[int]] = [[]]

    def add(self, pose, parent: int, cost: float) -> int:
        self.poses.append(np.asarray(pose, float))
        self.parent.append(parent)
        self.cost.append(cost)
        self.children.append([])
        self.children[parent].append(len(self.poses) - 1)
        return len(self.poses) - 1

    def reparent(self, u: int, p: int, cost: float):
        self.children[self.parent[u]].remove(u)
        self.parent[u] = p
        self.children[p].append(u)
        delta = cost - self.cost[u]
        queue = deque([u])
        while queue:
            w = queue.popleft()
            self.cost[w] += delta
            queue.extend(self.children[w])

    def is_ancestor(self, a: int, b: int) -> bool:
        while b != -1:
            if b == a:
                return True
            b = self.parent[b]
        return False

    def branch(self, v: int) -> list[int]:
        out = []
        while v != -1:
            out.append(v)
            v = self.parent[v]
        return out[::-1]


class _Planner:
    def __init__(self, start, goal, capture_radius, vehicle, domain, params, blocked, goal_orbit):
        self.vehicle = vehicle
        self.rho = vehicle.min_turn_radius
        self.domain = domain
        self.params = params
        self.blocked = blocked
        self.goal = np.asarray(goal, float)
        self.capture = capture_radius
        self.targets = _targets(goal, goal_orbit, params.n_goal_headings)
        self.tree = _Tree(start)

    def feasible(self, q0, path: DubinsPath) -> bool:
        pts = path.sample(q0, self.params.check_step)[:, :2]
        if self.domain is not None and not np.all(self.domain.contains_points(pts)):
            return False
        return self.blocked is None or not np.any(self.blocked(pts))

    def near_radius(self) -> float:
        n = len(self.tree.poses)
        return max(self.params.radius_floor, self.params.gamma * math.sqrt(math.log(max(n, 2)) / n))

    def best_target_connection(self, q0) -> tuple[float, np.ndarray, DubinsPath] | None:
        lengths = dubins_lengths(q0, self.targets, self.rho)
        for j in np.argsort(lengths, kind="stable"):
            path = dubins_shortest_path(q0, self.targets[j], self.rho)
            if self.feasible(q0, path):
                return path.total_length, self.targets[j], path
        return None

    def sample(self, rng) -> np.ndarray:
        if rng.random() < self.params.goal_bias:
            return self.targets[rng.integers(len(self.targets))]
        if self.domain is not None:
            d = self.domain
            return np.array([rng.uniform(d.north_min, d.north_max), rng.uniform(d.east_min, d.east_max),
                             rng.uniform(0.0, 2 * math.pi)])
        box = np.concatenate([self.tree.poses[0][:2], self.goal])
        lo = np.minimum(box[:2], box[2:]) - 100.0
        hi = np.maximum(box[:2], box[2:]) + 100.0
        return np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(0.0, 2 * math.pi)])

    def extend(self, target) -> int | None:
        tree = self.tree
        poses = np.asarray(tree.poses)
        lengths = dubins_lengths(poses, target, self.rho)
        nearest = int(np.argmin(lengths))
        path = dubins_shortest_path(poses[nearest], target, self.rho)
        if path.total_length > self.params.max_steer_length:
            new = path.pose_at(poses[nearest], self.params.max_steer_length)
        else:
            new = np.asarray(target, float)
        r = self.near_radius()
        near = np.flatnonzero(np.hypot(poses[:, 0] - new[0], poses[:, 1] - new[1]) <= r)
        if nearest not in near:
            near = np.append(near, nearest)
        to_new = dubins_lengths(poses[near], new, self.rho)
        costs = np.asarray(tree.cost)[near] + to_new
        parent = None
        for j in np.lexsort((near, costs)):
            p = int(near[j])
            if to_new[j] < 1e-9:
                continue
            edge = dubins_shortest_path(poses[p], new, self.rho)
            if self.feasible(poses[p], edge):
                parent, cost = p, float(costs[j])
                break
        if parent is None:
            return None
        v = tree.add(new, parent, cost)
        # rewire neighbours through the new node when strictly cheaper
        from_new = dubins_lengths(new, poses[near], self.rho)
        for j in np.argsort(near):
            u = int(near[j])
            c = cost + float(from_new[j])
            if c < tree.cost[u] - 1e-12 and not tree.is_ancestor(u, v):
                edge = dubins_shortest_path(new, poses[u], self.rho)
                if self.feasible(new, edge):
                    tree.reparent(u, v, c)
        return v

    def in_capture(self, pose) -> bool:
        return math.hypot(pose[0] - self.goal[0], pose[1] - self.goal[1]) <= self.capture


def plan_nominal(start, goal, capture_radius: float, vehicle: VehicleParams, rng: np.random.Generator,
                 domain: Domain | None = None, params: NominalParams = NominalParams(),
                 goal_orbit: RenewalOrbit | None = None, blocked: Blocked | None = None,
                 t0: float = 0.0, planned_at: int = 0) -> NominalPlan:
    """Plan from ``start`` toward the goal point, ending on the goal orbit when it is reached.

    A direct shortest Dubins path to the goal poses is tried first; when it is
    feasible it is optimal and the tree search is skipped.  Otherwise the
    forward RRT* runs for ``params.sample_budget`` samples and returns the
    cheapest branch that connects to a goal pose, else the branch ending
    nearest the goal (continued by an in-place loiter).
    """
    start = np.asarray(start.as_array() if isinstance(start, State) else start, float)
    pl = _Planner(start, goal, capture_radius, vehicle, domain, params, blocked, goal_orbit)
    if pl.in_capture(start):
        traj = realize_chain(start, [], vehicle, t0, hold=loiter_orbit(start, vehicle))
        return NominalPlan(traj, planned_at, True, start[None, :].copy(), 0.0)

    direct = pl.best_target_connection(start)
    if direct is not None:
        waypoints = np.array([start, direct[1]])
        return _finish(pl, waypoints, True, goal_orbit, vehicle, t0, planned_at)

    connections: list[tuple[int, float, np.ndarray]] = []
    for _ in range(params.sample_budget):
        v = pl.extend(pl.sample(rng))
        if v is None:
            continue
        pose = pl.tree.poses[v]
        if math.hypot(pose[0] - goal[0], pose[1] - goal[1]) > params.gamma:
            continue
        conn = pl.best_target_connection(pose)
        if conn is not None:
            connections.append((v, conn[0], conn[1]))
    if connections:
        # branch costs may have dropped through rewiring since each connection was found
        totals = [pl.tree.cost[v] + ln for v, ln, _ in connections]
        v, _, target = connections[int(np.argmin(totals))]
        waypoints = np.array([pl.tree.poses[i] for i in pl.tree.branch(v)] + [target])
        return _finish(pl, waypoints, True, goal_orbit, vehicle, t0, planned_at)
    poses = np.asarray(pl.tree.poses)
    v = int(np.argmin(np.hypot(poses[:, 0] - goal[0], poses[:, 1] - goal[1])))
    waypoints = np.array([pl.tree.poses[i] for i in pl.tree.branch(v)])
    return _finish(pl, waypoints, False, goal_orbit, vehicle, t0, planned_at)


def _finish(pl: _Planner, waypoints, connected: bool, goal_orbit, vehicle, t0, planned_at) -> NominalPlan:
    rho = vehicle.min_turn_radius
    pieces = [(q0, dubins_shortest_path(q0, q1, rho)) for q0, q1 in zip(waypoints[:-1], waypoints[1:])]
    end = waypoints[-1]
    if connected and goal_orbit is not None:
        hold = goal_orbit.terminal(vehicle.speed)
    else:
        hold = loiter_orbit(end, vehicle)
    traj = realize_chain(waypoints[0], pieces, vehicle, t0, hold=hold)
    length = float(sum(p.total_length for _, p in pieces))
    reached = connected or pl.in_capture(end)
    return NominalPlan(traj, planned_at, reached, waypoints, length)
