"""Multi-root reverse RRT* forest anchored on renewal orbits, and backup selection.

Every node stores a Dubins edge *towards* its parent, so following parents
from any node flies the vehicle to a root pose on a renewal orbit.  Node cost
is the budget spent along that chain (no renewal on the way), which is what a
backup through the node costs before the budget resets.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .budget import BudgetModel, BudgetTrace, integrate_budget, path_budget, pre_jump_value
from .dubins import (
    DubinsPath,
    State,
    Trajectory,
    VehicleParams,
    dubins_lengths,
    dubins_segments,
    dubins_shortest_path,
    hold_start_index,
    realize_chain,
    sample_dubins_batch,
)
from .environment import ORBIT_RADIUS_TOL, Domain, KnownWorld, RenewalOrbit

log = logging.getLogger(__name__)

_ENTRY_STEP = 0.5  # arc-length spacing used to bound where an edge first touches an orbit annulus
_TIE = 1e-9  # costs closer than this are treated as equal when choosing parents
_SAFETY_CHUNK = 4  # candidate parent edges safety-checked per batch


@dataclass(frozen=True)
class GrowthParams:
    n_update: int = 50
    n_root: int = 8
    near_ball_radius: float = 30.0  # R, the positional ball used for backup candidates
    max_steer_length: float = 20.0
    gamma: float = 150.0  # shrinking RRT* neighbour radius gamma*sqrt(log n / n) ...
    radius_floor: float = 10.0  # ... never below this (the turn radius)
    retry_factor: int = 10  # rejected samples allowed per requested node
    edge_resolution: float = 1.0  # meters between safety checks on an edge
    max_nodes: int = 6000
    backup_time_cap: float = 120.0  # seconds

    def __post_init__(self):
        for name in ("n_update", "n_root", "near_ball_radius", "max_steer_length", "gamma", "radius_floor",
                     "retry_factor", "edge_resolution", "max_nodes", "backup_time_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"growth parameter {name} must be positive")


@dataclass(frozen=True)
class Node:
    id: int
    pose: State
    parent: int | None
    root_orbit: int
    cost_to_root: float
    depth: int


class ReRootForest:
    """Array-backed forest; node ids are dense integers in insertion order."""

    def __init__(self, params: GrowthParams, vehicle: VehicleParams, model: BudgetModel, domain: Domain | None = None):
        self.params = params
        self.vehicle = vehicle
        self.model = model
        self.domain = domain
        self.n = 0
        cap = 256
        self.poses = np.zeros((cap, 3))
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.root_orbit = np.full(cap, -1, dtype=np.int64)
        self.cost = np.zeros(cap)
        self.depth = np.zeros(cap, dtype=np.int64)
        self.edge_cost = np.zeros(cap)
        self.edge_len = np.zeros(cap)
        self.chain_len = np.zeros(cap)  # arc length to the root
        self.edge_entry = np.full(cap, np.inf)  # lower bound on first annulus touch along own edge
        self.entry_lb = np.zeros(cap)  # lower bound on first annulus touch along the chain
        self.edge_path: list[DubinsPath | None] = []
        self.children: list[list[int]] = []
        self.orbits: dict[int, RenewalOrbit] = {}
        self.roots: dict[int, list[int]] = {}
        self._pending_roots: list[int] = []
        self.revision = 0

    # ------------------------------------------------------------------ storage

    def __len__(self) -> int:
        return self.n

    def _grow_storage(self):
        cap = len(self.parent) * 2
        for name in ("poses", "parent", "root_orbit", "cost", "depth", "edge_cost", "edge_len", "chain_len",
                     "edge_entry", "entry_lb"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def _append(self, pose, parent: int, orbit_id: int, path: DubinsPath | None, edge_cost: float) -> int:
        if self.n == len(self.parent):
            self._grow_storage()
        i = self.n
        self.n += 1
        self.poses[i] = pose
        self.parent[i] = parent
        self.edge_path.append(path)
        self.children.append([])
        self.edge_cost[i] = edge_cost
        if parent < 0:
            self.root_orbit[i] = orbit_id
            self.cost[i] = 0.0
            self.depth[i] = 0
            self.edge_len[i] = 0.0
            self.chain_len[i] = 0.0
            self.edge_entry[i] = np.inf
            self.entry_lb[i] = 0.0
        else:
            self.children[parent].append(i)
            self.edge_len[i] = path.total_length
            self.edge_entry[i] = self._edge_entry(pose, path, self.orbits.values())
            self._refresh(i)
        return i

    def _refresh(self, i: int):
        p = self.parent[i]
        self.root_orbit[i] = self.root_orbit[p]
        self.cost[i] = self.cost[p] + self.edge_cost[i]
        self.depth[i] = self.depth[p] + 1
        self.chain_len[i] = self.chain_len[p] + self.edge_len[i]
        self.entry_lb[i] = min(self.edge_entry[i], self.edge_len[i] + self.entry_lb[p])

    def _refresh_subtree(self, i: int):
        queue = deque([i])
        while queue:
            u = queue.popleft()
            self._refresh(u)
            queue.extend(self.children[u])

    @staticmethod
    def _edge_entry(pose, path: DubinsPath, orbits: Iterable[RenewalOrbit]) -> float:
        """Arc length before which the edge certainly stays out of every orbit annulus."""
        orbits = list(orbits)
        if not orbits:
            return np.inf
        h = _ENTRY_STEP
        pts = path.sample(pose, h)
        s = np.minimum(np.arange(len(pts)) * h, path.total_length)
        best = np.inf
        for orb in orbits:
            g = np.abs(np.hypot(pts[:, 0] - orb.center_north, pts[:, 1] - orb.center_east) - orb.radius)
            hit = np.flatnonzero(g <= ORBIT_RADIUS_TOL + h / 2)
            if len(hit):
                best = min(best, max(0.0, s[hit[0]] - h / 2))
        return best

    # ------------------------------------------------------------------ views

    def node(self, i: int) -> Node:
        if not (0 <= i < self.n):
            raise KeyError(f"unknown node {i}")
        p = int(self.parent[i])
        return Node(i, State.from_array(self.poses[i]), None if p < 0 else p, int(self.root_orbit[i]),
                    float(self.cost[i]), int(self.depth[i]))

    def nodes(self) -> list[Node]:
        return [self.node(i) for i in range(self.n)]

    @property
    def positions(self) -> np.ndarray:
        return self.poses[: self.n, :2]

    def is_root(self, i: int) -> bool:
        return self.parent[i] < 0

    def subtree(self, i: int) -> list[int]:
        out, queue = [], deque([i])
        while queue:
            u = queue.popleft()
            out.append(u)
            queue.extend(self.children[u])
        return out

    def _is_ancestor(self, a: int, b: int) -> bool:
        """True when ``a`` lies on the parent chain of ``b`` (or equals it)."""
        u = b
        while u >= 0:
            if u == a:
                return True
            u = self.parent[u]
        return False

    # ------------------------------------------------------------------ roots

    def add_root_nodes(self, orbits: Iterable[RenewalOrbit]) -> list[int]:
        """Place roots on orbits not yet rooted; returns the new root ids."""
        new_ids = []
        fresh = [o for o in orbits if o.landmark_id not in self.orbits]
        if not fresh:
            return new_ids
        for orb in fresh:
            self.orbits[orb.landmark_id] = orb
        # existing edges may now pass through the new annuli earlier than previously bounded
        if self.n:
            for i in range(self.n):
                if self.parent[i] >= 0:
                    e = self._edge_entry(self.poses[i], self.edge_path[i], fresh)
                    if e < self.edge_entry[i]:
                        self.edge_entry[i] = e
            for r in [i for i in range(self.n) if self.parent[i] < 0]:
                for c in self.children[r]:
                    self._refresh_subtree(c)
        for orb in sorted(fresh, key=lambda o: o.landmark_id):
            ids = [self._append(pose, -1, orb.landmark_id, None, 0.0) for pose in orb.root_poses(self.params.n_root)]
            self.roots[orb.landmark_id] = ids
            new_ids.extend(ids)
        self._pending_roots.extend(new_ids)
        self.revision += 1
        return new_ids

    # ------------------------------------------------------------------ costs

    def _edge_costs(self, lengths: np.ndarray) -> np.ndarray | None:
        rate = self.model.constant_rate
        if rate is None:
            return None
        return rate * lengths / self.vehicle.speed

    def _edge_cost(self, path: DubinsPath, q0) -> float:
        return path_budget(path, q0, self.model, self.vehicle)

    def _edge_safe(self, q0, path: DubinsPath, known: KnownWorld) -> bool:
        pts = path.sample(q0, self.params.edge_resolution)
        return bool(np.all(known.safe_mask(pts)))

    def _edges_safe(self, q0: np.ndarray, q1: np.ndarray, known: KnownWorld) -> np.ndarray:
        """Safety of the shortest paths ``q0[i] -> q1[i]`` at edge resolution, checked in one batch.

        Pairs whose two best words are near-tied go through the scalar solver so
        the checked geometry is exactly the path that would be stored.
        """
        q0 = np.atleast_2d(q0)
        q1 = np.broadcast_to(q1, q0.shape)
        out = np.ones(len(q0), dtype=bool)
        if len(q0) == 0:
            return out
        rho = self.vehicle.min_turn_radius
        words, segs, tie = dubins_segments(q0, q1, rho)
        ok = ~tie
        if np.any(ok):
            idx = np.flatnonzero(ok)
            pid, _, pts = sample_dubins_batch(q0[idx], words[idx], segs[idx], rho, self.params.edge_resolution)
            # the exact endpoints close each edge
            pid = np.concatenate([pid, np.arange(len(idx))])
            pts = np.concatenate([pts, q1[idx]])
            bad = ~known.safe_mask(pts)
            out[idx[np.unique(pid[bad])]] = False
        for i in np.flatnonzero(tie):
            out[i] = self._edge_safe(q0[i], dubins_shortest_path(q0[i], q1[i], rho), known)
        return out

    def _reparent(self, u: int, p: int, path: DubinsPath, cost: float):
        old = self.parent[u]
        self.children[old].remove(u)
        self.parent[u] = p
        self.children[p].append(u)
        self.edge_path[u] = path
        self.edge_cost[u] = cost
        self.edge_len[u] = path.total_length
        self.edge_entry[u] = self._edge_entry(self.poses[u], path, self.orbits.values())
        self._refresh_subtree(u)

    def _try_rewire(self, u: int, p: int, known: KnownWorld, safe: bool | None = None) -> bool:
        """Re-parent ``u`` onto ``p`` when that strictly lowers its cost and the edge is safe."""
        if self.parent[u] < 0 or self.parent[u] == p or self._is_ancestor(u, p):
            return False
        path = dubins_shortest_path(self.poses[u], self.poses[p], self.vehicle.min_turn_radius)
        c = self._edge_cost(path, self.poses[u])
        if safe is None:
            safe = self.cost[p] + c < self.cost[u] - 1e-12 and self._edge_safe(self.poses[u], path, known)
        if self.cost[p] + c < self.cost[u] - 1e-12 and safe:
            self._reparent(u, p, path, c)
            return True
        return False

    # ------------------------------------------------------------------ growth

    def near_radius(self) -> float:
        n = max(self.n, 2)
        return max(self.params.radius_floor, self.params.gamma * math.sqrt(math.log(n) / n))

    def nearest(self, pose) -> int:
        """Node with the shortest Dubins path from ``pose`` to it (ties to lower id)."""
        pos = self.positions
        d = np.hypot(pos[:, 0] - pose[0], pos[:, 1] - pose[1])
        rho = self.vehicle.min_turn_radius
        k = min(self.n, 16)
        probe = np.argpartition(d, k - 1)[:k] if k < self.n else np.arange(self.n)
        bound = dubins_lengths(pose, self.poses[probe], rho).min()
        # Dubins length is at least the Euclidean distance: scan candidates nearest-first in chunks
        cand = np.flatnonzero(d <= bound + 1e-9)
        cand = cand[np.argsort(d[cand], kind="stable")]
        best_len, best_id = np.inf, -1
        chunk = 64
        for i in range(0, len(cand), chunk):
            if d[cand[i]] > best_len + 1e-9:
                break
            ids = cand[i : i + chunk]
            lengths = dubins_lengths(pose, self.poses[ids], rho)
            m = lengths.min()
            j = int(ids[lengths == m].min())
            if m < best_len or (m == best_len and j < best_id):
                best_len, best_id = m, j
        return best_id

    def _sampling_box(self, known: KnownWorld):
        pad = known.fov.radius
        lo_hi = known.features_bbox(pad)
        boxes = []
        if lo_hi is not None:
            boxes.append(lo_hi)
        for orb in self.orbits.values():
            r = orb.radius + ORBIT_RADIUS_TOL
            boxes.append((orb.center - r, orb.center + r))
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        if self.domain is not None:
            lo = np.maximum(lo, [self.domain.north_min, self.domain.east_min])
            hi = np.minimum(hi, [self.domain.north_max, self.domain.east_max])
        return lo, hi

    def _insert(self, pose, known: KnownWorld) -> int | None:
        rho = self.vehicle.min_turn_radius
        pos = self.positions
        r = self.near_radius()
        d = np.hypot(pos[:, 0] - pose[0], pos[:, 1] - pose[1])
        near = np.flatnonzero(d <= r)
        nn = self.nearest(pose)
        cand = np.union1d(near, [nn])
        lengths = dubins_lengths(pose, self.poses[cand], rho)
        costs = self._edge_costs(lengths)
        if costs is None:
            costs = np.array([self._edge_cost(dubins_shortest_path(pose, self.poses[c], rho), pose) for c in cand])
        total = self.cost[cand] + costs
        order = np.lexsort((cand, self.root_orbit[cand], np.round(total / _TIE)))
        safe = np.zeros(len(order), dtype=bool)
        for pos_j, j in enumerate(order):
            if pos_j % _SAFETY_CHUNK == 0:  # check parents in cost order, a few edges per batch
                chunk = cand[order[pos_j:pos_j + _SAFETY_CHUNK]]
                safe[pos_j:pos_j + len(chunk)] = self._edges_safe(np.broadcast_to(pose, (len(chunk), 3)),
                                                                  self.poses[chunk], known)
            if not safe[pos_j]:
                continue
            p = int(cand[j])
            path = dubins_shortest_path(pose, self.poses[p], rho)
            new = self._append(pose, p, -1, path, self._edge_cost(path, pose))
            self._rewire_around(new, near, known)
            return new
        return None

    def _rewire_around(self, new: int, near: np.ndarray, known: KnownWorld):
        near = near[(near != self.parent[new]) & (self.parent[near] >= 0)]
        if len(near) == 0:
            return
        rho = self.vehicle.min_turn_radius
        lengths = dubins_lengths(self.poses[near], self.poses[new], rho)
        costs = self._edge_costs(lengths)
        if costs is None:
            for u in near:
                self._try_rewire(int(u), new, known)
            return
        promising = self.cost[new] + costs < self.cost[near] + 1e-9
        near = near[promising]
        # edge safety depends only on the poses, so it is checked for all candidates at once
        safe = self._edges_safe(self.poses[near], self.poses[new], known)
        for u, ok in zip(near, safe):
            self._try_rewire(int(u), new, known, safe=bool(ok))

    def _rewire_pending_roots(self, known: KnownWorld):
        pending, self._pending_roots = self._pending_roots, []
        R = self.params.near_ball_radius
        for r in pending:
            pos = self.positions
            d = np.hypot(pos[:, 0] - self.poses[r, 0], pos[:, 1] - self.poses[r, 1])
            for u in np.flatnonzero(d <= R):
                self._try_rewire(int(u), r, known)

    def grow(self, known: KnownWorld, rng: np.random.Generator, n_update: int | None = None) -> int:
        """Add up to ``n_update`` nodes by RRT* sampling in the known safe set; returns the count added."""
        if self.n == 0:
            raise RuntimeError("forest has no roots; call add_root_nodes first")
        self._rewire_pending_roots(known)
        n_update = self.params.n_update if n_update is None else n_update
        lo, hi = self._sampling_box(known)
        if np.any(hi <= lo):
            return 0
        added = rejected = draws = 0
        max_reject = self.params.retry_factor * n_update
        max_draws = 4 * max_reject
        rho = self.vehicle.min_turn_radius
        while added < n_update and rejected < max_reject and draws < max_draws and self.n < self.params.max_nodes:
            # samples are drawn from the known safe set (rejection sampling over the box)
            sample = np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(0, 2 * math.pi)])
            draws += 1
            if not known.safe_mask(sample[None, :])[0]:
                continue
            nn = self.nearest(sample)
            path = dubins_shortest_path(sample, self.poses[nn], rho)
            if path.total_length > self.params.max_steer_length:
                sample = path.pose_at(sample, path.total_length - self.params.max_steer_length)
            if (self.domain is not None and not self.domain.contains(sample[0], sample[1])) or not known.safe_mask(
                sample[None, :]
            )[0]:
                rejected += 1
                continue
            if self._insert(sample, known) is None:
                rejected += 1
                continue
            added += 1
        if added:
            self.revision += 1
        return added

    def add_node(self, pose, parent: int) -> int:
        """Attach a node by hand (no safety checks); used to build small instances."""
        pose = np.asarray(pose, float)
        path = dubins_shortest_path(pose, self.poses[parent], self.vehicle.min_turn_radius)
        return self._append(pose, parent, -1, path, self._edge_cost(path, pose))

    # ------------------------------------------------------------------ queries

    def waypoints(self, v: int) -> list[State]:
        """Poses from ``v`` up its parent chain to the root."""
        if not (0 <= v < self.n):
            raise KeyError(f"unknown node {v}")
        out = []
        u = v
        while u >= 0:
            out.append(State.from_array(self.poses[u]))
            u = self.parent[u]
        return out

    def chain(self, v: int) -> list[tuple[np.ndarray, DubinsPath]]:
        out = []
        u = v
        while self.parent[u] >= 0:
            out.append((self.poses[u].copy(), self.edge_path[u]))
            u = self.parent[u]
        return out

    def root_of(self, v: int) -> int:
        u = v
        while self.parent[u] >= 0:
            u = self.parent[u]
        return int(u)

    def to_records(self) -> list[dict]:
        return [
            {
                "id": i,
                "north": float(self.poses[i, 0]),
                "east": float(self.poses[i, 1]),
                "heading": float(self.poses[i, 2]),
                "parent": None if self.parent[i] < 0 else int(self.parent[i]),
                "root_orbit": int(self.root_orbit[i]),
                "cost": float(self.cost[i]),
                "depth": int(self.depth[i]),
            }
            for i in range(self.n)
        ]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec) + "\n")


def init_forest(orbits: Iterable[RenewalOrbit], params: GrowthParams, vehicle: VehicleParams, model: BudgetModel,
                domain: Domain | None = None) -> ReRootForest:
    """Forest with ``n_root`` tangent roots on each known orbit and no other nodes."""
    orbits = list(orbits)
    if not orbits:
        raise ValueError("at least one known renewal orbit is needed to anchor backups")
    forest = ReRootForest(params, vehicle, model, domain)
    forest.add_root_nodes(orbits)
    return forest


def check_invariants(forest: ReRootForest, tol: float = 1e-9) -> list[str]:
    """Structural and cost checks; returns a list of violations (empty when healthy)."""
    problems = []
    rho = forest.vehicle.min_turn_radius
    for i in range(forest.n):
        p = forest.parent[i]
        if p < 0:
            if forest.cost[i] != 0 or forest.depth[i] != 0:
                problems.append(f"root {i} has cost/depth")
            orb = forest.orbits.get(int(forest.root_orbit[i]))
            if orb is None or not orb.in_band(forest.poses[i])[0]:
                problems.append(f"root {i} is not on its orbit")
            continue
        steps, u, total = 0, i, 0.0
        chain = []
        while forest.parent[u] >= 0:
            chain.append(u)
            u = forest.parent[u]
            steps += 1
            if steps > forest.n:
                problems.append(f"cycle through {i}")
                break
        else:
            for c in reversed(chain):
                path = dubins_shortest_path(forest.poses[c], forest.poses[forest.parent[c]], rho)
                total += path_budget(path, forest.poses[c], forest.model, forest.vehicle)
            if abs(total - forest.cost[i]) > tol:
                problems.append(f"node {i} cost {forest.cost[i]} != {total}")
            if forest.depth[i] != steps:
                problems.append(f"node {i} depth {forest.depth[i]} != {steps}")
            if forest.root_orbit[i] != forest.root_orbit[u]:
                problems.append(f"node {i} root orbit mismatch")
    return problems


# ---------------------------------------------------------------------- backups


@dataclass(frozen=True, eq=False)
class Backup:
    trajectory: Trajectory
    budget: BudgetTrace
    node: int | None  # None for a pure orbit hold
    b_minus: float
    hold_index: int  # sample index where the terminal orbit hold begins
    orbit_id: int


def _annulus_distance(p, orbits) -> float:
    best = np.inf
    for orb in orbits:
        best = min(best, max(0.0, abs(math.hypot(p[0] - orb.center_north, p[1] - orb.center_east) - orb.radius)
                            - ORBIT_RADIUS_TOL))
    return best


def _connection_entry_lb(start, targets: np.ndarray, orbits, rho: float) -> np.ndarray:
    """Per target, arc length before which the shortest path from ``start`` stays out of every orbit annulus."""
    floor = _annulus_distance(start, orbits)
    out = np.full(len(targets), np.inf)
    if not orbits or len(targets) == 0:
        return out
    h = _ENTRY_STEP
    words, segs, tie = dubins_segments(start, targets, rho)
    pid, s, pts = sample_dubins_batch(start, words, segs, rho, h)
    # the exact endpoints close the gap after the last uniform sample
    pid = np.concatenate([pid, np.arange(len(targets))])
    s = np.concatenate([s, segs.sum(axis=1)])
    pts = np.concatenate([pts, targets])
    gap = np.full(len(pts), np.inf)
    for orb in orbits:
        gap = np.minimum(gap, np.abs(np.hypot(pts[:, 0] - orb.center_north, pts[:, 1] - orb.center_east) - orb.radius))
    hit = gap <= ORBIT_RADIUS_TOL + h / 2
    np.minimum.at(out, pid[hit], np.maximum(0.0, s[hit] - h / 2))
    out = np.maximum(out, floor)
    # near-tied words may be realized differently by the scalar solver: keep only the path-free bound
    out[tie] = floor
    return out


def _exactly_on(p, orb: RenewalOrbit) -> bool:
    dist = math.hypot(p[0] - orb.center_north, p[1] - orb.center_east)
    tangent = math.atan2(p[1] - orb.center_east, p[0] - orb.center_north) - math.pi / 2
    dpsi = abs((p[2] - tangent + math.pi) % (2 * math.pi) - math.pi)
    return abs(dist - orb.radius) <= 1e-6 and dpsi <= 1e-6


def hold_backup(start, t0: float, b_start: float, orb: RenewalOrbit, known: KnownWorld, model: BudgetModel,
                vehicle: VehicleParams) -> Backup:
    traj = realize_chain(start, [], vehicle, t0, hold=orb.terminal(vehicle.speed))
    trace = integrate_budget(traj, b_start, model, known.orbits)
    return Backup(traj, trace, None, pre_jump_value(trace), 0, orb.landmark_id)


def realize_backup(forest: ReRootForest, start, v: int, t0: float) -> tuple[Trajectory, int]:
    """Fly from ``start`` to node ``v`` then down its waypoint chain, ending in an orbit hold."""
    vehicle = forest.vehicle
    start = np.asarray(start, float)
    conn = dubins_shortest_path(start, forest.poses[v], vehicle.min_turn_radius)
    pieces = [(start, conn)] + forest.chain(v)
    orb = forest.orbits[int(forest.root_orbit[v])]
    traj = realize_chain(start, pieces, vehicle, t0, hold=orb.terminal(vehicle.speed))
    total = conn.total_length + forest.chain_len[v]
    return traj, hold_start_index(total, vehicle.step_length)


def evaluate_candidate(forest: ReRootForest, start, v: int, t0: float, b_start: float,
                       known: KnownWorld) -> Backup | None:
    """Realize the backup through ``v``; None if it is unsafe, too long, or never renews."""
    traj, hold = realize_backup(forest, start, v, t0)
    if traj.times[min(hold, len(traj) - 1)] - t0 > forest.params.backup_time_cap:
        return None
    if not np.all(known.safe_mask(traj.states[: hold + 1])):
        return None
    trace = integrate_budget(traj, b_start, forest.model, known.orbits)
    if len(trace.reset_indices) == 0:
        return None
    return Backup(traj, trace, v, pre_jump_value(trace), hold, int(forest.root_orbit[v]))


def backup_from_reroot(forest: ReRootForest, start, t0: float, b_start: float, known: KnownWorld) -> Backup | None:
    """Best backup from ``start``: minimal pre-jump budget among safe candidates in the R-ball.

    Ties are broken by earlier orbit-hold start, then lower node id.  Candidates
    are visited in order of a lower bound on their pre-jump budget so most are
    never realized; the bound is exact for constant-rate budgets and trivial
    (``b_start``) otherwise.
    """
    start = np.asarray(start.as_array() if isinstance(start, State) else start, float)
    vehicle = forest.vehicle
    for orb in known.orbits:
        if _exactly_on(start, orb):
            return hold_backup(start, t0, b_start, orb, known, forest.model, vehicle)
    if forest.n == 0:
        return None
    pos = forest.positions
    d = np.hypot(pos[:, 0] - start[0], pos[:, 1] - start[1])
    cand = np.flatnonzero(d <= forest.params.near_ball_radius)
    if len(cand) == 0:
        return None
    conn = dubins_lengths(start, forest.poses[cand], vehicle.min_turn_radius)
    total = conn + forest.chain_len[cand]
    keep = total / vehicle.speed <= forest.params.backup_time_cap + vehicle.dt
    cand, conn, total = cand[keep], conn[keep], total[keep]
    hold_idx = np.atleast_1d(hold_start_index(total, vehicle.step_length))
    rate = forest.model.constant_rate
    if rate is not None:
        conn_entry = _connection_entry_lb(start, forest.poses[cand], known.orbits, vehicle.min_turn_radius)
        entry = np.minimum(conn_entry, conn + forest.entry_lb[cand])
        lb = b_start + rate / vehicle.speed * np.maximum(0.0, entry - vehicle.step_length) - 1e-9
    else:
        lb = np.full(len(cand), b_start)
    order = np.lexsort((cand, hold_idx, lb))
    best: Backup | None = None
    best_key = None
    for j in order:
        if best_key is not None and (lb[j], hold_idx[j], cand[j]) > best_key:
            break
        b = evaluate_candidate(forest, start, int(cand[j]), t0, b_start, known)
        if b is None:
            continue
        key = (b.b_minus, b.hold_index, b.node)
        if best_key is None or key < best_key:
            best, best_key = b, key
    return best
