"""Dubins vehicle model: state/control types, RK4 propagation and shortest paths.

Frame convention: ``north`` and ``east`` play the role of the usual planar
``x`` and ``y``; ``heading`` is measured from north towards east and
``d(heading)/dt = turn_rate``.  A positive turn rate is an ``L`` segment in the
six-word classification, a negative one an ``R`` segment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _dubins_kernel as _dk

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_SIGN = {"L": 1.0, "S": 0.0, "R": -1.0}
# arcs closer than this to a full turn are snapped to zero (same endpoint)
_FULL_TURN_SNAP = 1e-9


def wrap_angle(a: float) -> float:
    """Map an angle to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


def angle_diff(a: float, b: float) -> float:
    """Shortest signed difference ``a - b`` in [-pi, pi)."""
    return (a - b + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class State:
    north: float
    east: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.north) and math.isfinite(self.east) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite state {self!r}")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    def as_array(self) -> np.ndarray:
        return np.array([self.north, self.east, self.heading])

    @classmethod
    def from_array(cls, a) -> "State":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class Control:
    turn_rate: float

    def check(self, params: "VehicleParams") -> bool:
        return abs(self.turn_rate) <= params.max_turn_rate + 1e-12


@dataclass(frozen=True)
class VehicleParams:
    speed: float = 10.0
    min_turn_radius: float = 10.0
    dt: float = 0.02

    def __post_init__(self):
        if self.speed <= 0 or self.min_turn_radius <= 0 or self.dt <= 0:
            raise ValueError("speed, min_turn_radius and dt must all be positive")

    @property
    def max_turn_rate(self) -> float:
        return self.speed / self.min_turn_radius

    @property
    def step_length(self) -> float:
        return self.speed * self.dt


@dataclass(frozen=True)
class TerminalOrbit:
    """Open-ended constant-rate circle that a trajectory continues on after its last sample."""

    center_north: float
    center_east: float
    radius: float
    turn_rate: float  # negative for the counter-clockwise renewal orbits


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped samples of a Dubins trajectory.

    ``controls[i]`` is the turn rate applied on ``[times[i], times[i+1])``.
    Spacing is ``dt`` everywhere except possibly the final interval, which
    may be shorter when a geometric path is realized exactly to its endpoint.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    dt: float
    terminal: TerminalOrbit | None = None

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if len(self.times) != len(self.states) or len(self.times) != len(self.controls):
            raise ValueError("times/states/controls length mismatch")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def start_time(self) -> float:
        return float(self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def state(self, i: int) -> State:
        return State.from_array(self.states[i])

    @property
    def first(self) -> State:
        return self.state(0)

    @property
    def last(self) -> State:
        return self.state(-1)

    def index_at(self, t: float) -> int:
        return int(round((t - self.start_time) / self.dt))

    def states_at_steps(self, steps: np.ndarray) -> np.ndarray:
        """States at sample offsets ``steps`` (ints, may run past the end).

        Offsets past the last sample continue on the terminal orbit; without
        one that is an error.
        """
        steps = np.asarray(steps, dtype=np.int64)
        n = len(self)
        out = np.empty((len(steps), 3))
        inside = steps < n
        out[inside] = self.states[steps[inside]]
        if np.any(~inside):
            tau = (steps[~inside] - (n - 1)) * self.dt + 0.0
            # the last interval may be short; continuation is measured from the last sample
            tau = tau - (self.end_time - (self.start_time + (n - 1) * self.dt))
            if self.terminal is None:
                raise ValueError("sample beyond the end of a trajectory without a terminal orbit")
            orb = self.terminal
            out[~inside] = advance(self.states[-1], orb.turn_rate, tau, abs(orb.turn_rate) * orb.radius)
        return out

    def window(self, i0: int, count: int) -> "Trajectory":
        """``count + 1`` uniform samples starting at step ``i0``, continuing on the terminal orbit."""
        steps = np.arange(i0, i0 + count + 1)
        states = self.states_at_steps(steps)
        n = len(self)
        controls = np.empty(len(steps))
        inside = steps < n
        controls[inside] = self.controls[steps[inside]]
        if np.any(~inside):
            controls[~inside] = self.terminal.turn_rate
        times = self.start_time + steps * self.dt
        times[inside] = self.times[steps[inside]]
        return Trajectory(times, states, controls, self.dt, self.terminal)

    def state_at(self, t: float) -> State:
        return State.from_array(self.states_at_steps(np.array([self.index_at(t)]))[0])

    def slice(self, i0: int, i1: int | None = None) -> "Trajectory":
        """Samples ``i0..i1`` inclusive; the terminal orbit is kept only for a tail slice."""
        n = len(self)
        i1 = n - 1 if i1 is None else i1
        if not (0 <= i0 <= i1 < n):
            raise IndexError(f"bad slice {i0}..{i1} of {n}")
        return Trajectory(
            self.times[i0 : i1 + 1].copy(),
            self.states[i0 : i1 + 1].copy(),
            self.controls[i0 : i1 + 1].copy(),
            self.dt,
            self.terminal if i1 == n - 1 else None,
        )

    def append(self, other: "Trajectory") -> "Trajectory":
        """Concatenate ``other`` whose first sample coincides with our last one."""
        if abs(other.start_time - self.end_time) > 1e-9:
            raise ValueError("trajectories are not contiguous in time")
        if np.max(np.abs(other.states[0, :2] - self.states[-1, :2])) > 1e-6:
            raise ValueError("trajectories are not contiguous in space")
        controls = self.controls.copy()
        controls[-1] = other.controls[0]
        return Trajectory(
            np.concatenate([self.times, other.times[1:]]),
            np.concatenate([self.states, other.states[1:]]),
            np.concatenate([controls, other.controls[1:]]),
            self.dt,
            other.terminal,
        )


# ---------------------------------------------------------------------------
# closed-form motion primitives


def advance(q0, turn_rate, duration, speed):
    """Exact pose after flying ``duration`` with constant ``turn_rate``.

    ``duration`` may be an array; ``q0`` a single pose.
    """
    n0, e0, h0 = float(q0[0]), float(q0[1]), float(q0[2])
    tau = np.asarray(duration, dtype=float)
    s = speed * tau
    if turn_rate == 0.0:
        out = np.stack([n0 + s * math.cos(h0), e0 + s * math.sin(h0), np.full_like(s, h0)], axis=-1)
    else:
        r = speed / turn_rate  # signed radius
        h = h0 + turn_rate * tau
        out = np.stack([n0 + r * (np.sin(h) - math.sin(h0)), e0 - r * (np.cos(h) - math.cos(h0)), h], axis=-1)
    out[..., 2] = np.mod(out[..., 2], TWO_PI)
    return out


def primitive_poses(q0, kinds: Sequence[str], lengths: Sequence[float], rho: float) -> np.ndarray:
    """Start pose of every primitive in a chain, plus the final pose (len+1 rows)."""
    poses = np.empty((len(kinds) + 1, 3))
    poses[0] = q0
    for i, (k, ell) in enumerate(zip(kinds, lengths)):
        poses[i + 1] = _advance_arc(poses[i], k, ell, rho)
    return poses


def _advance_arc(q, kind: str, ell: float, rho: float) -> np.ndarray:
    n0, e0, h0 = q
    if kind == "S":
        return np.array([n0 + ell * math.cos(h0), e0 + ell * math.sin(h0), h0])
    sgn = _SIGN[kind]
    h = h0 + sgn * ell / rho
    return np.array(
        [
            n0 + sgn * rho * (math.sin(h) - math.sin(h0)),
            e0 - sgn * rho * (math.cos(h) - math.cos(h0)),
            wrap_angle(h),
        ]
    )


def sample_primitives(starts: np.ndarray, kinds: np.ndarray, lengths: np.ndarray, rho: float, s: np.ndarray):
    """Vectorized poses and turn signs at arc lengths ``s`` along a primitive chain.

    ``starts`` are the per-primitive start poses, ``kinds`` the signs (+1 L,
    0 S, -1 R).  Arc lengths beyond the chain's end extrapolate the last
    primitive, which is how open-ended orbit holds are sampled.
    """
    cum = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    idx = np.searchsorted(cum, s, side="right") - 1
    idx = np.clip(idx, 0, len(cum) - 1)
    local = s - cum[idx]
    q = starts[idx]
    sg = kinds[idx]
    h0 = q[:, 2]
    out = np.empty((len(s), 3))
    straight = sg == 0.0
    out[straight, 0] = q[straight, 0] + local[straight] * np.cos(h0[straight])
    out[straight, 1] = q[straight, 1] + local[straight] * np.sin(h0[straight])
    out[straight, 2] = h0[straight]
    arc = ~straight
    if np.any(arc):
        sa = sg[arc]
        ha = h0[arc] + sa * local[arc] / rho
        out[arc, 0] = q[arc, 0] + sa * rho * (np.sin(ha) - np.sin(h0[arc]))
        out[arc, 1] = q[arc, 1] - sa * rho * (np.cos(ha) - np.cos(h0[arc]))
        out[arc, 2] = ha
    out[:, 2] = np.mod(out[:, 2], TWO_PI)
    return out, sg


# ---------------------------------------------------------------------------
# propagation


def propagate(
    x0: State,
    controller: Callable[[float, State], float],
    duration: float,
    params: VehicleParams,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate the closed loop with fixed-step RK4 at ``params.dt``.

    ``controller(t, x)`` returns a turn rate; values beyond ``V/rho`` are
    saturated (warned once per call).
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    dt, V, umax = params.dt, params.speed, params.max_turn_rate
    n = int(round(duration / dt))
    warned = False

    def control(t, x):
        nonlocal warned
        u = float(controller(t, State(x[0], x[1], x[2])))
        if abs(u) > umax + 1e-12:
            if not warned:
                log.warning("turn rate %.4f saturated to +/-%.4f", u, umax)
                warned = True
            u = math.copysign(umax, u)
        return u

    def f(t, x):
        u = control(t, x)
        return np.array([V * math.cos(x[2]), V * math.sin(x[2]), u]), u

    states = np.empty((n + 1, 3))
    controls = np.zeros(n + 1)
    x = x0.as_array()
    states[0] = x
    for i in range(n):
        t = t0 + i * dt
        k1, u = f(t, x)
        k2, _ = f(t + dt / 2, x + dt / 2 * k1)
        k3, _ = f(t + dt / 2, x + dt / 2 * k2)
        k4, _ = f(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x[2] = x[2] % TWO_PI
        controls[i] = u
        states[i + 1] = x
    if n > 0:
        controls[n] = control(t0 + n * dt, states[n])
    else:
        controls[0] = control(t0, states[0])
    times = t0 + np.arange(n + 1) * dt
    return Trajectory(times, states, controls, dt)


# ---------------------------------------------------------------------------
# shortest paths


@dataclass(frozen=True)
class DubinsPath:
    word: str
    segment_params: tuple[float, float, float]  # meters
    rho: float
    total_length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_length", float(sum(self.segment_params)))

    def primitives(self) -> tuple[list[str], list[float]]:
        """Segments with degenerate (near-zero) pieces removed."""
        kinds, lengths = [], []
        for k, ell in zip(self.word, self.segment_params):
            if ell > 1e-9:
                kinds.append(k)
                lengths.append(ell)
        return kinds, lengths

    def end_pose(self, q0) -> np.ndarray:
        kinds, lengths = self.primitives()
        return primitive_poses(np.asarray(q0, float), kinds, lengths, self.rho)[-1]

    def pose_at(self, q0, s: float) -> np.ndarray:
        kinds, lengths = self.primitives()
        if not kinds:
            return np.asarray(q0, float).copy()
        starts = primitive_poses(np.asarray(q0, float), kinds, lengths, self.rho)[:-1]
        sg = np.array([_SIGN[k] for k in kinds])
        out, _ = sample_primitives(starts, sg, np.array(lengths), self.rho, np.array([min(s, self.total_length)]))
        return out[0]

    def sample(self, q0, step: float) -> np.ndarray:
        """Poses every ``step`` meters plus the exact endpoint."""
        kinds, lengths = self.primitives()
        q0 = np.asarray(q0, float)
        if not kinds:
            return q0[None, :].copy()
        n = int(math.floor(self.total_length / step + 1e-9))
        s = np.arange(n + 1) * step
        if self.total_length - s[-1] > 1e-9:
            s = np.append(s, self.total_length)
        starts = primitive_poses(q0, kinds, lengths, self.rho)[:-1]
        sg = np.array([_SIGN[k] for k in kinds])
        out, _ = sample_primitives(starts, sg, np.array(lengths), self.rho, s)
        return out


def _mod2pi(x: float) -> float:
    x = x % TWO_PI
    return 0.0 if x > TWO_PI - _FULL_TURN_SNAP else x


def _words_normalized(alpha: float, beta: float, d: float):
    """(t, p, q) per word in units of rho, or None when the word is infeasible."""
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    cab = math.cos(alpha - beta)
    out = {}

    p_sq = (d + sa - sb) ** 2 + (cb - ca) ** 2  # same as 2 + d^2 - 2cos(a-b) + 2d(sa-sb), no cancellation
    if p_sq >= -1e-12:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out["LSL"] = (_mod2pi(tmp - alpha), math.sqrt(max(p_sq, 0.0)), _mod2pi(beta - tmp))

    p_sq = (d - sa + sb) ** 2 + (ca - cb) ** 2
    if p_sq >= -1e-12:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out["RSR"] = (_mod2pi(alpha - tmp), math.sqrt(max(p_sq, 0.0)), _mod2pi(tmp - beta))

    p_sq = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
    if p_sq >= -1e-12:
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out["LSR"] = (_mod2pi(tmp - alpha), p, _mod2pi(tmp - beta))

    p_sq = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
    if p_sq >= -1e-12:
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out["RSL"] = (_mod2pi(alpha - tmp), p, _mod2pi(beta - tmp))

    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1.0 + 1e-12:
        phi = math.atan2(ca - cb, d - sa + sb)
        p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))  # middle arc of a CCC word lies in [pi, 2pi]
        t = _mod2pi(alpha - phi + p / 2.0)
        out["RLR"] = (t, p, _mod2pi(alpha - beta - t + p))

    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0
    if abs(tmp) <= 1.0 + 1e-12:
        phi = math.atan2(ca - cb, d + sa - sb)
        p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))  # middle arc of a CCC word lies in [pi, 2pi]
        t = _mod2pi(-alpha - phi + p / 2.0)
        out["LRL"] = (t, p, _mod2pi(beta - alpha - t + p))
    return out


def _normalize(q0, q1, rho):
    dn = q1[0] - q0[0]
    de = q1[1] - q0[1]
    D = math.hypot(dn, de)
    theta = math.atan2(de, dn) if D > 0 else 0.0
    alpha = wrap_angle(q0[2] - theta)
    beta = wrap_angle(q1[2] - theta)
    return alpha, beta, D / rho


def dubins_candidates(q0, q1, rho: float) -> dict[str, DubinsPath]:
    """Every feasible word between two poses (used by tests and diagnostics)."""
    alpha, beta, d = _normalize(q0, q1, rho)
    return {
        w: DubinsPath(w, (t * rho, p * rho, q * rho), rho)
        for w, (t, p, q) in _words_normalized(alpha, beta, d).items()
    }


def dubins_shortest_path(q0, q1, rho: float) -> DubinsPath:
    """Minimum-length Dubins path; ties go to the earlier word in ``WORDS``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    q0 = _as_pose(q0)
    q1 = _as_pose(q1)
    alpha, beta, d = _normalize(q0, q1, rho)
    words = _words_normalized(alpha, beta, d)
    best_w, best = None, math.inf
    for w in WORDS:
        if w in words:
            ln = sum(words[w])
            if ln < best:
                best_w, best = w, ln
    t, p, q = words[best_w]
    return DubinsPath(best_w, (t * rho, p * rho, q * rho), rho)


def _as_pose(q):
    if isinstance(q, State):
        return (q.north, q.east, q.heading)
    return (float(q[0]), float(q[1]), float(q[2]))


def _paired(q0, q1):
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    a, b = np.broadcast_arrays(q0, q1)
    shape = a.shape[:-1]
    return np.ascontiguousarray(a.reshape(-1, 3)), np.ascontiguousarray(b.reshape(-1, 3)), shape


def dubins_lengths(q0, q1, rho: float) -> np.ndarray:
    """Vectorized shortest-path lengths between broadcastable pose arrays (..., 3)."""
    a, b, shape = _paired(q0, q1)
    out = np.empty(len(a))
    _dk.lengths_batch(a, b, float(rho), out)
    return out.reshape(shape) if shape else out[0]


def dubins_segments(q0, q1, rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized shortest paths: (word index into ``WORDS``, segment lengths (..., 3) in meters, tie flag).

    The tie flag marks pairs whose two best words are within 1e-9 m, where
    the scalar solver may pick a different (equally short) word.
    """
    a, b, shape = _paired(q0, q1)
    n = len(a)
    lengths, words, segs, ties = np.empty(n), np.empty(n, np.int64), np.empty((n, 3)), np.empty(n, np.bool_)
    _dk.shortest_batch(a, b, float(rho), lengths, words, segs, ties)
    return words.reshape(shape), segs.reshape(shape + (3,)), ties.reshape(shape)


_WORD_SIGNS = np.array([[_SIGN[c] for c in w] for w in WORDS])


def sample_dubins_batch(q0, words: np.ndarray, segs: np.ndarray, rho: float, step: float):
    """Sample many shortest paths every ``step`` meters (no exact endpoint).

    Returns ``(path_index, arc_length, poses)`` for all samples, grouped by
    path in order.
    """
    q0 = np.atleast_2d(np.asarray(q0, float))
    segs = np.atleast_2d(segs)
    m = len(segs)
    q0 = np.broadcast_to(q0, (m, 3))
    total = segs.sum(axis=1)
    counts = np.floor(total / step + 1e-9).astype(np.int64) + 1
    pid = np.repeat(np.arange(m), counts)
    first = np.concatenate([[0], np.cumsum(counts)[:-1]])
    s = (np.arange(len(pid)) - first[pid]) * step
    signs = _WORD_SIGNS[words]  # (m, 3)
    # start pose of every primitive
    starts = np.empty((m, 3, 3))
    q = q0.copy()
    for j in range(3):
        starts[:, j] = q
        q = _advance_batch(q, signs[:, j], segs[:, j], rho)
    cum = np.concatenate([np.zeros((m, 1)), np.cumsum(segs, axis=1)[:, :2]], axis=1)
    k = (s[:, None] >= cum[pid]).sum(axis=1) - 1
    k = np.clip(k, 0, 2)
    local = s - cum[pid, k]
    poses = _advance_batch(starts[pid, k], signs[pid, k], local, rho)
    return pid, s, poses


def _advance_batch(q, sg, ell, rho):
    out = np.empty_like(q)
    h0 = q[:, 2]
    straight = sg == 0.0
    out[:, 0] = np.where(straight, q[:, 0] + ell * np.cos(h0), 0.0)
    out[:, 1] = np.where(straight, q[:, 1] + ell * np.sin(h0), 0.0)
    out[:, 2] = h0
    arc = ~straight
    if np.any(arc):
        sa = sg[arc]
        ha = h0[arc] + sa * ell[arc] / rho
        out[arc, 0] = q[arc, 0] + sa * rho * (np.sin(ha) - np.sin(h0[arc]))
        out[arc, 1] = q[arc, 1] - sa * rho * (np.cos(ha) - np.cos(h0[arc]))
        out[arc, 2] = ha
    out[:, 2] = np.mod(out[:, 2], TWO_PI)
    return out


# ---------------------------------------------------------------------------
# realization


def hold_start_index(total, step):
    """Index of the first uniform sample at or beyond arc length ``total`` (array-friendly)."""
    n = np.floor(np.asarray(total) / step + 1e-9)
    n = np.where(np.asarray(total) - n * step > 1e-9, n + 1, n).astype(np.int64)
    return int(n) if n.ndim == 0 else n


def realize_chain(
    q0,
    paths: Sequence[tuple[np.ndarray, DubinsPath]],
    params: VehicleParams,
    t0: float,
    hold: TerminalOrbit | None = None,
    exact_end: bool = True,
) -> Trajectory:
    """Sample a chain of Dubins paths (each with its own start pose) every ``dt``.

    With ``hold`` the chain continues on the terminal orbit and the samples
    run just past the chain's end, so spacing stays uniform; otherwise the
    final sample is placed exactly at the chain's end when ``exact_end``.
    """
    starts, kinds, lengths = [], [], []
    for start, path in paths:
        ks, ls = path.primitives()
        if not ks:
            continue
        ps = primitive_poses(np.asarray(start, float), ks, ls, path.rho)
        starts.extend(ps[:-1])
        kinds.extend(_SIGN[k] for k in ks)
        lengths.extend(ls)
    rho = params.min_turn_radius
    total = float(sum(lengths))
    end_pose = _chain_end(q0, paths)
    if hold is not None:
        starts.append(end_pose)
        kinds.append(math.copysign(1.0, hold.turn_rate))
        lengths.append(math.inf)
    step = params.step_length
    n = int(math.floor(total / step + 1e-9))
    s = np.arange(n + 1) * step
    if hold is not None:
        s = np.arange(hold_start_index(total, step) + 1) * step
    elif exact_end and total - s[-1] > 1e-9:
        s = np.append(s, total)
    if not starts:
        states = np.asarray(q0, float)[None, :].copy()
        controls = np.zeros(1)
        times = np.array([t0])
        return Trajectory(times, states, controls, params.dt, hold)
    starts = np.asarray(starts)
    kinds = np.asarray(kinds)
    lengths_arr = np.asarray(lengths)
    states, sg = sample_primitives(starts, kinds, lengths_arr, rho, s)
    controls = sg * params.max_turn_rate
    times = t0 + s / params.speed
    if hold is None and len(s) > 1:
        controls[-1] = controls[-2]
    return Trajectory(times, states, controls, params.dt, hold)


def _chain_end(q0, paths):
    if not paths:
        return np.asarray(q0, float)
    start, path = paths[-1]
    return path.end_pose(start)


def path_to_trajectory(path: DubinsPath, q0, t0: float, params: VehicleParams) -> Trajectory:
    """Fly ``path`` from ``q0`` at speed V, sampling every dt (exact final sample)."""
    return realize_chain(_as_pose(q0), [(np.asarray(_as_pose(q0)), path)], params, t0)
