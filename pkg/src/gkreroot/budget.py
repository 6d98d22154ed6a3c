"""Hybrid budget dynamics: continuous growth at rate L, reset inside renewal sets, cap B."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dubins import DubinsPath, Trajectory, VehicleParams
from .environment import RenewalOrbit, band_index

RateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConstantRate:
    """``L(x, u) = value`` everywhere, e.g. a fixed fraction of speed for odometry drift."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("budget rate must be non-negative")

    def __call__(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        return np.full(len(states), self.value)


def distance_rate(fraction: float, speed: float) -> ConstantRate:
    """Rate for an error that grows as ``fraction`` of distance flown at ``speed``."""
    return ConstantRate(fraction * speed)


@dataclass(frozen=True)
class BudgetModel:
    rate_fn: RateFn
    b_reset: float = 0.0
    cap: float = 9.0

    def __post_init__(self):
        if self.b_reset < 0:
            raise ValueError("b_reset must be non-negative")
        if not self.cap > self.b_reset:
            raise ValueError(f"budget cap B={self.cap} must exceed b_reset={self.b_reset}")

    @property
    def constant_rate(self) -> float | None:
        return self.rate_fn.value if isinstance(self.rate_fn, ConstantRate) else None

    def rates(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        r = np.asarray(self.rate_fn(states, controls), dtype=float)
        if np.any(r < 0):
            raise ValueError("budget rate function returned a negative rate")
        return r


@dataclass(frozen=True, eq=False)
class BudgetTrace:
    times: np.ndarray
    values: np.ndarray
    reset_indices: np.ndarray  # sample index of every band entry
    reset_orbits: tuple  # landmark id per reset
    b0: float

    @property
    def reset_events(self) -> list[tuple[float, int]]:
        return [(float(self.times[i]), oid) for i, oid in zip(self.reset_indices, self.reset_orbits)]

    @property
    def peak(self) -> float:
        return float(self.values.max())

    @property
    def final(self) -> float:
        return float(self.values[-1])


def integrate_samples(times, rates, in_band, b0: float, b_reset: float) -> np.ndarray:
    """Trapezoidal budget over samples; values are held at ``b_reset`` while ``in_band``."""
    times = np.asarray(times, float)
    rates = np.asarray(rates, float)
    in_band = np.asarray(in_band, bool)
    n = len(times)
    inc = np.zeros(n)
    if n > 1:
        inc[1:] = 0.5 * (rates[1:] + rates[:-1]) * np.diff(times)
    c = np.cumsum(inc)
    last = np.maximum.accumulate(np.where(in_band, np.arange(n), -1))
    safe_last = np.maximum(last, 0)
    vals = np.where(last < 0, b0 + c, b_reset + (c - c[safe_last]))
    vals[in_band] = b_reset
    return vals


def integrate_budget(traj: Trajectory, b0: float, model: BudgetModel, orbits: Sequence[RenewalOrbit]) -> BudgetTrace:
    """Budget history along ``traj`` starting from ``b0``."""
    orbits = list(orbits)
    band = band_index(traj.states, orbits) if orbits else np.full(len(traj), -1)
    in_band = band >= 0
    rates = model.rates(traj.states, traj.controls)
    vals = integrate_samples(traj.times, rates, in_band, b0, model.b_reset)
    prev = np.concatenate([[-1], band[:-1]])
    entries = np.flatnonzero(in_band & (band != prev))
    return BudgetTrace(
        traj.times,
        vals,
        entries,
        tuple(orbits[band[i]].landmark_id for i in entries),
        float(b0),
    )


class NoResetError(ValueError):
    """The budget trace never reaches a renewal set."""


def pre_jump_value(trace: BudgetTrace) -> float:
    """Budget just before the first reset (``b0`` when the trace starts in a renewal set)."""
    if len(trace.reset_indices) == 0:
        raise NoResetError("trajectory never reached a renewal set")
    i = int(trace.reset_indices[0])
    return trace.b0 if i == 0 else float(trace.values[i - 1])


def check_budget(trace: BudgetTrace, cap: float, upto: int | None = None) -> bool:
    """True iff every sample (up to index ``upto`` inclusive) is within ``cap``."""
    vals = trace.values if upto is None else trace.values[: upto + 1]
    return bool(np.all(vals <= cap))


def path_budget(path: DubinsPath, q0, model: BudgetModel, vehicle: VehicleParams) -> float:
    """Budget spent flying a geometric path without renewal (used as forest edge cost)."""
    rate = model.constant_rate
    if rate is not None:
        return rate * path.total_length / vehicle.speed
    pts = path.sample(q0, vehicle.step_length)
    s = np.minimum(np.arange(len(pts)) * vehicle.step_length, path.total_length)
    rates = model.rates(pts, np.zeros(len(pts)))
    t = s / vehicle.speed
    return float(np.sum(0.5 * (rates[1:] + rates[:-1]) * np.diff(t))) if len(pts) > 1 else 0.0
