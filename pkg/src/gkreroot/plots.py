"""SVG figures for a finished run: top-down map, budget history and features-in-view history."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .reroot import ReRootForest  # noqa: E402
from .sim import RunResult, RunTrace  # noqa: E402


def _orbit_intervals(trace: RunTrace) -> list[tuple[float, float]]:
    on = trace.phase == "orbit"
    out = []
    i, n = 0, len(on)
    while i < n:
        if on[i]:
            j = i
            while j + 1 < n and on[j + 1]:
                j += 1
            out.append((float(trace.times[i]), float(trace.times[min(j + 1, n - 1)])))
            i = j + 1
        else:
            i += 1
    return out


def plot_map(result: RunResult, path, forest: ReRootForest | None = None) -> Path:
    """Features, landmarks with their orbits, forest branches, flown path and the last commitment."""
    world, trace = result.world, result.trace
    forest = result.forest if forest is None else forest
    fig, ax = plt.subplots(figsize=(9, 5.5))
    d = world.domain
    if len(world.features):
        ax.scatter(world.features[:, 1], world.features[:, 0], s=2, c="0.7", label="features", zorder=1)
    if forest is not None and len(forest) > 0:
        segs = []
        for v in range(len(forest)):
            for q in (forest.edge_path[v],) if forest.parent[v] >= 0 else ():
                pts = q.sample(forest.poses[v], 2.0)
                segs.append(pts[:, [1, 0]])
        if segs:
            ax.add_collection(LineCollection(segs, colors="tab:green", linewidths=0.3, alpha=0.5, zorder=2, gid="forest"))
    theta = np.linspace(0, 2 * np.pi, 100)
    for orb, lm in zip(world.orbits, world.landmarks):
        ax.plot(orb.center_east + orb.radius * np.sin(theta), orb.center_north + orb.radius * np.cos(theta),
                color="tab:purple", lw=1, zorder=3)
        ax.plot(lm.east, lm.north, marker="*", ms=10, color="tab:purple", zorder=4)
        ax.annotate(f"{lm.kind} {lm.id}", (lm.east, lm.north), textcoords="offset points", xytext=(5, 5), fontsize=8)
    ax.plot(trace.states[:, 1], trace.states[:, 0], color="k", lw=1.2, label="flown", zorder=5)
    cand = result.commitment.candidate
    traj = cand.trajectory
    sw = cand.switch_index
    if sw > 0:
        ax.plot(traj.states[: sw + 1, 1], traj.states[: sw + 1, 0], color="tab:blue", lw=1.5, label="committed nominal",
                zorder=6)
    ax.plot(traj.states[sw:, 1], traj.states[sw:, 0], color="tab:red", lw=1.5, label="committed backup", zorder=6)
    ax.set_xlim(d.east_min, d.east_max)
    ax.set_ylim(d.north_min, d.north_max)
    ax.set_aspect("equal")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.legend(loc="upper right", fontsize=7)
    return _save(fig, path)


def plot_budget(trace: RunTrace, path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(trace.times, trace.budget, color="tab:blue", lw=1, label="b(t)")
    ax.axhline(trace.cap, color="tab:red", ls="--", lw=1, label=f"B = {trace.cap:g}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("budget")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def plot_features(trace: RunTrace, path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3))
    for a, b in _orbit_intervals(trace):
        ax.axvspan(a, b, color="0.85", lw=0)
    ax.plot(trace.times, trace.features_in_fov, color="tab:green", lw=1, label="features in view")
    ax.axhline(trace.n_f, color="tab:red", ls="--", lw=1, label=f"N_f = {trace.n_f}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("features in FOV")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def emit_plots(result: RunResult, out_dir, forest: ReRootForest | None = None) -> dict[str, Path]:
    """Write map.svg, budget.svg and features.svg into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "map": plot_map(result, out / "map.svg", forest),
        "budget": plot_budget(result.trace, out / "budget.svg"),
        "features": plot_features(result.trace, out / "features.svg"),
    }


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        fig.savefig(path, format="svg", bbox_inches="tight")
    finally:
        plt.close(fig)
    return path
