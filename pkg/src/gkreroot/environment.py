"""World model, field-of-view sensing and the robot's growing knowledge of the world.

Safety in this problem means "enough visual features in view" or "sitting on a
renewal orbit".  Renewal orbits are counter-clockwise (on a north-up map)
circles of radius rho about a landmark, flown with turn rate ``-V/rho``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._fov_kernel import band_membership, count_visible
from .dubins import TWO_PI, State, TerminalOrbit

ORBIT_RADIUS_TOL = 0.5  # meters
ORBIT_HEADING_TOL = 0.1  # radians
_GRID_CELL = 15.0


class OrbitOverlapError(RuntimeError):
    """A state matched more than one renewal orbit band."""


@dataclass(frozen=True)
class Feature:
    id: int
    north: float
    east: float


@dataclass(frozen=True)
class Landmark:
    id: int
    north: float
    east: float
    kind: str = "mid"  # start | mid | goal

    def __post_init__(self):
        if self.kind not in ("start", "mid", "goal"):
            raise ValueError(f"unknown landmark kind {self.kind!r}")


@dataclass(frozen=True)
class FovParams:
    radius: float = 60.0
    half_angle: float = math.pi / 4
    sense_rate: float = 5.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("FOV radius must be positive")
        if not (0 < self.half_angle <= math.pi):
            raise ValueError("FOV half angle must be in (0, pi]")
        if self.sense_rate <= 0:
            raise ValueError("sense rate must be positive")


@dataclass(frozen=True)
class RenewalOrbit:
    """Counter-clockwise loiter circle about a landmark."""

    landmark_id: int
    center_north: float
    center_east: float
    radius: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_north, self.center_east])

    def pose_at(self, bearing: float) -> np.ndarray:
        """Pose on the circle at ``bearing`` (from the centre) with tangent heading."""
        return np.array(
            [
                self.center_north + self.radius * math.cos(bearing),
                self.center_east + self.radius * math.sin(bearing),
                (bearing - math.pi / 2) % TWO_PI,
            ]
        )

    def root_poses(self, n: int) -> np.ndarray:
        return np.array([self.pose_at(TWO_PI * j / n) for j in range(n)])

    def terminal(self, speed: float) -> TerminalOrbit:
        return TerminalOrbit(self.center_north, self.center_east, self.radius, -speed / self.radius)

    def in_band(self, states: np.ndarray, radius_tol=ORBIT_RADIUS_TOL, heading_tol=ORBIT_HEADING_TOL) -> np.ndarray:
        states = np.atleast_2d(states)
        dn = states[:, 0] - self.center_north
        de = states[:, 1] - self.center_east
        dist = np.hypot(dn, de)
        tangent = np.arctan2(de, dn) - math.pi / 2
        dpsi = np.abs((states[:, 2] - tangent + math.pi) % TWO_PI - math.pi)
        return (np.abs(dist - self.radius) <= radius_tol) & (dpsi <= heading_tol)


@dataclass(frozen=True)
class Domain:
    north_min: float
    north_max: float
    east_min: float
    east_max: float

    def __post_init__(self):
        if not (self.north_max > self.north_min and self.east_max > self.east_min):
            raise ValueError("empty domain")

    def contains(self, north: float, east: float, margin: float = 0.0) -> bool:
        return (
            self.north_min + margin <= north <= self.north_max - margin
            and self.east_min + margin <= east <= self.east_max - margin
        )

    def contains_points(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (
            (pts[:, 0] >= self.north_min + margin)
            & (pts[:, 0] <= self.north_max - margin)
            & (pts[:, 1] >= self.east_min + margin)
            & (pts[:, 1] <= self.east_max - margin)
        )

    @property
    def area(self) -> float:
        return (self.north_max - self.north_min) * (self.east_max - self.east_min)


class FeatureIndex:
    """Features bucketed into a uniform grid for fast sector counting."""

    def __init__(self, points: np.ndarray, cell: float = _GRID_CELL):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        self.cell = float(cell)
        if len(pts):
            self.origin = pts.min(axis=0) - 1e-6
            span = pts.max(axis=0) - self.origin
        else:
            self.origin = np.zeros(2)
            span = np.zeros(2)
        self.n_rows = int(span[0] // cell) + 1
        self.n_cols = int(span[1] // cell) + 1
        rows = ((pts[:, 0] - self.origin[0]) // cell).astype(np.int64)
        cols = ((pts[:, 1] - self.origin[1]) // cell).astype(np.int64)
        key = rows * self.n_cols + cols
        order = np.argsort(key, kind="stable")
        self.points = np.ascontiguousarray(pts[order])
        counts = np.bincount(key, minlength=self.n_rows * self.n_cols)
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def __len__(self) -> int:
        return len(self.points)

    def count(self, poses: np.ndarray, fov: FovParams, cap: int | None = None) -> np.ndarray:
        """Visible-feature count per pose; with ``cap`` counts saturate at ``cap``."""
        poses = np.ascontiguousarray(np.atleast_2d(poses), dtype=float)
        if len(self.points) == 0:
            return np.zeros(len(poses), dtype=np.int64)
        cap = np.iinfo(np.int64).max if cap is None else int(cap)
        return count_visible(
            poses,
            self.points,
            self.cell_start,
            float(self.origin[0]),
            float(self.origin[1]),
            self.cell,
            self.n_rows,
            self.n_cols,
            float(fov.radius),
            math.cos(fov.half_angle),
            cap,
        )


def _as_points(features) -> np.ndarray:
    if isinstance(features, FeatureIndex):
        return features.points
    if isinstance(features, np.ndarray):
        return features.reshape(-1, 2)
    return np.array([(f.north, f.east) for f in features], dtype=float).reshape(-1, 2)


def visible(x, points: np.ndarray, fov: FovParams) -> np.ndarray:
    """Boolean mask of points inside the sector of pose ``x`` (boundary inclusive)."""
    q = x.as_array() if isinstance(x, State) else np.asarray(x, float)
    d = np.asarray(points, float).reshape(-1, 2) - q[:2]
    d2 = np.einsum("ij,ij->i", d, d)
    dot = d[:, 0] * math.cos(q[2]) + d[:, 1] * math.sin(q[2])
    return (d2 <= fov.radius**2 + 1e-9) & (dot >= np.sqrt(d2) * math.cos(fov.half_angle) - 1e-9)


def features_in_fov(x, features, fov: FovParams) -> int:
    """Number of features within ``fov.radius`` and ``fov.half_angle`` of the heading."""
    return int(np.count_nonzero(visible(x, _as_points(features), fov)))


def band_index(states: np.ndarray, orbits: Sequence[RenewalOrbit]) -> np.ndarray:
    """Index into ``orbits`` of the renewal band each state lies in, or -1."""
    states = np.ascontiguousarray(np.atleast_2d(np.asarray(states, float)))
    if not len(orbits):
        return np.full(len(states), -1, dtype=np.int64)
    circles = np.array([(o.center_north, o.center_east, o.radius) for o in orbits], dtype=float)
    out = band_membership(states, circles, ORBIT_RADIUS_TOL, ORBIT_HEADING_TOL)
    if np.any(out == -2):
        raise OrbitOverlapError("state lies in more than one renewal orbit band")
    return out


def in_renewal(x, orbits: Sequence[RenewalOrbit]) -> int | None:
    """Landmark id of the orbit whose band contains ``x``, else None."""
    q = x.as_array() if isinstance(x, State) else np.asarray(x, float)
    idx = int(band_index(q[None, :], list(orbits))[0])
    return None if idx < 0 else list(orbits)[idx].landmark_id


def is_safe(x, features, orbits: Sequence[RenewalOrbit], fov: FovParams, n_f: int) -> bool:
    """Safe iff at least ``n_f`` features are in view or ``x`` is on a renewal orbit."""
    return in_renewal(x, orbits) is not None or features_in_fov(x, features, fov) >= n_f


def safe_mask(states: np.ndarray, index: FeatureIndex, orbits: Sequence[RenewalOrbit], fov: FovParams, n_f: int) -> np.ndarray:
    """Vectorized :func:`is_safe` using a feature grid index."""
    states = np.atleast_2d(states)
    ok = band_index(states, orbits) >= 0
    rest = ~ok
    if np.any(rest):
        ok[rest] = index.count(states[rest], fov, cap=n_f) >= n_f
    return ok


@dataclass
class WorldModel:
    """Ground truth: every feature and landmark, plus the mission domain."""

    features: np.ndarray  # (n, 2) north/east
    landmarks: list[Landmark]
    domain: Domain
    n_f: int = 8
    orbit_radius: float = 10.0
    feature_ids: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1, 2)
        if self.feature_ids is None:
            self.feature_ids = np.arange(len(self.features))
        if not self.landmarks:
            raise ValueError("the world needs at least one landmark")
        if len(self.features) and not np.all(self.domain.contains_points(self.features)):
            raise ValueError("features must lie inside the domain")
        self.orbits = [RenewalOrbit(lm.id, lm.north, lm.east, self.orbit_radius) for lm in self.landmarks]
        for orb in self.orbits:
            if not self.domain.contains(orb.center_north, orb.center_east, margin=orb.radius):
                raise ValueError(f"orbit {orb.landmark_id} leaves the domain")
        for i, a in enumerate(self.orbits):
            for b in self.orbits[i + 1 :]:
                gap = math.dist(a.center, b.center)
                if gap <= a.radius + b.radius + 2 * ORBIT_RADIUS_TOL:
                    raise ValueError(f"orbits {a.landmark_id} and {b.landmark_id} are not disjoint")
        self.index = FeatureIndex(self.features)
        self._landmark_pts = np.array([[lm.north, lm.east] for lm in self.landmarks])

    def orbit(self, landmark_id: int) -> RenewalOrbit:
        for orb in self.orbits:
            if orb.landmark_id == landmark_id:
                return orb
        raise KeyError(landmark_id)

    def landmark_of_kind(self, kind: str) -> Landmark:
        for lm in self.landmarks:
            if lm.kind == kind:
                return lm
        raise KeyError(kind)

    def feature_list(self) -> list[Feature]:
        return [Feature(int(i), float(p[0]), float(p[1])) for i, p in zip(self.feature_ids, self.features)]


@dataclass
class KnownWorld:
    """The discovered subsets of features and renewal orbits (only ever grow)."""

    fov: FovParams
    n_f: int
    feature_mask: np.ndarray  # over the world's feature array
    world_points: np.ndarray
    orbits: list[RenewalOrbit] = field(default_factory=list)
    revision: int = 0

    def __post_init__(self):
        self._index: FeatureIndex | None = None
        self._index_count = -1

    @classmethod
    def empty(cls, world: WorldModel, fov: FovParams) -> "KnownWorld":
        return cls(fov, world.n_f, np.zeros(len(world.features), dtype=bool), world.features)

    @classmethod
    def from_features(cls, points, orbits: Iterable[RenewalOrbit], fov: FovParams, n_f: int) -> "KnownWorld":
        """A fully known world (handy for tests and offline planning)."""
        pts = _as_points(points) if not isinstance(points, np.ndarray) else np.asarray(points, float).reshape(-1, 2)
        return cls(fov, n_f, np.ones(len(pts), dtype=bool), pts, sorted(orbits, key=lambda o: o.landmark_id))

    @property
    def known_points(self) -> np.ndarray:
        return self.world_points[self.feature_mask]

    @property
    def n_known(self) -> int:
        return int(np.count_nonzero(self.feature_mask))

    @property
    def index(self) -> FeatureIndex:
        n = self.n_known
        if self._index is None or self._index_count != n:
            self._index = FeatureIndex(self.known_points)
            self._index_count = n
        return self._index

    @property
    def orbit_ids(self) -> set[int]:
        return {o.landmark_id for o in self.orbits}

    def safe_mask(self, states: np.ndarray) -> np.ndarray:
        return safe_mask(states, self.index, self.orbits, self.fov, self.n_f)

    def is_safe(self, x) -> bool:
        return is_safe(x, self.known_points, self.orbits, self.fov, self.n_f)

    def band_index(self, states: np.ndarray) -> np.ndarray:
        return band_index(states, self.orbits)

    def features_bbox(self, pad: float = 0.0):
        pts = self.known_points
        if len(pts) == 0:
            return None
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        return lo, hi


def sense_and_update(x_true, world: WorldModel, kw: KnownWorld) -> list[RenewalOrbit]:
    """Add everything in view of ``x_true`` to ``kw``; return orbits seen for the first time."""
    q = x_true.as_array() if isinstance(x_true, State) else np.asarray(x_true, float)
    if len(world.features):
        kw.feature_mask |= visible(q, world.features, kw.fov)
    seen = visible(q, world._landmark_pts, kw.fov)
    known = kw.orbit_ids
    new = [world.orbits[i] for i in np.flatnonzero(seen) if world.orbits[i].landmark_id not in known]
    if new:
        kw.orbits = sorted(kw.orbits + new, key=lambda o: o.landmark_id)
    kw.revision += 1
    return sorted(new, key=lambda o: o.landmark_id)


# ---------------------------------------------------------------------------
# feature/landmark sources


def load_features_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``id,north_m,east_m`` rows; returns (ids, points)."""
    ids, pts = [], []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "north_m", "east_m"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"feature file {path} lacks columns {sorted(missing)}")
        for row in reader:
            ids.append(int(row["id"]))
            pts.append((float(row["north_m"]), float(row["east_m"])))
    return np.array(ids, dtype=np.int64), np.array(pts, dtype=float).reshape(-1, 2)


def load_landmarks_csv(path) -> list[Landmark]:
    """Read ``id,north_m,east_m,kind`` rows."""
    out = []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "north_m", "east_m", "kind"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"landmark file {path} lacks columns {sorted(missing)}")
        for row in reader:
            out.append(Landmark(int(row["id"]), float(row["north_m"]), float(row["east_m"]), row["kind"].strip()))
    return out


def write_features_csv(path, points: np.ndarray, ids: np.ndarray | None = None) -> None:
    ids = np.arange(len(points)) if ids is None else ids
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "north_m", "east_m"])
        for i, p in zip(ids, points):
            w.writerow([int(i), f"{p[0]:.6f}", f"{p[1]:.6f}"])


@dataclass(frozen=True)
class DensityRegion:
    """Axis-aligned rectangle with its own feature density (features per square meter)."""

    north_min: float
    north_max: float
    east_min: float
    east_max: float
    density: float


def synthetic_features(
    domain: Domain, density: float, rng: np.random.Generator, regions: Sequence[DensityRegion] = ()
) -> np.ndarray:
    """Poisson feature field; later regions override earlier ones and the base density."""
    rates = [density] + [r.density for r in regions]
    lam = max(rates)
    if lam <= 0:
        return np.zeros((0, 2))
    n = rng.poisson(lam * domain.area)
    pts = np.column_stack(
        [
            rng.uniform(domain.north_min, domain.north_max, n),
            rng.uniform(domain.east_min, domain.east_max, n),
        ]
    )
    local = np.full(n, float(density))
    for r in regions:
        inside = (
            (pts[:, 0] >= r.north_min)
            & (pts[:, 0] <= r.north_max)
            & (pts[:, 1] >= r.east_min)
            & (pts[:, 1] <= r.east_max)
        )
        local[inside] = r.density
    keep = rng.uniform(0.0, lam, n) < local
    return pts[keep]
