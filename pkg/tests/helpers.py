"""Shared fixtures-as-functions for the test suite."""

import math

import numpy as np

from gkreroot.dubins import State, VehicleParams, dubins_shortest_path, path_to_trajectory
from gkreroot.environment import FovParams, KnownWorld

VP = VehicleParams()
FOV = FovParams()


def dense_known(orbits, lo=(-150, -150), hi=(150, 150), spacing=4.0, fov=FOV, n_f=8):
    """Known world with a regular feature grid over ``lo``..``hi``."""
    n = np.arange(lo[0], hi[0] + 1e-9, spacing)
    e = np.arange(lo[1], hi[1] + 1e-9, spacing)
    pts = np.array([(a, b) for a in n for b in e])
    return KnownWorld.from_features(pts, orbits, fov, n_f)


def straight(length, start=(0.0, 0.0, 0.0), t0=0.0, vehicle=VP):
    """Straight-line trajectory of ``length`` meters from ``start``."""
    end = (start[0] + length * math.cos(start[2]), start[1] + length * math.sin(start[2]), start[2])
    return path_to_trajectory(dubins_shortest_path(start, end, vehicle.min_turn_radius), State(*start), t0, vehicle)
