import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkreroot.dubins import State
from gkreroot.environment import (
    DensityRegion,
    Domain,
    FeatureIndex,
    FovParams,
    KnownWorld,
    Landmark,
    OrbitOverlapError,
    RenewalOrbit,
    WorldModel,
    band_index,
    features_in_fov,
    in_renewal,
    is_safe,
    load_features_csv,
    load_landmarks_csv,
    safe_mask,
    sense_and_update,
    synthetic_features,
    write_features_csv,
)

from oracles import fov_count_oracle

FOV = FovParams()


def test_fov_examples():
    x = State(0, 0, 0)
    assert features_in_fov(x, np.array([[30.0, 0.0]]), FOV) == 1
    assert features_in_fov(x, np.array([[0.0, 70.0]]), FOV) == 0
    assert features_in_fov(x, np.array([[-10.0, 0.0]]), FOV) == 0


def test_fov_boundary_inclusive():
    x = State(0, 0, 0)
    edge = np.array([[60.0, 0.0], [60 * math.cos(math.pi / 4), 60 * math.sin(math.pi / 4)], [0.0, 0.0]])
    assert features_in_fov(x, edge, FOV) == 3


def test_fov_params_validation():
    with pytest.raises(ValueError):
        FovParams(radius=0)
    with pytest.raises(ValueError):
        FovParams(half_angle=4.0)


pose_st = st.tuples(st.floats(-50, 150), st.floats(-50, 150), st.floats(0, 2 * math.pi - 1e-9))


@settings(max_examples=60, deadline=None)
@given(pose_st, st.integers(0, 10_000))
def test_grid_count_matches_oracle(pose, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-20, 120, size=(rng.integers(0, 400), 2))
    idx = FeatureIndex(pts)
    got = idx.count(np.array([pose]), FOV)[0]
    assert got == fov_count_oracle(pose, pts, FOV.radius, FOV.half_angle)
    assert got == features_in_fov(pose, pts, FOV)
    capped = idx.count(np.array([pose]), FOV, cap=8)[0]
    assert capped == min(8, got) or (capped >= 8 and got >= 8)


@settings(max_examples=40, deadline=None)
@given(pose_st, st.floats(0, 2 * math.pi), st.floats(-100, 100), st.floats(-100, 100), st.integers(0, 1000))
def test_fov_rigid_motion_invariance(pose, rot, tn, te, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-20, 120, size=(200, 2))
    c, s = math.cos(rot), math.sin(rot)
    R = np.array([[c, -s], [s, c]])
    p2 = pts @ R.T + [tn, te]
    x2 = R @ np.array(pose[:2]) + [tn, te]
    a = features_in_fov(pose, pts, FOV)
    b = features_in_fov((x2[0], x2[1], pose[2] + rot), p2, FOV)
    assert a == b


def test_orbit_membership():
    orb = RenewalOrbit(3, 50.0, 50.0, 10.0)
    on = orb.pose_at(0.7)
    assert in_renewal(on, [orb]) == 3
    assert in_renewal((50.0, 50.0, 0.0), [orb]) is None
    outward = on.copy()
    outward[2] = 0.7  # radial
    assert in_renewal(outward, [orb]) is None


def test_orbit_is_counter_clockwise_on_the_map():
    # on the east side of the centre the vehicle must head north (map counter-clockwise)
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    p = orb.pose_at(math.pi / 2)
    assert p[1] == pytest.approx(10.0) and p[2] == pytest.approx(0.0)


def test_overlapping_bands_raise():
    a = RenewalOrbit(0, 0.0, 0.0, 10.0)
    b = RenewalOrbit(1, 0.0, 0.0, 10.0)
    with pytest.raises(OrbitOverlapError):
        band_index(a.pose_at(0.0)[None, :], [a, b])


def test_is_safe_examples():
    orb = RenewalOrbit(0, 200.0, 200.0, 10.0)
    x = State(0, 0, 0)
    eight = np.column_stack([np.linspace(10, 50, 8), np.zeros(8)])
    assert is_safe(x, eight, [orb], FOV, 8)
    assert not is_safe(x, eight[:7], [orb], FOV, 8)
    assert is_safe(State(*orb.pose_at(1.0)), np.zeros((0, 2)), [orb], FOV, 8)


def _world(seed=0):
    dom = Domain(0, 200, 0, 200)
    pts = synthetic_features(dom, 0.01, np.random.default_rng(seed))
    lms = [Landmark(0, 50, 50, "start"), Landmark(1, 150, 150, "goal")]
    return WorldModel(pts, lms, dom)


def test_sense_and_update_monotone_and_idempotent():
    w = _world()
    kw = KnownWorld.empty(w, FOV)
    x = State(*w.orbits[0].pose_at(0.0))
    sense_and_update(x, w, kw)
    n1 = kw.n_known
    assert n1 > 0
    mask1 = kw.feature_mask.copy()
    assert sense_and_update(x, w, kw) == []
    assert kw.n_known == n1 and kw.revision == 2
    sense_and_update(State(100, 100, 1.0), w, kw)
    assert np.all(kw.feature_mask[mask1])


def test_landmark_discovered_once():
    w = _world()
    kw = KnownWorld.empty(w, FOV)
    found = []
    # fly a straight line past the goal landmark
    for e in np.arange(60, 200, 2.0):
        found += sense_and_update(State(150.0 - 40, e, math.atan2(40, 10)), w, kw)
    ids = [o.landmark_id for o in found]
    assert ids.count(1) == 1


def test_known_safety_implies_true_safety():
    w = _world(3)
    kw = KnownWorld.empty(w, FOV)
    rng = np.random.default_rng(1)
    for _ in range(10):
        sense_and_update(State(rng.uniform(0, 200), rng.uniform(0, 200), rng.uniform(0, 6.28)), w, kw)
    poses = np.column_stack([rng.uniform(0, 200, (2000, 2)), rng.uniform(0, 6.28, 2000)])
    known = kw.safe_mask(poses)
    truth = safe_mask(poses, w.index, w.orbits, FOV, w.n_f)
    assert np.all(truth[known])


def test_world_validation():
    dom = Domain(0, 100, 0, 100)
    with pytest.raises(ValueError):
        WorldModel(np.zeros((0, 2)), [], dom)
    with pytest.raises(ValueError):
        WorldModel(np.zeros((0, 2)), [Landmark(0, 5, 50)], dom)
    with pytest.raises(ValueError):
        WorldModel(np.zeros((0, 2)), [Landmark(0, 50, 50), Landmark(1, 60, 55)], dom)
    with pytest.raises(ValueError):
        WorldModel(np.array([[150.0, 0.0]]), [Landmark(0, 50, 50)], dom)


def test_csv_roundtrip(tmp_path):
    pts = np.array([[1.5, 2.5], [3.0, 4.0]])
    write_features_csv(tmp_path / "f.csv", pts)
    ids, back = load_features_csv(tmp_path / "f.csv")
    assert list(ids) == [0, 1] and np.allclose(back, pts)
    (tmp_path / "l.csv").write_text("id,north_m,east_m,kind\n0,10,20,start\n1,30,40,goal\n")
    lms = load_landmarks_csv(tmp_path / "l.csv")
    assert lms[1] == Landmark(1, 30.0, 40.0, "goal")
    (tmp_path / "bad.csv").write_text("id,north\n")
    with pytest.raises(ValueError):
        load_features_csv(tmp_path / "bad.csv")


def test_synthetic_density_regions():
    dom = Domain(0, 200, 0, 200)
    pts = synthetic_features(dom, 0.02, np.random.default_rng(0), [DensityRegion(0, 200, 80, 120, 0.0)])
    assert not np.any((pts[:, 1] > 80) & (pts[:, 1] < 120))
    assert abs(len(pts) - 0.02 * 200 * 160) < 4 * math.sqrt(0.02 * 200 * 160)
