import math

import numpy as np
import pytest

from gkreroot.budget import BudgetModel, distance_rate, path_budget
from gkreroot.dubins import State, VehicleParams, advance, dubins_shortest_path
from gkreroot.environment import Domain, FovParams, KnownWorld, RenewalOrbit
from gkreroot.reroot import (
    GrowthParams,
    backup_from_reroot,
    check_invariants,
    init_forest,
    realize_backup,
)

from helpers import dense_known
from oracles import backup_oracle

VP = VehicleParams()
MODEL = BudgetModel(distance_rate(0.03, VP.speed), 0.0, 9.0)
FOV = FovParams()


def test_init_forest_places_tangent_roots():
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    f = init_forest([orb], GrowthParams(), VP, MODEL)
    assert len(f) == 8
    bearings = np.sort(np.mod(np.arctan2(f.poses[:8, 1], f.poses[:8, 0]), 2 * np.pi))
    np.testing.assert_allclose(np.diff(bearings), np.pi / 4, atol=1e-12)
    for nd in f.nodes():
        assert nd.parent is None and nd.cost_to_root == 0 and nd.depth == 0
        b = math.atan2(nd.pose.east, nd.pose.north)
        assert abs((nd.pose.heading - (b - math.pi / 2) + math.pi) % (2 * math.pi) - math.pi) < 1e-12
    assert check_invariants(f) == []


def test_init_forest_requires_orbit():
    with pytest.raises(ValueError):
        init_forest([], GrowthParams(), VP, MODEL)


def test_two_orbits_two_trees_and_idempotent_roots():
    a, b = RenewalOrbit(0, 0.0, 0.0, 10.0), RenewalOrbit(1, 0.0, 100.0, 10.0)
    f = init_forest([a, b], GrowthParams(), VP, MODEL)
    assert sorted(set(f.root_orbit[: f.n])) == [0, 1]
    assert f.add_root_nodes([a, b]) == []
    assert len(f) == 16


def test_grow_keeps_invariants_and_costs_match_length():
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    known = dense_known([orb])
    f = init_forest([orb], GrowthParams(), VP, MODEL, Domain(-150, 150, -150, 150))
    rng = np.random.default_rng(0)
    for _ in range(4):
        assert f.grow(known, rng) == 50
    assert check_invariants(f) == []
    for i in range(8, f.n):
        length = sum(dubins_shortest_path(w0.as_array(), w1.as_array(), 10).total_length
                     for w0, w1 in zip(f.waypoints(i)[:-1], f.waypoints(i)[1:]))
        assert f.cost[i] == pytest.approx(0.03 * length, abs=1e-9)


def test_waypoints():
    orb = RenewalOrbit(0, 0.0, -10.0, 10.0)
    f = init_forest([orb], GrowthParams(), VP, MODEL)
    root = int(f.roots[0][2])  # bearing pi/2: pose (0, 0) heading north
    np.testing.assert_allclose(f.poses[root], [0, 0, 0], atol=1e-12)
    assert len(f.waypoints(root)) == 1
    a = f.add_node((-20, 0, 0), root)
    b = f.add_node((-40, 0, 0), a)
    c = f.add_node((-60, 5, 0), b)
    wp = f.waypoints(c)
    assert len(wp) == 4 and f.depth[c] == 3
    np.testing.assert_allclose(wp[-1].as_array(), f.poses[root])
    recomputed = sum(
        path_budget(dubins_shortest_path(p.as_array(), q.as_array(), 10), p.as_array(), MODEL, VP)
        for p, q in zip(wp[:-1], wp[1:])
    )
    assert recomputed == pytest.approx(f.cost[c], abs=1e-12)
    with pytest.raises(KeyError):
        f.waypoints(999)


def test_node_switches_tree_when_new_orbit_is_cheaper():
    home = RenewalOrbit(0, 0.0, -10.0, 10.0)
    f = init_forest([home], GrowthParams(), VP, MODEL)
    root = int(f.roots[0][2])
    v = f.add_node((-60, 0, 0), root)  # 60 m straight to the home root
    assert f.root_orbit[v] == 0 and f.cost[v] == pytest.approx(1.8)
    # a newly found orbit with a root 20 m straight ahead of v
    new = RenewalOrbit(1, -40.0, -10.0, 10.0)
    f.add_root_nodes([new])
    f.grow(dense_known([home, new]), np.random.default_rng(0), n_update=1)
    assert f.root_orbit[v] == 1
    assert f.cost[v] == pytest.approx(0.6)
    assert check_invariants(f) == []


def test_cost_ties_break_to_lower_orbit_id():
    # P flies 40 m to either root: straight ahead, or a quarter left arc then straight
    straight_root = np.array([40.0, 0.0, 0.0])
    arc_end = advance((0.0, 0.0, 0.0), 1.0, math.pi / 2, 10.0)
    arc_root = arc_end + [0.0, 40.0 - 5 * math.pi, 0.0]
    o_straight = RenewalOrbit(1, 40.0, -10.0, 10.0)
    o_arc = RenewalOrbit(0, arc_root[0] + 10.0, arc_root[1], 10.0)
    for o, r in ((o_straight, straight_root), (o_arc, arc_root)):
        assert o.in_band(r)[0]
    params = GrowthParams(n_root=4, radius_floor=200.0)
    known = dense_known([o_straight, o_arc])
    f = init_forest([o_straight, o_arc], params, VP, MODEL)
    lengths = {i: dubins_shortest_path((0, 0, 0), f.poses[i], 10).total_length for i in range(f.n)}
    best = min(lengths.values())
    tied = [i for i, ln in lengths.items() if abs(ln - best) < 1e-9]
    assert best == pytest.approx(40.0) and sorted(f.root_orbit[tied]) == [0, 1]
    new = f._insert(np.array([0.0, 0.0, 0.0]), known)
    assert f.root_orbit[new] == 0
    # swapping ids flips the choice
    o_straight2 = RenewalOrbit(0, 40.0, -10.0, 10.0)
    o_arc2 = RenewalOrbit(1, o_arc.center_north, o_arc.center_east, 10.0)
    f2 = init_forest([o_straight2, o_arc2], params, VP, MODEL)
    new2 = f2._insert(np.array([0.0, 0.0, 0.0]), dense_known([o_straight2, o_arc2]))
    assert f2.root_orbit[new2] == 0
    np.testing.assert_allclose(f2.poses[f2.parent[new2]], straight_root, atol=1e-9)


def _two_branch_forest():
    """Start S=(-50,0) heading north; branch A reaches an orbit in 50 m, branch B in 80 m."""
    S = np.array([-50.0, 0.0, 0.0])
    # branch A: quarter right turn then straight west, 50 m in total
    turn = advance(S, -1.0, math.pi / 2, 10.0)
    root_a = advance(turn, 0.0, (50 - 5 * math.pi) / 10.0, 10.0)
    orb_a = RenewalOrbit(0, root_a[0] - 10.0, root_a[1], 10.0)
    # branch B: S-curve to M then straight north, 80 m in total
    M = np.array([-30.0, 20.0, 0.0])
    l1 = dubins_shortest_path(S, M, 10).total_length
    root_b = M + [80.0 - l1, 0.0, 0.0]
    orb_b = RenewalOrbit(1, root_b[0], root_b[1] - 10.0, 10.0)
    assert orb_a.in_band(root_a)[0] and orb_b.in_band(root_b)[0]
    f = init_forest([orb_a, orb_b], GrowthParams(), VP, MODEL)
    ra = min(f.roots[0], key=lambda i: np.linalg.norm(f.poses[i, :2] - root_a[:2]))
    rb = min(f.roots[1], key=lambda i: np.linalg.norm(f.poses[i, :2] - root_b[:2]))
    a = f.add_node(S, ra)
    m = f.add_node(M, rb)
    b = f.add_node(S, m)
    assert f.chain_len[a] == pytest.approx(50.0) and f.chain_len[b] == pytest.approx(80.0)
    return f, S, (orb_a, orb_b), a, b


def test_backup_from_root_is_orbit_hold():
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    f = init_forest([orb], GrowthParams(), VP, MODEL)
    known = dense_known([orb])
    bk = backup_from_reroot(f, f.poses[3], 5.0, 2.5, known)
    assert bk.node is None and bk.b_minus == 2.5 and bk.trajectory.terminal is not None
    assert bk.hold_index == 0


def test_backup_prefers_shorter_branch():
    f, S, orbits, a, b = _two_branch_forest()
    known = dense_known(list(orbits))
    bk = backup_from_reroot(f, S, 0.0, 1.0, known)
    assert bk.node == a and bk.orbit_id == 0
    other = backup_oracle_value(f, S, known, b)
    assert other - bk.b_minus == pytest.approx(0.03 * 30, abs=0.01)
    assert bk.budget.values[bk.hold_index] == 0.0


def backup_oracle_value(f, S, known, v):
    from gkreroot.reroot import evaluate_candidate

    return evaluate_candidate(f, S, v, 0.0, 1.0, known).b_minus


def test_backup_discards_unsafe_cheaper_branch():
    f, S, orbits, a, b = _two_branch_forest()
    # a single far feature to the north-east: visible while heading north/east, not while heading west
    fov = FovParams(radius=1000.0, half_angle=math.pi / 2)
    known = KnownWorld.from_features(np.array([[200.0, 150.0]]), orbits, fov, 1)
    traj_a, hold_a = realize_backup(f, S, a, 0.0)
    assert not np.all(known.safe_mask(traj_a.states[: hold_a + 1]))
    bk = backup_from_reroot(f, S, 0.0, 0.0, known)
    assert bk is not None and bk.node != a and bk.orbit_id == 1
    assert np.all(known.safe_mask(bk.trajectory.states[: bk.hold_index + 1]))


def test_backup_none_when_ball_empty():
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    f = init_forest([orb], GrowthParams(), VP, MODEL)
    assert backup_from_reroot(f, (500.0, 500.0, 0.0), 0.0, 0.0, dense_known([orb])) is None


def test_backup_matches_oracle_on_grown_forest():
    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    known = dense_known([orb], lo=(-70, -70), hi=(70, 70), spacing=7.0)
    f = init_forest([orb], GrowthParams(n_update=20), VP, MODEL, Domain(-60, 60, -60, 60))
    f.grow(known, np.random.default_rng(4))
    rng = np.random.default_rng(5)
    for _ in range(10):
        start = np.array([rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(0, 2 * np.pi)])
        bk = backup_from_reroot(f, start, 0.0, 0.5, known)
        ref = backup_oracle(f, start, 0.0, 0.5, known, FOV.radius, FOV.half_angle, 8)
        if ref is None:
            assert bk is None
        else:
            assert (bk.node, bk.b_minus, bk.hold_index) == (ref[0], pytest.approx(ref[1], abs=1e-12), ref[2])


def test_forest_snapshot(tmp_path):
    import json

    orb = RenewalOrbit(0, 0.0, 0.0, 10.0)
    f = init_forest([orb], GrowthParams(n_update=5), VP, MODEL)
    f.grow(dense_known([orb]), np.random.default_rng(0))
    f.write_jsonl(tmp_path / "forest.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "forest.jsonl").read_text().splitlines()]
    assert len(lines) == len(f)
    assert set(lines[0]) == {"id", "north", "east", "heading", "parent", "root_orbit", "cost", "depth"}
    assert lines[0]["parent"] is None
