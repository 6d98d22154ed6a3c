import math

import numpy as np
import pytest

from gkreroot.budget import BudgetModel, distance_rate
from gkreroot.environment import Domain, KnownWorld, RenewalOrbit
from gkreroot.gatekeeper import (
    GatekeeperParams,
    InitialCommitmentError,
    build_candidate,
    gatekeeper_step,
    make_initial_committed,
    validate,
)
from gkreroot.reroot import GrowthParams, init_forest

from helpers import FOV, VP, dense_known, straight

MODEL = BudgetModel(distance_rate(0.03, VP.speed), 0.0, 9.0)
PARAMS = GatekeeperParams()


def _home_commitment(orb, known):
    return make_initial_committed(orb.pose_at(0.0), orb, known, MODEL, VP)


def test_switch_time_grid():
    assert GatekeeperParams().switch_times() == [20.0 - 2 * i for i in range(11)]
    assert GatekeeperParams(5.0, 2.0).switch_times() == [5.0, 3.0, 1.0, 0.0]
    with pytest.raises(ValueError):
        GatekeeperParams(2.0, 3.0)


def test_zero_switch_time_is_pure_backup():
    orb = RenewalOrbit(0, 0.0, -10.0, 10.0)
    known = dense_known([orb])
    forest = init_forest([orb], GrowthParams(), VP, MODEL, Domain(-150, 150, -150, 150))
    forest.grow(known, np.random.default_rng(0))
    nominal = straight(200.0, start=(-30.0, 5.0, 0.3))
    c = build_candidate(nominal, 0.0, forest, known, MODEL, VP, 1.0)
    assert c is not None and len(c.prefix) == 1
    np.testing.assert_array_equal(c.trajectory.states, c.backup.trajectory.states)
    assert c.trajectory.terminal is not None


def _peak_setup():
    """Nominal north along east=0; a forest node at (100, 0) with a 51.5 m straight chain to an orbit root."""
    orb = RenewalOrbit(0, 151.5, -10.0, 10.0)
    forest = init_forest([orb], GrowthParams(), VP, MODEL)
    root = int(forest.roots[0][2])
    np.testing.assert_allclose(forest.poses[root], [151.5, 0.0, 0.0], atol=1e-12)
    v = forest.add_node((100.0, 0.0, 0.0), root)
    known = dense_known([orb], lo=(-50, -100), hi=(250, 100))
    return orb, forest, v, known


def test_prefix_plus_backup_budget_peak():
    orb, forest, v, known = _peak_setup()
    nominal = straight(200.0)
    c = build_candidate(nominal, 10.0, forest, known, MODEL, VP, 0.0)
    assert c.backup.node == v and c.switch_index == 500
    np.testing.assert_allclose(c.prefix.states[-1], c.backup.trajectory.states[0])
    assert np.all(np.diff(c.trajectory.times) > 0)
    # the orbit band is entered about 1 m before the root, so at least 150 m are flown at 3%
    band = orb.in_band(c.trajectory.states)
    entry = int(np.argmax(band))
    flown = entry * VP.step_length
    assert flown >= 150.0
    assert c.peak_budget >= 4.5
    assert c.peak_budget == pytest.approx(0.03 * (flown - VP.step_length), abs=1e-9)
    assert c.budget.values[c.hold_index] == 0.0
    assert validate(c, known, 9.0)
    # the same candidate is invalid once the budget cap is below its peak
    assert not validate(c, known, 4.4)


def test_over_budget_candidate_invalid():
    orb, forest, v, known = _peak_setup()
    c = build_candidate(straight(200.0), 10.0, forest, known, MODEL, VP, 5.0)
    assert c.peak_budget == pytest.approx(9.5, abs=0.1) and c.peak_budget > 9.0
    assert not validate(c, known, 9.0)


def test_feature_sparse_candidate_invalid():
    orb = RenewalOrbit(0, 20.0, -10.0, 10.0)
    forest = init_forest([orb], GrowthParams(), VP, MODEL)
    root = int(forest.roots[0][2])
    forest.add_node((0.0, 0.0, 0.0), root)

    def cluster(n):
        # a tight cluster straight ahead, visible from every pose on the 20 m run-in
        pts = np.column_stack([np.full(n, 50.0), np.linspace(-1.0, 1.0, n)])
        return KnownWorld.from_features(pts, [orb], FOV, 8)

    c = build_candidate(straight(200.0), 0.0, forest, cluster(8), MODEL, VP, 0.0)
    assert c is not None and c.backup.node is not None
    assert validate(c, cluster(8), 9.0)
    assert not validate(c, cluster(7), 9.0)
    # the ReRoot search itself refuses the sparse branch
    assert build_candidate(straight(200.0), 0.0, forest, cluster(7), MODEL, VP, 0.0) is None


def test_all_valid_commits_full_horizon():
    # the nominal reaches an orbit tangent exactly at T_H, so the T_H candidate is a pure hold
    orb = RenewalOrbit(0, 200.0, -10.0, 10.0)
    home = RenewalOrbit(1, -40.0, -10.0, 10.0)
    known = dense_known([orb, home], lo=(-60, -60), hi=(270, 60))
    forest = init_forest([orb, home], GrowthParams(), VP, MODEL)
    prev = _home_commitment(home, known)
    out, rec = gatekeeper_step(straight(250.0), forest, known, MODEL, VP, 0.0, prev, PARAMS, k=3)
    assert out.candidate.switch_time == 20.0 and out.valid and out.committed_at == 3
    assert rec.T_S_committed == 20.0 and not rec.inherited and rec.valid_count == 1
    assert out.trajectory.terminal is not None


def test_no_valid_candidate_returns_prev():
    home = RenewalOrbit(0, 0.0, -10.0, 10.0)
    known = KnownWorld.from_features(np.zeros((0, 2)), [home], FOV, 8)  # nothing known: off-orbit is unsafe
    forest = init_forest([home], GrowthParams(), VP, MODEL)
    prev = _home_commitment(home, known)
    nominal = straight(250.0, start=(50.0, 50.0, 1.0))
    out, rec = gatekeeper_step(nominal, forest, known, MODEL, VP, 0.0, prev, PARAMS, k=1)
    assert out.candidate is prev.candidate and out.commit_id == prev.commit_id and not out.valid
    assert out.trajectory is prev.trajectory
    assert rec.inherited and rec.T_S_committed is None and rec.valid_count == 0


def test_only_second_switch_time_valid():
    """Safety fails beyond a known frontier; backups exist only at T_S = 2 dT."""
    orb = RenewalOrbit(0, 40.0, -10.0, 10.0)  # tangent to the nominal at (40, 0) heading north
    home = RenewalOrbit(1, -60.0, -40.0, 10.0)
    known = dense_known([orb, home], lo=(-100, -100), hi=(55, 100))
    forest = init_forest([orb, home], GrowthParams(near_ball_radius=5.0), VP, MODEL)
    prev = _home_commitment(home, known)
    nominal = straight(250.0)
    safe = known.safe_mask(nominal.states)
    assert safe[: 201].all() and not safe[300]  # frontier between 40 m and 60 m
    params = GatekeeperParams(full_scan=True)
    out, rec = gatekeeper_step(nominal, forest, known, MODEL, VP, 0.0, prev, params, k=2)
    assert rec.valid_count == 1 and rec.T_S_committed == 4.0
    assert out.candidate.switch_time == 4.0 and out.candidate.backup.node is None
    # the greedy scan returns the same commitment
    out2, rec2 = gatekeeper_step(nominal, forest, known, MODEL, VP, 0.0, prev, PARAMS, k=2)
    assert out2.candidate.switch_time == 4.0 and rec2.valid_count == 1


def test_commitment_is_maximal_on_grid():
    orb = RenewalOrbit(0, 0.0, -10.0, 10.0)
    known = dense_known([orb], lo=(-120, -120), hi=(120, 120))
    forest = init_forest([orb], GrowthParams(), VP, MODEL, Domain(-100, 100, -100, 100))
    rng = np.random.default_rng(3)
    for _ in range(3):
        forest.grow(known, rng)
    prev = _home_commitment(orb, known)
    nominal = straight(250.0, start=orb.pose_at(0.0))
    out, rec = gatekeeper_step(nominal, forest, known, MODEL, VP, 0.0, prev, PARAMS)
    for ts in PARAMS.switch_times():
        if ts <= out.candidate.switch_time:
            break
        c = build_candidate(nominal, ts, forest, known, MODEL, VP, 0.0)
        assert c is None or not validate(c, known, MODEL.cap)


def test_initial_commitment_hold_and_loop():
    home = RenewalOrbit(0, 0.0, -10.0, 10.0)
    known = dense_known([home])
    start = home.pose_at(math.pi / 2)
    hold = make_initial_committed(start, home, known, MODEL, VP)
    assert hold.valid and hold.candidate.hold_index == 0 and hold.candidate.peak_budget == 0.0
    loop = make_initial_committed(start, home, known, MODEL, VP, loop_length=30.0)
    c = loop.candidate
    np.testing.assert_allclose(c.trajectory.states[c.hold_index, :2], start[:2], atol=VP.step_length + 1e-9)
    assert home.in_band(c.trajectory.states[c.hold_index])[0]
    total = c.hold_index * VP.step_length
    # 3% of the loop length, less the stretches flown inside the orbit band
    assert 0.03 * (total - 3.0) <= c.peak_budget <= 0.03 * total
    with pytest.raises(InitialCommitmentError):
        make_initial_committed((5.0, 5.0, 0.0), home, known, MODEL, VP)
    empty = KnownWorld.from_features(np.zeros((0, 2)), [home], FOV, 8)
    with pytest.raises(InitialCommitmentError):
        make_initial_committed(start, home, empty, MODEL, VP, loop_length=30.0)
