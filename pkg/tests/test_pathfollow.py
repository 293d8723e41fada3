import numpy as np
import pytest

from cbcsim.barriers import BarrierFamily, PowerDistanceBarrier
from cbcsim.control import UnicyclePose
from cbcsim.corridor import CorridorParams, bc_full
from cbcsim.errors import ExplorationStuck, PreconditionViolated
from cbcsim.geom import Corridor, Halfspace
from cbcsim.pathfollow import (
    ExploreConfig,
    Path,
    explore,
    follow_path,
    select_path_goal,
)
from cbcsim.world import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, load_world


def halfplane_corridor(limit):
    return Corridor(
        np.zeros(2),
        (Halfspace(np.array([-1.0, 0.0]), -limit),),  # g_1 <= limit
        kind="full",
        unsafe_anchor=False,
    )


def test_path_interpolation_and_length():
    path = Path([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
    assert path.length == pytest.approx(3.0)
    np.testing.assert_allclose(path.point(0.0), [0.0, 0.0])
    np.testing.assert_allclose(path.point(1.0), [1.0, 2.0])
    np.testing.assert_allclose(path.point(1.0 / 3.0), [1.0, 0.0])
    np.testing.assert_allclose(path.point(0.5), [1.0, 0.5])
    # duplicate waypoints are dropped, degenerate paths rejected
    assert Path([[0, 0], [0, 0], [1, 0]]).length == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Path([[1.0, 1.0], [1.0, 1.0]])


def test_select_path_goal_halfspace_hand_case():
    # straight path (0,0) -> (3,0) against g_1 <= 1: s* is the largest
    # sample at or below x = 1
    path = Path([[0.0, 0.0], [3.0, 0.0]])
    n = 301
    s_star, point = select_path_goal(path, halfplane_corridor(1.0), n)
    assert abs(point[0] - 1.0) <= 3.0 / (n - 1) + 1e-12
    assert s_star == pytest.approx(point[0] / 3.0)


def test_select_path_goal_trivial_cases():
    path = Path([[0.0, 0.0], [3.0, 0.0]])
    s_star, point = select_path_goal(path, halfplane_corridor(10.0), 100)
    assert s_star == 1.0
    np.testing.assert_allclose(point, [3.0, 0.0])
    assert select_path_goal(path, halfplane_corridor(-1.0), 100) is None
    with pytest.raises(ValueError):
        select_path_goal(path, halfplane_corridor(1.0), 1)


def test_select_path_goal_reentry():
    # the path leaves and re-enters the corridor; the farthest member wins
    path = Path([[0.0, 0.0], [2.0, 0.0], [0.5, 1.0]])
    s_star, point = select_path_goal(path, halfplane_corridor(1.0), 400)
    assert point[1] > 0.0  # on the returning leg, not the first crossing
    assert s_star > 0.5


def test_follow_path_reaches_endpoint_past_obstacle():
    fam = BarrierFamily(
        [PowerDistanceBarrier(q=np.array([2.0, 1.1]), r=1.0, p=2.0)]
    )
    params = CorridorParams(kappa=1.0, alpha_rate=1.0)
    path = Path([[0.0, 0.0], [4.0, 0.0]])
    traj = follow_path("full", path, fam, params, np.zeros(2), dt=1e-2, T_max=30.0)
    assert not traj.violated
    assert np.linalg.norm(traj.final_state - [4.0, 0.0]) <= 1e-2 + 1e-9
    s = [smp.s_star for smp in traj.samples]
    assert all(a <= b + 1e-15 for a, b in zip(s, s[1:]))


def test_follow_path_trivial_goal_control():
    # no obstacle nearby: plain contraction toward the endpoint
    fam = BarrierFamily(
        [PowerDistanceBarrier(q=np.array([50.0, 50.0]), r=1.0, p=2.0)]
    )
    params = CorridorParams(kappa=1.0, alpha_rate=1.0)
    path = Path([[0.0, 0.0], [1.0, 0.0]])
    traj = follow_path("full", path, fam, params, np.zeros(2), dt=1e-3, T_max=30.0)
    assert np.linalg.norm(traj.final_state - [1.0, 0.0]) <= 1e-2 + 1e-9
    assert traj.samples[0].s_star == 1.0  # whole path is in the first corridor


def test_follow_path_rejects_unsafe_path():
    fam = BarrierFamily(
        [PowerDistanceBarrier(q=np.array([2.0, 0.0]), r=0.5, p=2.0)]
    )
    params = CorridorParams(kappa=1.0, alpha_rate=1.0)
    path = Path([[0.0, 0.0], [4.0, 0.0]])  # cuts through the obstacle
    with pytest.raises(PreconditionViolated):
        follow_path("full", path, fam, params, np.zeros(2))


def test_follow_path_unicycle_stays_safe():
    fam = BarrierFamily(
        [PowerDistanceBarrier(q=np.array([1.5, 0.8]), r=0.6, p=2.0)]
    )
    params = CorridorParams(kappa=1.0, alpha_rate=1.0, epsilon=0.05)
    path = Path([[0.0, 0.0], [3.0, 0.0]])
    traj = follow_path(
        "unicycle", path, fam, params, np.array([0.0, 0.0, 0.0]), dt=2e-3, T_max=40.0
    )
    assert not traj.violated
    assert np.linalg.norm(traj.final_state[:2] - [3.0, 0.0]) <= 0.1 + 1e-9


def room_world(n=40, res=0.05):
    cells = np.zeros((n, n), dtype=np.uint8)
    cells[:2, :] = OCCUPIED
    cells[-2:, :] = OCCUPIED
    cells[:, :2] = OCCUPIED
    cells[:, -2:] = OCCUPIED
    return OccupancyGrid(res, np.zeros(2), cells)


def explore_config(**kw):
    defaults = dict(
        params=CorridorParams(kappa=1.0, alpha_rate=1.0, epsilon=0.02),
        kind="unicycle",
        n_beams=720,
        max_range=4.0,
        obstacle_radius=0.08,
        dt=5e-3,
        max_cycles=20,
    )
    defaults.update(kw)
    return ExploreConfig(**defaults)


def test_explore_single_room_two_cycles():
    truth = room_world()
    pose = UnicyclePose(position=np.array([1.0, 1.0]), heading=0.0)
    log = explore(truth, pose, explore_config())
    assert log.n_cycles <= 2
    assert log.coverage == pytest.approx(1.0)
    assert not log.stuck


def test_explore_sealed_pocket_stays_unknown():
    truth = room_world()
    truth.cells[28:30, 2:14] = OCCUPIED
    truth.cells[28:38, 12:14] = OCCUPIED
    pose = UnicyclePose(position=np.array([1.4, 0.5]), heading=0.0)
    log = explore(truth, pose, explore_config(max_range=2.0, n_beams=240,
                                              max_cycles=60))
    assert log.coverage == pytest.approx(1.0)  # of reachable cells
    pocket = log.known.cells[31:36, 4:10]
    assert np.all(pocket == UNKNOWN)


def test_explore_stuck_after_three_idle_cycles():
    # forbid motion entirely: after the first scan no new cells appear
    truth = room_world()
    pose = UnicyclePose(position=np.array([1.0, 1.0]), heading=0.0)
    cfg = explore_config(n_beams=60, max_range=0.6, cycle_T_max=0.0, max_cycles=10)
    with pytest.raises(ExplorationStuck) as err:
        explore(truth, pose, cfg)
    assert err.value.log is not None
    assert err.value.log.stuck


def test_explore_corridor_recorded_per_cycle():
    # a room large enough that the range-limited sensor leaves frontiers in
    # open space, forcing several planned cycles
    truth = room_world(n=80)
    pose = UnicyclePose(position=np.array([1.0, 1.0]), heading=0.0)
    log = explore(truth, pose, explore_config(n_beams=240, max_range=1.5,
                                              max_cycles=40))
    planned_cycles = [c for c in log.cycles if c.frontier is not None]
    assert planned_cycles
    for c in planned_cycles:
        assert c.corridor is not None
        assert c.corridor.contains(c.start_state[:2])
