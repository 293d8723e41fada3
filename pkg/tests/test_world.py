import numpy as np
import pytest

from cbcsim.control import UnicyclePose
from cbcsim.errors import (
    PathUnreachable,
    PoseInObstacle,
    PoseOutOfBounds,
    WorldFormatError,
)
from cbcsim.world import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    OccupancyGrid,
    distance_transform,
    dump_world,
    frontier_cells,
    lidar_scan,
    load_world,
    plan_path,
    select_frontier,
    update_map,
)


def boxed_room(n=20, res=0.1):
    cells = np.zeros((n, n), dtype=np.uint8)
    cells[:2, :] = OCCUPIED
    cells[-2:, :] = OCCUPIED
    cells[:, :2] = OCCUPIED
    cells[:, -2:] = OCCUPIED
    return OccupancyGrid(res, np.zeros(2), cells)


def test_world_roundtrip():
    grid = boxed_room()
    grid.cells[5, 5] = UNKNOWN
    text = dump_world(grid)
    back = load_world(text)
    assert back.resolution == grid.resolution
    np.testing.assert_array_equal(back.origin, grid.origin)
    np.testing.assert_array_equal(back.cells, grid.cells)
    # first text row is the top of the map
    top_row = text.splitlines()[1]
    assert top_row == "#" * 20


def test_world_format_errors():
    with pytest.raises(WorldFormatError):
        load_world("")
    with pytest.raises(WorldFormatError):
        load_world("res 0.1\n##\n##\n")
    with pytest.raises(WorldFormatError):
        load_world("res 0.1 origin 0 0\n##\n#\n")
    with pytest.raises(WorldFormatError):
        load_world("res 0.1 origin 0 0\n#x\n##\n")


def test_world_cell_coordinates():
    grid = boxed_room()
    ix, iy = grid.world_to_cell([0.55, 1.25])
    assert (ix, iy) == (5, 12)
    np.testing.assert_allclose(grid.cell_center(5, 12), [0.55, 1.25])


def test_lidar_wall_distances():
    grid = boxed_room(20, 0.1)  # free interior x, y in (0.2, 1.8)
    pose = UnicyclePose(position=np.array([1.0, 1.0]), heading=0.0)
    scan = lidar_scan(grid, pose, n_beams=4, max_range=5.0)
    # beams at -pi, -pi/2, 0, pi/2 all hit the inner wall face 0.8 m away
    np.testing.assert_allclose(scan.ranges, 0.8, atol=1e-12)
    assert np.all(scan.hit_mask)
    np.testing.assert_allclose(scan.hit_points[2], [1.8, 1.0], atol=1e-12)


def test_lidar_max_range_and_pose_errors():
    grid = boxed_room(40, 0.1)
    pose = UnicyclePose(position=np.array([2.0, 2.0]), heading=0.0)
    scan = lidar_scan(grid, pose, n_beams=8, max_range=0.5)
    assert not np.any(scan.hit_mask)
    np.testing.assert_allclose(scan.ranges, 0.5)
    with pytest.raises(PoseOutOfBounds):
        lidar_scan(grid, UnicyclePose(position=np.array([-1.0, 0.0]), heading=0.0), 4, 1.0)
    with pytest.raises(PoseInObstacle):
        lidar_scan(grid, UnicyclePose(position=np.array([0.05, 0.05]), heading=0.0), 4, 1.0)


def test_update_map_is_idempotent_and_monotone():
    truth = boxed_room()
    known = OccupancyGrid(
        truth.resolution, truth.origin, np.full(truth.cells.shape, UNKNOWN, np.uint8)
    )
    pose = UnicyclePose(position=np.array([1.0, 1.0]), heading=0.0)
    scan = lidar_scan(truth, pose, n_beams=90, max_range=5.0)
    once = update_map(known, scan)
    twice = update_map(once, scan)
    np.testing.assert_array_equal(once.cells, twice.cells)
    # updates only resolve unknown cells, never revert known ones
    flipped = once.copy()
    free_cells = np.argwhere(once.cells == FREE)
    iy, ix = free_cells[0]
    flipped.cells[iy, ix] = OCCUPIED
    again = update_map(flipped, scan)
    assert again.cells[iy, ix] == OCCUPIED


def test_frontier_cells_hand_grid():
    cells = np.full((5, 5), UNKNOWN, dtype=np.uint8)
    cells[2, 1:4] = FREE
    cells[2, 0] = OCCUPIED
    got = frontier_cells(OccupancyGrid(1.0, np.zeros(2), cells))
    # every free cell touches unknown above/below; ordered by cell index
    assert got == [(1, 2), (2, 2), (3, 2)]


def test_distance_transform_matches_brute_force():
    rng = np.random.default_rng(0)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        cells = (rng.uniform(size=(20, 20)) < 0.1).astype(np.uint8) * OCCUPIED
        cells[0, 0] = OCCUPIED  # keep at least one unsafe cell
        grid = OccupancyGrid(0.05, np.zeros(2), cells)
        field = distance_transform(grid)
        ys, xs = np.nonzero(cells != FREE)
        for iy in range(0, 20, 3):
            for ix in range(0, 20, 3):
                expected = np.min(np.hypot(xs - ix, ys - iy)) * 0.05
                assert field.at_cell(ix, iy) == pytest.approx(expected, abs=1e-12)


def test_distance_transform_unknown_handling():
    cells = np.full((6, 6), FREE, dtype=np.uint8)
    cells[0, :] = UNKNOWN
    grid = OccupancyGrid(1.0, np.zeros(2), cells)
    planning = distance_transform(grid)
    scoring = distance_transform(grid, unknown_unsafe=False)
    assert planning.at_cell(3, 0) == 0.0
    assert scoring.at_cell(3, 0) > 1e6  # no occupied cell anywhere


def test_plan_path_straight_corridor_and_unreachable():
    grid = boxed_room(20, 0.1)
    planned = plan_path(grid, (3, 10), (16, 10))
    assert planned.points.shape[0] >= 2
    np.testing.assert_allclose(planned.points[0], grid.cell_center(3, 10))
    np.testing.assert_allclose(planned.points[-1], grid.cell_center(16, 10))
    assert planned.min_clearance > 0.0
    # wall the corridor off
    blocked = grid.copy()
    blocked.cells[:, 10] = OCCUPIED
    with pytest.raises(PathUnreachable):
        plan_path(blocked, (3, 10), (16, 10))
    with pytest.raises(PathUnreachable):
        plan_path(grid, (0, 0), (16, 10))  # start inside a wall


def test_plan_path_prefers_clearance():
    # a short wall with a one-cell gap on the straight route; with zero
    # clearance weight the planner squeezes through, with a heavy weight it
    # detours around the wall through open space
    cells = np.zeros((15, 31), dtype=np.uint8)
    cells[1:8, 15] = OCCUPIED
    cells[4, 15] = FREE  # gap on the straight route
    grid = OccupancyGrid(0.1, np.zeros(2), cells)
    direct = plan_path(grid, (5, 4), (25, 4), w=0.0)
    assert max(iy for _, iy in direct.cells) < 8  # squeezes through the gap
    planned = plan_path(grid, (5, 4), (25, 4), w=5.0)
    assert max(iy for _, iy in planned.cells) >= 8  # goes around the wall
    assert planned.min_clearance > direct.min_clearance


def test_select_frontier_scores_distance_to_occupied():
    cells = np.full((9, 9), UNKNOWN, dtype=np.uint8)
    cells[1:8, 1:5] = FREE
    cells[:, 0] = OCCUPIED
    grid = OccupancyGrid(1.0, np.zeros(2), cells)
    pick = select_frontier(grid, (2, 4))
    assert pick is not None
    frontiers = frontier_cells(grid)
    score = distance_transform(grid, unknown_unsafe=False)
    best = max(score.at_cell(ix, iy) for ix, iy in frontiers)
    assert score.at_cell(*pick) == pytest.approx(best)


def test_select_frontier_none_when_fully_known():
    grid = boxed_room()
    assert select_frontier(grid, (10, 10)) is None
