"""2D occupancy-grid world: lidar, incremental mapping, frontiers, planning.

World text format: a header line ``res <m> origin <x> <y>`` followed by a
rectangular character grid ('#' occupied, '.' free, '?' unknown).  The first
text row is the top of the map (largest y).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    PathUnreachable,
    PoseInObstacle,
    PoseOutOfBounds,
    WorldFormatError,
)

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_CHAR_TO_CELL = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}
_CELL_TO_CHAR = {FREE: ".", OCCUPIED: "#", UNKNOWN: "?"}

FAR_CLEARANCE = 1e9


@dataclass
class OccupancyGrid:
    """Grid of cells indexed [iy, ix]; world x grows with ix, y with iy."""

    resolution: float
    origin: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(self.origin, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.uint8)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin.copy(), self.cells.copy())

    def same_geometry(self, other: "OccupancyGrid") -> bool:
        return (
            self.cells.shape == other.cells.shape
            and self.resolution == other.resolution
            and np.allclose(self.origin, other.origin)
        )

    def world_to_cell(self, point):
        p = np.asarray(point, dtype=float)
        ij = np.floor((p - self.origin) / self.resolution).astype(int)
        return int(ij[0]), int(ij[1])  # (ix, iy)

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return self.origin + self.resolution * (np.array([ix, iy]) + 0.5)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def cell_state(self, ix: int, iy: int) -> int:
        return int(self.cells[iy, ix])

    def fraction_known(self) -> float:
        return float(np.mean(self.cells != UNKNOWN))


def load_world(text: str) -> OccupancyGrid:
    """Parse the world text format (header + character grid)."""
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise WorldFormatError("empty world text")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "res" or header[2] != "origin":
        raise WorldFormatError(
            'expected header "res <m> origin <x> <y>", got ' + lines[0]
        )
    try:
        res = float(header[1])
        origin = np.array([float(header[3]), float(header[4])])
    except ValueError as exc:
        raise WorldFormatError("non-numeric header values") from exc
    rows = lines[1:]
    if not rows:
        raise WorldFormatError("world has no grid rows")
    width = len(rows[0])
    cells = np.empty((len(rows), width), dtype=np.uint8)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise WorldFormatError(f"ragged row {i}: {len(row)} != {width}")
        for j, ch in enumerate(row):
            if ch not in _CHAR_TO_CELL:
                raise WorldFormatError(f"unknown cell character {ch!r}")
            # first text row is the top of the map
            cells[len(rows) - 1 - i, j] = _CHAR_TO_CELL[ch]
    return OccupancyGrid(res, origin, cells)


def dump_world(grid: OccupancyGrid) -> str:
    lines = [f"res {grid.resolution:g} origin {grid.origin[0]:g} {grid.origin[1]:g}"]
    for iy in range(grid.height - 1, -1, -1):
        lines.append("".join(_CELL_TO_CHAR[int(c)] for c in grid.cells[iy]))
    return "\n".join(lines) + "\n"


@dataclass
class LidarScan:
    """One simulated scan; beam angles are world-frame, uniform on [-pi, pi)."""

    pose_position: np.ndarray
    pose_heading: float
    max_range: float
    angles: np.ndarray
    ranges: np.ndarray
    hit_mask: np.ndarray
    hit_points: np.ndarray  # (n, 2); rows valid where hit_mask
    cells_free: np.ndarray = field(repr=False, default=None)  # (k, 2) int (ix, iy)
    cells_hit: np.ndarray = field(repr=False, default=None)

    @property
    def beams(self):
        """Per-beam records {angle, range, hit} (hit is None at max range)."""
        return [
            {
                "angle": float(a),
                "range": float(r),
                "hit": self.hit_points[i].copy() if self.hit_mask[i] else None,
            }
            for i, (a, r) in enumerate(zip(self.angles, self.ranges))
        ]


def lidar_scan(
    truth: OccupancyGrid, pose, n_beams: int = 360, max_range: float = 5.0
) -> LidarScan:
    """Ray-march beams by exact grid traversal to the first occupied cell.

    Hit points lie on the entering face of the occupied cell.  Beams leaving
    the grid end at max_range with no hit.
    """
    position = np.asarray(pose.position, dtype=float)
    heading = float(pose.heading)
    ix0, iy0 = truth.world_to_cell(position)
    if not truth.in_bounds(ix0, iy0):
        raise PoseOutOfBounds(f"pose cell ({ix0}, {iy0}) outside grid")
    if truth.cell_state(ix0, iy0) != FREE:
        raise PoseInObstacle(f"pose cell ({ix0}, {iy0}) is not free")

    res = truth.resolution
    angles = -np.pi + 2.0 * np.pi * np.arange(n_beams) / n_beams
    dx = np.cos(angles)
    dy = np.sin(angles)
    ix = np.full(n_beams, ix0, dtype=int)
    iy = np.full(n_beams, iy0, dtype=int)
    step_x = np.where(dx > 0, 1, np.where(dx < 0, -1, 0))
    step_y = np.where(dy > 0, 1, np.where(dy < 0, -1, 0))
    with np.errstate(divide="ignore"):
        t_delta_x = np.where(dx != 0.0, res / np.abs(dx), np.inf)
        t_delta_y = np.where(dy != 0.0, res / np.abs(dy), np.inf)
    next_vline = truth.origin[0] + (ix0 + (step_x > 0)) * res
    next_hline = truth.origin[1] + (iy0 + (step_y > 0)) * res
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max_x = np.where(dx != 0.0, (next_vline - position[0]) / dx, np.inf)
        t_max_y = np.where(dy != 0.0, (next_hline - position[1]) / dy, np.inf)

    ranges = np.full(n_beams, max_range)
    hit_mask = np.zeros(n_beams, dtype=bool)
    active = np.ones(n_beams, dtype=bool)
    free_cells = {(ix0, iy0)}
    hit_cells = set()

    max_iter = 4 * (truth.width + truth.height)
    for _ in range(max_iter):
        if not np.any(active):
            break
        use_x = active & (t_max_x <= t_max_y)
        use_y = active & ~use_x
        t_enter = np.where(use_x, t_max_x, t_max_y)
        done = active & (t_enter >= max_range)
        active &= ~done
        use_x &= active
        use_y &= active
        ix = ix + np.where(use_x, step_x, 0)
        iy = iy + np.where(use_y, step_y, 0)
        t_max_x = t_max_x + np.where(use_x, t_delta_x, 0.0)
        t_max_y = t_max_y + np.where(use_y, t_delta_y, 0.0)
        out = active & ~(
            (ix >= 0) & (ix < truth.width) & (iy >= 0) & (iy < truth.height)
        )
        active &= ~out
        idx = np.flatnonzero(active)
        if idx.size == 0:
            continue
        states = truth.cells[iy[idx], ix[idx]]
        occ = states != FREE
        hit_idx = idx[occ]
        if hit_idx.size:
            hit_mask[hit_idx] = True
            ranges[hit_idx] = t_enter[hit_idx]
            for b in hit_idx:
                hit_cells.add((int(ix[b]), int(iy[b])))
            active[hit_idx] = False
        for b in idx[~occ]:
            free_cells.add((int(ix[b]), int(iy[b])))

    hit_points = position + ranges[:, None] * np.stack([dx, dy], axis=1)
    return LidarScan(
        pose_position=position,
        pose_heading=heading,
        max_range=max_range,
        angles=angles,
        ranges=ranges,
        hit_mask=hit_mask,
        hit_points=hit_points,
        cells_free=np.array(sorted(free_cells), dtype=int).reshape(-1, 2),
        cells_hit=np.array(sorted(hit_cells), dtype=int).reshape(-1, 2),
    )


def update_map(known: OccupancyGrid, scan: LidarScan) -> OccupancyGrid:
    """Mark traversed cells free and hit cells occupied; unknown-only updates
    (known cells are never reverted), so repeated identical scans are
    idempotent."""
    out = known.copy()
    if scan.cells_free.size:
        fx, fy = scan.cells_free[:, 0], scan.cells_free[:, 1]
        if np.any(fx < 0) or np.any(fx >= out.width) or np.any(fy < 0) or np.any(
            fy >= out.height
        ):
            raise WorldFormatError("scan geometry does not match map")
        sel = out.cells[fy, fx] == UNKNOWN
        out.cells[fy[sel], fx[sel]] = FREE
    if scan.cells_hit.size:
        hx, hy = scan.cells_hit[:, 0], scan.cells_hit[:, 1]
        sel = out.cells[hy, hx] == UNKNOWN
        out.cells[hy[sel], hx[sel]] = OCCUPIED
    return out


def frontier_cells(known: OccupancyGrid):
    """Free cells 4-adjacent to at least one unknown cell, ordered by index."""
    free = known.cells == FREE
    unknown = known.cells == UNKNOWN
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    ys, xs = np.nonzero(free & near_unknown)
    return [(int(x), int(y)) for y, x in zip(ys, xs)]


@dataclass
class ClearanceField:
    """Per-cell Euclidean clearance to the nearest unsafe cell center [m]."""

    values: np.ndarray
    resolution: float
    method: str = "exact_edt"

    def at_cell(self, ix: int, iy: int) -> float:
        return float(self.values[iy, ix])

    def at_point(self, grid: OccupancyGrid, point) -> float:
        ix, iy = grid.world_to_cell(point)
        if not grid.in_bounds(ix, iy):
            return 0.0
        return self.at_cell(ix, iy)


def distance_transform(
    known: OccupancyGrid, unknown_unsafe: bool = True
) -> ClearanceField:
    """Exact Euclidean distance transform.

    With unknown_unsafe (the planning default) both occupied and unknown
    cells are at distance 0; otherwise only occupied cells are, which is the
    field frontier selection scores against.
    """
    unsafe = (known.cells != FREE) if unknown_unsafe else (known.cells == OCCUPIED)
    if not np.any(unsafe):
        values = np.full(known.cells.shape, FAR_CLEARANCE)
    else:
        values = ndimage.distance_transform_edt(~unsafe) * known.resolution
    return ClearanceField(values=values, resolution=known.resolution)


_NEIGHBORS = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, np.sqrt(2.0)),
    (1, -1, np.sqrt(2.0)),
    (-1, 1, np.sqrt(2.0)),
    (-1, -1, np.sqrt(2.0)),
]


def _dijkstra(known: OccupancyGrid, clearance: ClearanceField, start, w: float):
    """Single-source Dijkstra over 8-connected free cells.

    Edge cost = step length x (1 + w / max(clearance(dest), resolution)).
    Returns (cost, length, parent) dicts keyed by (ix, iy).
    """
    res = known.resolution
    free = known.cells == FREE
    sx, sy = start
    if not (known.in_bounds(sx, sy) and free[sy, sx]):
        raise PathUnreachable(f"start cell {start} is not free")
    cost = {start: 0.0}
    length = {start: 0.0}
    parent = {start: None}
    heap = [(0.0, start)]
    while heap:
        c, (cx, cy) = heapq.heappop(heap)
        if c > cost[(cx, cy)]:
            continue
        for dx, dy, step in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not known.in_bounds(nx, ny) or not free[ny, nx]:
                continue
            if dx != 0 and dy != 0:
                # forbid diagonal corner cutting
                if not (free[cy, nx] and free[ny, cx]):
                    continue
            step_len = step * res
            clear = max(clearance.at_cell(nx, ny), res)
            nc = c + step_len * (1.0 + w / clear)
            key = (nx, ny)
            if nc < cost.get(key, np.inf) - 1e-15:
                cost[key] = nc
                length[key] = length[(cx, cy)] + step_len
                parent[key] = (cx, cy)
                heapq.heappush(heap, (nc, key))
    return cost, length, parent


def _segment_stats(grid, clearance, a, b, w: float):
    """(min clearance, weighted cost) of a straight segment, sampled at half
    the cell size."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    seg_len = float(np.linalg.norm(b - a))
    n = max(int(np.ceil(seg_len / (0.5 * grid.resolution))), 1)
    min_clear = np.inf
    cost = 0.0
    prev = a
    for i in range(1, n + 1):
        p = a + (b - a) * (i / n)
        mid = 0.5 * (prev + p)
        ix, iy = grid.world_to_cell(mid)
        if not (grid.in_bounds(ix, iy) and grid.cell_state(ix, iy) == FREE):
            return -np.inf, np.inf
        clear = clearance.at_cell(ix, iy)
        min_clear = min(min_clear, clear)
        step = float(np.linalg.norm(p - prev))
        cost += step * (1.0 + w / max(clear, grid.resolution))
        prev = p
    return min_clear, cost


@dataclass
class PlannedPath:
    points: np.ndarray  # (k, 2) world coordinates after smoothing
    cells: list  # Dijkstra-optimal cell path
    cost: float  # Dijkstra-optimal weighted cost (pre-smoothing)
    length: float  # pre-smoothing arc length
    min_clearance: float


def plan_path(
    known: OccupancyGrid,
    start,
    goal_cell,
    clearance: ClearanceField = None,
    w: float = 1.0,
    smooth_clearance: float = None,
):
    """Clearance-weighted Dijkstra path with greedy shortcut smoothing.

    Shortcuts are accepted only when they do not increase the weighted cost
    and do not reduce the minimum clearance below
    min(smooth_clearance, clearance of the replaced subpath).
    """
    if clearance is None:
        clearance = distance_transform(known)
    gx, gy = goal_cell
    if not (known.in_bounds(gx, gy) and known.cell_state(gx, gy) == FREE):
        raise PathUnreachable(f"goal cell {goal_cell} is not free")
    cost, length, parent = _dijkstra(known, clearance, tuple(start), w)
    if tuple(goal_cell) not in cost:
        raise PathUnreachable(f"no free-cell path to {goal_cell}")
    cells = []
    cur = tuple(goal_cell)
    while cur is not None:
        cells.append(cur)
        cur = parent[cur]
    cells.reverse()
    points = [known.cell_center(ix, iy) for ix, iy in cells]
    clear_at = [clearance.at_cell(ix, iy) for ix, iy in cells]

    if smooth_clearance is None:
        smooth_clearance = known.resolution
    smoothed = [points[0]]
    idx = 0
    while idx < len(points) - 1:
        best = idx + 1
        for j in range(len(points) - 1, idx + 1, -1):
            sub_clear = min(clear_at[idx : j + 1])
            threshold = min(smooth_clearance, sub_clear)
            sub_cost = sum(
                _segment_stats(known, clearance, points[i], points[i + 1], w)[1]
                for i in range(idx, j)
            )
            seg_clear, seg_cost = _segment_stats(
                known, clearance, points[idx], points[j], w
            )
            if seg_clear >= threshold - 1e-12 and seg_cost <= sub_cost + 1e-9:
                best = j
                break
        smoothed.append(points[best])
        idx = best

    return PlannedPath(
        points=np.array(smoothed),
        cells=cells,
        cost=float(cost[tuple(goal_cell)]),
        length=float(length[tuple(goal_cell)]),
        min_clearance=float(min(clear_at)),
    )


def select_frontier(
    known: OccupancyGrid,
    robot_cell,
    clearance: ClearanceField = None,
    w: float = 1.0,
):
    """Reachable frontier cell farthest from occupied cells.

    Frontier cells border unknown space by definition, so they are scored
    by distance to occupied cells only; reachability and travel use the
    planning clearance.  Ties broken by smallest path length, then lowest
    cell index.  Returns None when exploration is complete.
    """
    if clearance is None:
        clearance = distance_transform(known)
    frontiers = frontier_cells(known)
    if not frontiers:
        return None
    score = distance_transform(known, unknown_unsafe=False)
    cost, length, _ = _dijkstra(known, clearance, tuple(robot_cell), w)
    best = None
    best_key = None
    for ix, iy in frontiers:
        if (ix, iy) not in cost:
            continue
        key = (-score.at_cell(ix, iy), length[(ix, iy)], iy * known.width + ix)
        if best_key is None or key < best_key:
            best, best_key = (ix, iy), key
    return best
