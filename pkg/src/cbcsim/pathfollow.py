"""Reference paths, corridor-based goal selection, path following, and the
scan-plan-follow exploration loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import world as wd
from .barriers import BarrierFamily, PowerDistanceBarrier
from .control import UnicyclePose, proportional_control, safe_unicycle_velocity
from .corridor import CorridorParams, bc_full
from .errors import ExplorationStuck, GoalLost, PreconditionViolated
from .geom import Corridor
from .sim import StepDecision, Trajectory, position_of, run_closed_loop

DEFAULT_GOAL_TOL = 1e-2


class Path:
    """Piecewise-linear path parameterized by normalized arc length."""

    def __init__(self, waypoints):
        pts = np.atleast_2d(np.asarray(waypoints, dtype=float))
        if pts.shape[0] < 2:
            raise ValueError("a path needs at least two waypoints")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        keep = np.concatenate([[True], seg > 0.0])
        pts = pts[keep]
        if pts.shape[0] < 2:
            raise ValueError("path has zero length")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self.waypoints = pts
        self.cumulative = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.cumulative[-1])

    def point(self, s: float) -> np.ndarray:
        """Evaluate p(s) for s in [0, 1] (clamped)."""
        target = np.clip(s, 0.0, 1.0) * self.length
        i = int(np.searchsorted(self.cumulative, target, side="right")) - 1
        i = min(max(i, 0), len(self.waypoints) - 2)
        seg_len = self.cumulative[i + 1] - self.cumulative[i]
        frac = (target - self.cumulative[i]) / seg_len
        return self.waypoints[i] + frac * (self.waypoints[i + 1] - self.waypoints[i])

    def sample(self, n_samples: int) -> np.ndarray:
        s = np.linspace(0.0, 1.0, n_samples)
        return np.array([self.point(si) for si in s])

    def default_samples(self, resolution: float = 0.05) -> int:
        return max(100, int(np.ceil(self.length / (0.25 * resolution))))


def select_path_goal(path: Path, corridor: Corridor, n_samples: int):
    """Farthest path sample inside the corridor.

    Membership is tested over all samples because the path may exit and
    re-enter the corridor.  Returns (s_star, point) or None.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    s = np.linspace(0.0, 1.0, n_samples)
    pts = np.array([path.point(si) for si in s])
    member = corridor.contains_many(pts)
    idx = np.flatnonzero(member)
    if idx.size == 0:
        return None
    k = int(idx[-1])
    return float(s[k]), pts[k]


def _check_path_safe(path: Path, fam: BarrierFamily, n_samples: int, margin: float):
    for p in path.sample(n_samples):
        if fam.min_value(p) <= margin:
            raise PreconditionViolated(
                f"path point {p} has barrier value <= {margin:g}"
            )


def follow_path(
    kind: str,
    path: Path,
    fam: BarrierFamily,
    params: CorridorParams,
    x0,
    dt: float = 1e-3,
    T_max: float = 30.0,
    n_samples: int = None,
    goal_tol: float = None,
    check_preconditions: bool = True,
    violation_tol: float = 1e-6,
) -> Trajectory:
    """Drive toward the farthest corridor-member path point, rebuilt every
    control step.

    Fully actuated systems use proportional control toward the selected
    goal; unicycles use the filtered safe velocity with goals drawn from
    the epsilon-tightened corridor.  Raises GoalLost if no path sample is
    a corridor member at some step.
    """
    if kind not in ("full", "unicycle"):
        raise ValueError(f"unsupported system kind {kind!r}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if n_samples is None:
        n_samples = path.default_samples()
    if goal_tol is None:
        goal_tol = 2.0 * params.epsilon if kind == "unicycle" else DEFAULT_GOAL_TOL
        goal_tol = max(goal_tol, DEFAULT_GOAL_TOL)
    margin = params.epsilon if kind == "unicycle" else 0.0
    if check_preconditions:
        _check_path_safe(path, fam, n_samples, margin)
        start_corridor = bc_full(fam, position_of(kind, x0), params)
        if select_path_goal(path, start_corridor, n_samples) is None:
            raise PreconditionViolated(
                "no path sample lies in the initial corridor"
            )

    endpoint = path.point(1.0)

    def step_fn(t, state):
        pos = position_of(kind, state)
        corridor = bc_full(fam, pos, params)
        picked = select_path_goal(path, corridor, n_samples)
        if picked is None:
            raise GoalLost(f"no path sample in the corridor at t={t:.6f}")
        s_star, goal = picked
        if kind == "full":
            u = proportional_control(pos, goal, params.kappa)
        else:
            pose = UnicyclePose(position=state[:2], heading=state[2])
            u = np.array(safe_unicycle_velocity(pose, goal, fam, params))
        return StepDecision(u, goal=goal, s_star=s_star)

    def stop_fn(state):
        return np.linalg.norm(position_of(kind, state) - endpoint) <= goal_tol

    return run_closed_loop(
        kind,
        step_fn,
        fam,
        x0,
        duration=T_max,
        dt=dt,
        stop_fn=stop_fn,
        violation_tol=violation_tol,
    )


@dataclass(frozen=True)
class ExploreConfig:
    """Tunables for the scan-plan-follow exploration loop."""

    params: CorridorParams
    kind: str = "unicycle"
    n_beams: int = 360
    max_range: float = 4.0
    obstacle_radius: float = 0.1
    obstacle_power: float = 1.0
    dt: float = 5e-3
    scan_interval: float = 0.5
    cycle_T_max: float = 60.0
    max_cycles: int = 200
    clearance_weight: float = 0.5
    goal_tol: float = None
    seed: int = 0


@dataclass
class CycleRecord:
    index: int
    start_state: np.ndarray
    known: wd.OccupancyGrid
    frontier: tuple
    planned: wd.PlannedPath
    path: Path
    trajectories: list = field(default_factory=list)
    corridor: Corridor = None
    new_cells: int = 0
    replanned: bool = False


@dataclass
class ExplorationLog:
    cycles: list
    known: wd.OccupancyGrid
    coverage: float
    min_barrier: float
    wall_time: float
    stuck: bool = False

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)


def _family_from_scan(scan: wd.LidarScan, cfg: ExploreConfig) -> BarrierFamily:
    """One power barrier per distinct lidar hit point."""
    hits = scan.hit_points[scan.hit_mask]
    if hits.shape[0] == 0:
        # no obstacle in range; a far dummy keeps the family non-empty
        far = scan.pose_position + np.array([2.0 * scan.max_range, 0.0])
        hits = far[None, :]
    keyed = np.round(hits / 1e-6) * 1e-6
    uniq = np.unique(keyed, axis=0)
    return BarrierFamily(
        [
            PowerDistanceBarrier(q=q, r=cfg.obstacle_radius, p=cfg.obstacle_power)
            for q in uniq
        ]
    )


def _reachable_free(truth: wd.OccupancyGrid, start_cell) -> int:
    """Count free cells 4-connected to the start cell."""
    free = truth.cells == wd.FREE
    seen = np.zeros_like(free)
    stack = [tuple(start_cell)]
    seen[start_cell[1], start_cell[0]] = True
    while stack:
        cx, cy = stack.pop()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = cx + dx, cy + dy
            if truth.in_bounds(nx, ny) and free[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                stack.append((nx, ny))
    return int(np.sum(seen))


def _path_still_valid(path: Path, known: wd.OccupancyGrid, fam, margin: float):
    for p in path.sample(max(50, path.default_samples(known.resolution) // 4)):
        ix, iy = known.world_to_cell(p)
        if not known.in_bounds(ix, iy) or known.cell_state(ix, iy) == wd.OCCUPIED:
            return False
        if fam.min_value(p) <= margin:
            return False
    return True


def explore(
    truth: wd.OccupancyGrid, start_pose: UnicyclePose, cfg: ExploreConfig
) -> ExplorationLog:
    """Frontier exploration: scan, map, pick a frontier, plan, follow, repeat.

    Per cycle the map snapshot, planned path, and trajectory segments are
    recorded.  Terminates when no frontier remains; raises ExplorationStuck
    after three consecutive cycles with zero newly known cells.
    """
    t_start = time.perf_counter()
    known = wd.OccupancyGrid(
        truth.resolution,
        truth.origin.copy(),
        np.full(truth.cells.shape, wd.UNKNOWN, dtype=np.uint8),
    )
    if cfg.kind == "unicycle":
        state = np.array([*start_pose.position, start_pose.heading])
    else:
        state = np.asarray(start_pose.position, dtype=float)
    start_cell = truth.world_to_cell(start_pose.position)
    cycles = []
    zero_progress = 0
    min_barrier = np.inf
    goal_tol = cfg.goal_tol
    if goal_tol is None:
        goal_tol = max(2.0 * cfg.params.epsilon, truth.resolution)

    def pose_of(s):
        heading = s[2] if cfg.kind == "unicycle" else 0.0
        return UnicyclePose(position=np.asarray(s[:2], dtype=float), heading=heading)

    for cycle_idx in range(cfg.max_cycles):
        known_before = int(np.sum(known.cells != wd.UNKNOWN))
        scan = wd.lidar_scan(truth, pose_of(state), cfg.n_beams, cfg.max_range)
        known = wd.update_map(known, scan)
        fam = _family_from_scan(scan, cfg)
        clearance = wd.distance_transform(known)
        frontier = wd.select_frontier(
            known, known.world_to_cell(state[:2]), clearance, cfg.clearance_weight
        )
        new_cells = int(np.sum(known.cells != wd.UNKNOWN)) - known_before
        if frontier is None:
            cycles.append(
                CycleRecord(
                    index=cycle_idx,
                    start_state=state.copy(),
                    known=known.copy(),
                    frontier=None,
                    planned=None,
                    path=None,
                    new_cells=new_cells,
                )
            )
            break

        planned = wd.plan_path(
            known,
            known.world_to_cell(state[:2]),
            frontier,
            clearance,
            cfg.clearance_weight,
            smooth_clearance=cfg.obstacle_radius + cfg.params.epsilon,
        )
        pts = planned.points
        if pts.shape[0] < 2 or np.allclose(pts[0], pts[-1]):
            # already at the frontier cell; nudge the path to the cell center
            pts = np.vstack([state[:2], known.cell_center(*frontier)])
        else:
            pts = np.vstack([state[:2], pts])
        path = Path(pts)
        record = CycleRecord(
            index=cycle_idx,
            start_state=state.copy(),
            known=known.copy(),
            frontier=frontier,
            planned=planned,
            path=path,
            corridor=bc_full(fam, state[:2], cfg.params, allow_unsafe=True),
        )
        cycles.append(record)

        elapsed = 0.0
        endpoint = path.point(1.0)
        margin = cfg.params.epsilon
        while elapsed < cfg.cycle_T_max:
            chunk = min(cfg.scan_interval, cfg.cycle_T_max - elapsed)
            try:
                traj = follow_path(
                    cfg.kind,
                    path,
                    fam,
                    cfg.params,
                    state,
                    dt=cfg.dt,
                    T_max=chunk,
                    goal_tol=goal_tol,
                    check_preconditions=False,
                )
            except GoalLost:
                record.replanned = True
                break
            record.trajectories.append(traj)
            min_barrier = min(min_barrier, traj.min_barrier())
            state = traj.final_state.copy()
            elapsed += traj.times()[-1]
            if np.linalg.norm(state[:2] - endpoint) <= goal_tol:
                break
            # refresh the map mid-path and replan if the path got invalidated
            scan = wd.lidar_scan(truth, pose_of(state), cfg.n_beams, cfg.max_range)
            known = wd.update_map(known, scan)
            fam = _family_from_scan(scan, cfg)
            if not _path_still_valid(path, known, fam, margin):
                record.replanned = True
                break

        new_cells = int(np.sum(known.cells != wd.UNKNOWN)) - known_before
        record.new_cells = new_cells
        zero_progress = zero_progress + 1 if new_cells == 0 else 0
        if zero_progress >= 3:
            log = _finish_log(
                cycles, known, truth, start_cell, min_barrier, t_start, stuck=True
            )
            raise ExplorationStuck(
                "three consecutive cycles with zero map progress", log=log
            )

    return _finish_log(cycles, known, truth, start_cell, min_barrier, t_start)


def _finish_log(cycles, known, truth, start_cell, min_barrier, t_start, stuck=False):
    reachable = _reachable_free(truth, start_cell)
    known_free = int(np.sum((known.cells == wd.FREE) & (truth.cells == wd.FREE)))
    coverage = known_free / reachable if reachable else 1.0
    return ExplorationLog(
        cycles=cycles,
        known=known,
        coverage=float(coverage),
        min_barrier=float(min_barrier) if np.isfinite(min_barrier) else 0.0,
        wall_time=time.perf_counter() - t_start,
        stuck=stuck,
    )
