"""Scenario-driven command line front end.

Usage: cbcsim corridor|follow|explore|lor <scenario.yaml> --out <dir>
                [--sweep key=v1,v2,...]

Scenario files are YAML; the key schema is documented in the README.  Every
command is deterministic given the scenario file, writes a manifest.json
describing its outputs, and re-parses everything it wrote as a self check.
Exit codes: 0 success, 2 validation error, 3 runtime violation surfaced.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path as FsPath

import numpy as np
import yaml

from . import fileio, world as wd
from .barriers import (
    AffineBarrier,
    BarrierFamily,
    PowerDistanceBarrier,
    ProductBarrier,
    SoftMinBarrier,
)
from .control import LinearPlant, UnicyclePose, output_regulation_control
from .corridor import CorridorParams, bc_full, output_goal_barriers, trust_region_contains
from .errors import (
    ExplorationStuck,
    GoalLost,
    NotHurwitz,
    PreconditionViolated,
    ScenarioError,
    UnsafeAnchor,
    WorldFormatError,
)
from .geom import clip_corridor_2d, default_bbox
from .pathfollow import ExploreConfig, Path, explore, follow_path
from .sim import StepDecision, Trajectory, run_closed_loop

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_VIOLATION = 3


class OutputSet:
    """Collects written files plus a parser for the self-check pass."""

    def __init__(self, out_dir: FsPath):
        self.out_dir = out_dir
        self.entries = []

    def write(self, name: str, text: str, role: str, parser=None):
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.entries.append({"file": name, "role": role, "_parser": parser})
        return path

    def self_check(self):
        for entry in self.entries:
            parser = entry.pop("_parser", None)
            if parser is not None:
                parser((self.out_dir / entry["file"]).read_text())

    def manifest(self, command: str, scenario: dict):
        record = {
            "command": command,
            "scenario": scenario,
            "outputs": [
                {k: v for k, v in e.items() if not k.startswith("_")}
                for e in self.entries
            ],
        }
        (self.out_dir / "manifest.json").write_text(fileio.dump_summary(record))


def _require(cond, message):
    if not cond:
        raise ScenarioError(message)


def load_scenario(path: FsPath) -> dict:
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario parse error: {exc}")
    _require(isinstance(data, dict), "scenario must be a mapping")
    return data


def _params(scn: dict) -> CorridorParams:
    ctl = scn.get("control", {})
    _require(isinstance(ctl, dict), "control must be a mapping")
    kappa = float(ctl.get("kappa", 1.0))
    alpha = float(ctl.get("alpha", kappa))
    eps = float(ctl.get("epsilon", 0.0))
    try:
        return CorridorParams(kappa=kappa, alpha_rate=alpha, epsilon=eps)
    except ValueError as exc:
        raise ScenarioError(str(exc))


def _obstacles(scn: dict, p_override: float = None):
    obs = scn.get("obstacles", [])
    _require(isinstance(obs, list), "obstacles must be a list")
    members = []
    for rec in obs:
        _require(
            isinstance(rec, dict) and "q" in rec and "r" in rec,
            "each obstacle needs q and r",
        )
        p = float(p_override if p_override is not None else rec.get("p", 2.0))
        try:
            members.append(
                PowerDistanceBarrier(
                    q=np.asarray(rec["q"], dtype=float), r=float(rec["r"]), p=p
                )
            )
        except ValueError as exc:
            raise ScenarioError(str(exc))
    return members


def _compose(members, scn: dict):
    comp = scn.get("composition")
    fam = BarrierFamily(members)
    if comp is None:
        return fam
    kind = comp.get("type")
    if kind == "softmin":
        return BarrierFamily([SoftMinBarrier(fam, float(comp["lambda"]))])
    if kind == "product":
        return BarrierFamily([ProductBarrier(fam)])
    raise ScenarioError(f"unknown composition type {kind!r}")


def _state(scn: dict, kind: str) -> np.ndarray:
    state = scn.get("state")
    _require(state is not None, "scenario needs a state")
    state = np.asarray(state, dtype=float)
    if kind == "unicycle":
        _require(state.shape == (3,), "unicycle state is [x, y, theta]")
    return state


def _bbox(scn: dict, anchor):
    return default_bbox(anchor, float(scn.get("bbox_half_width", 4.0)))


def _slug(value) -> str:
    return f"{value:g}".replace(".", "p").replace("-", "m")


def cmd_corridor(scn: dict, out: OutputSet):
    params = _params(scn)
    x = _state(scn, "full")[:2]
    bbox = _bbox(scn, x)
    if not scn.get("obstacles"):
        xmin, ymin, xmax, ymax = bbox
        corners = [[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]]
        out.write(
            "corridor_empty.poly",
            fileio.dump_polygons([corners]),
            "corridor_polygon",
            fileio.parse_polygons,
        )
        return EXIT_OK

    sweep = scn.get("sweep", {})
    p_values = [float(v) for v in sweep.get("p", [None])] if sweep.get("p") else [None]
    ratios = [float(v) for v in sweep.get("alpha_ratio", [1.0])]
    for p in p_values:
        fam = _compose(_obstacles(scn, p), scn)
        for ratio in ratios:
            cp = CorridorParams(
                kappa=params.kappa,
                alpha_rate=ratio * params.kappa,
                epsilon=params.epsilon,
            )
            corridor = bc_full(fam, x, cp)
            poly = clip_corridor_2d(corridor, bbox)
            tag = f"p{_slug(p)}_" if p is not None else ""
            name = f"corridor_{tag}a{_slug(ratio)}"
            out.write(
                name + ".poly",
                fileio.dump_polygons([poly]),
                "corridor_polygon",
                fileio.parse_polygons,
            )
            out.write(
                name + ".log",
                fileio.dump_corridor(corridor, cp),
                "corridor_log",
                fileio.parse_corridor,
            )

    lambdas = scn.get("lambdas")
    if lambdas:
        base = BarrierFamily(_obstacles(scn))
        exact = clip_corridor_2d(bc_full(base, x, params), bbox)
        out.write(
            "corridor_exact.poly",
            fileio.dump_polygons([exact]),
            "corridor_polygon",
            fileio.parse_polygons,
        )
        for lam in lambdas:
            fam = BarrierFamily([SoftMinBarrier(base, float(lam))])
            poly = clip_corridor_2d(bc_full(fam, x, params), bbox)
            out.write(
                f"corridor_softmin_l{_slug(float(lam))}.poly",
                fileio.dump_polygons([poly]),
                "corridor_polygon",
                fileio.parse_polygons,
            )
    return EXIT_OK


def _corridor_polys(kind, traj: Trajectory, fam, params, bbox, max_polys=60):
    stride = max(1, len(traj.samples) // max_polys)
    polys = []
    for s in traj.samples[::stride]:
        pos = s.state[:2] if kind == "unicycle" else s.state
        corridor = bc_full(fam, pos, params, allow_unsafe=True)
        poly = clip_corridor_2d(corridor, bbox)
        if not poly.empty:
            polys.append(poly)
    return polys


def _goal_unsafe_count(traj: Trajectory, fam) -> int:
    count = 0
    for s in traj.samples:
        if np.all(np.isfinite(s.goal)) and fam.min_value(s.goal) < 0.0:
            count += 1
    return count


def cmd_follow(scn: dict, out: OutputSet):
    kind = scn.get("kind", "full")
    _require(kind in ("full", "unicycle"), f"unknown kind {kind!r}")
    params = _params(scn)
    fam = _compose(_obstacles(scn), scn)
    _require(scn.get("path") is not None, "follow scenario needs a path")
    path = Path(np.asarray(scn["path"], dtype=float))
    x0 = _state(scn, kind)
    dt = float(scn.get("dt", 1e-3))
    duration = float(scn.get("duration", 30.0))
    bbox = _bbox(scn, path.point(0.5))

    check = not bool(scn.get("allow_unsafe_path", False))
    status = EXIT_OK
    summary = {}
    try:
        traj = follow_path(
            kind, path, fam, params, x0, dt=dt, T_max=duration,
            check_preconditions=check,
        )
    except PreconditionViolated as exc:
        raise ScenarioError(str(exc))
    except GoalLost as exc:
        summary["goal_lost"] = str(exc)
        traj = None
        status = EXIT_VIOLATION
    if traj is not None:
        out.write(
            "trajectory.csv",
            fileio.dump_trajectory_csv(traj),
            "trajectory",
            fileio.parse_trajectory_csv,
        )
        out.write(
            "corridors.poly",
            fileio.dump_polygons(_corridor_polys(kind, traj, fam, params, bbox)),
            "corridor_polygons",
            fileio.parse_polygons,
        )
        summary.update(
            {
                "steps": len(traj.samples),
                "min_barrier": traj.min_barrier(),
                "violated": traj.violated,
                "goal_unsafe_count": _goal_unsafe_count(traj, fam),
                "final_s_star": traj.samples[-1].s_star,
            }
        )
        if traj.violated:
            status = EXIT_VIOLATION
    out.write(
        "path.poly", fileio.dump_polyline(path.waypoints), "path", fileio.parse_polygons
    )

    comp = scn.get("comparison")
    if comp:
        ratio = float(comp.get("alpha_ratio", 3.0))
        cp = CorridorParams(
            kappa=params.kappa, alpha_rate=ratio * params.kappa, epsilon=params.epsilon
        )
        try:
            ctraj = follow_path(
                kind, path, fam, cp, x0, dt=dt, T_max=duration,
                check_preconditions=False,
            )
        except GoalLost as exc:
            summary["comparison_goal_lost"] = str(exc)
            ctraj = None
        if ctraj is not None:
            out.write(
                "trajectory_compare.csv",
                fileio.dump_trajectory_csv(ctraj),
                "trajectory_compare",
                fileio.parse_trajectory_csv,
            )
            summary["comparison"] = {
                "alpha_ratio": ratio,
                "min_barrier": ctraj.min_barrier(),
                "violated": ctraj.violated,
                "goal_unsafe_count": _goal_unsafe_count(ctraj, fam),
            }
    out.write(
        "summary.json", fileio.dump_summary(summary), "summary", fileio.parse_summary
    )
    return status


def _merge_trajectories(trajs):
    merged = Trajectory(kind=trajs[0].kind, dt=trajs[0].dt)
    offset = 0.0
    for traj in trajs:
        start = 1 if merged.samples and traj.samples else 0
        for s in traj.samples[start:]:
            s2 = copy.copy(s)
            s2.t = offset + s.t
            merged.samples.append(s2)
        if traj.samples:
            offset += traj.samples[-1].t
    return merged


def cmd_explore(scn: dict, out: OutputSet, scenario_dir: FsPath):
    _require(scn.get("world") is not None, "explore scenario needs a world file")
    world_path = scenario_dir / scn["world"]
    try:
        truth = wd.load_world(world_path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"world file not found: {world_path}")
    except WorldFormatError as exc:
        raise ScenarioError(str(exc))
    params = _params(scn)
    ex = scn.get("explore", {})
    kind = scn.get("kind", "unicycle")
    cfg = ExploreConfig(
        params=params,
        kind=kind,
        n_beams=int(ex.get("n_beams", 360)),
        max_range=float(ex.get("max_range", 4.0)),
        obstacle_radius=float(ex.get("obstacle_radius", 0.1)),
        dt=float(scn.get("dt", 5e-3)),
        scan_interval=float(ex.get("scan_interval", 0.5)),
        cycle_T_max=float(ex.get("cycle_T_max", 60.0)),
        max_cycles=int(ex.get("max_cycles", 200)),
        clearance_weight=float(ex.get("clearance_weight", 0.5)),
        seed=int(scn.get("seed", 0)),
    )
    x0 = _state(scn, kind)
    pose = UnicyclePose(position=x0[:2], heading=x0[2] if kind == "unicycle" else 0.0)

    status = EXIT_OK
    try:
        log = explore(truth, pose, cfg)
    except PreconditionViolated as exc:
        raise ScenarioError(str(exc))
    except ExplorationStuck as exc:
        log = exc.log
        status = EXIT_VIOLATION
    for rec in log.cycles:
        tag = f"cycle_{rec.index:03d}"
        out.write(
            f"{tag}_map.world", wd.dump_world(rec.known), "map", wd.load_world
        )
        if rec.path is not None:
            out.write(
                f"{tag}_path.poly",
                fileio.dump_polyline(rec.path.waypoints),
                "path",
                fileio.parse_polygons,
            )
        if rec.corridor is not None:
            bbox = _bbox(scn, rec.start_state[:2])
            poly = clip_corridor_2d(rec.corridor, bbox)
            if not poly.empty:
                out.write(
                    f"{tag}_corridor.poly",
                    fileio.dump_polygons([poly]),
                    "corridor_polygon",
                    fileio.parse_polygons,
                )
        if rec.trajectories:
            out.write(
                f"{tag}_traj.csv",
                fileio.dump_trajectory_csv(_merge_trajectories(rec.trajectories)),
                "trajectory",
                fileio.parse_trajectory_csv,
            )
    out.write("final_map.world", wd.dump_world(log.known), "map", wd.load_world)
    summary = {
        "cycles": log.n_cycles,
        "coverage": log.coverage,
        "min_barrier": log.min_barrier,
        "wall_time": log.wall_time,
        "stuck": log.stuck,
    }
    out.write(
        "summary.json", fileio.dump_summary(summary), "summary", fileio.parse_summary
    )
    if log.min_barrier < -1e-6:
        status = EXIT_VIOLATION
    return status


def cmd_lor(scn: dict, out: OutputSet):
    plant_cfg = scn.get("plant")
    _require(plant_cfg is not None, "lor scenario needs plant matrices")
    try:
        A = np.asarray(plant_cfg["A"], dtype=float)
        B = np.asarray(plant_cfg["B"], dtype=float)
        C = np.asarray(plant_cfg["C"], dtype=float)
        K = np.asarray(plant_cfg["K"], dtype=float)
    except KeyError as exc:
        raise ScenarioError(f"plant config missing {exc}")
    try:
        plant = LinearPlant(A=A, B=B, C=C, K=K)
    except (NotHurwitz, Exception) as exc:
        if isinstance(exc, (NotHurwitz, ValueError)):
            raise ScenarioError(str(exc))
        raise

    bars = scn.get("output_barriers", [])
    _require(bool(bars), "lor scenario needs output_barriers")
    members = []
    for rec in bars:
        a_y = np.asarray(rec["a"], dtype=float)
        members.append(AffineBarrier(a=C.T @ a_y, b=float(rec["b"])))
    fam = BarrierFamily(members)
    x0 = np.asarray(scn["state"], dtype=float)
    if fam.min_value(x0) < 0.0:
        raise ScenarioError("initial state is unsafe")
    params = _params(scn)
    dt = float(scn.get("dt", 1e-3))
    duration = float(scn.get("duration", 10.0))
    candidates = [np.atleast_1d(np.asarray(y, dtype=float))
                  for y in scn.get("y_candidates", [])]
    _require(bool(candidates), "lor scenario needs y_candidates")

    status = EXIT_OK
    records = []
    for i, y_star in enumerate(candidates):
        gvals = output_goal_barriers(
            fam, x0, A, B, K, plant.X, params.alpha_rate, y_star
        )
        member = bool(np.all(gvals >= 0.0))
        in_tr = trust_region_contains(
            fam, x0, A, B, K, plant.X, params.alpha_rate, y_star
        )
        accepted = member and bool(in_tr)
        rec = {
            "y_star": y_star.tolist(),
            "corridor_member": member,
            "trust_region_member": bool(in_tr),
            "accepted": accepted,
        }
        if accepted:
            def step_fn(t, state, y=y_star):
                u = output_regulation_control(state, y, plant)
                return StepDecision(u, goal=plant.X @ y)

            traj = run_closed_loop(
                "lor", step_fn, fam, x0, duration, dt=dt, plant=plant
            )
            name = f"lor_{i:02d}.csv"
            out.write(
                name,
                fileio.dump_trajectory_csv(traj),
                "trajectory",
                fileio.parse_trajectory_csv,
            )
            rec["trajectory"] = name
            rec["min_barrier"] = traj.min_barrier()
            rec["violated"] = traj.violated
            if traj.violated:
                status = EXIT_VIOLATION
        records.append(rec)
    out.write(
        "summary.json",
        fileio.dump_summary({"candidates": records}),
        "summary",
        fileio.parse_summary,
    )
    return status


def _apply_sweep_key(scn: dict, dotted: str, value):
    node = scn
    keys = dotted.split(".")
    for k in keys[:-1]:
        _require(isinstance(node.get(k), dict), f"sweep key {dotted!r} not found")
        node = node[k]
    node[keys[-1]] = value


def _parse_sweep(arg: str):
    _require("=" in arg, "--sweep expects key=v1,v2,...")
    key, vals = arg.split("=", 1)
    parsed = []
    for v in vals.split(","):
        try:
            parsed.append(float(v))
        except ValueError:
            parsed.append(v)
    return key, parsed


def _run_one(command: str, scn: dict, out_dir: FsPath, scenario_dir: FsPath) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    out = OutputSet(out_dir)
    if command == "corridor":
        status = cmd_corridor(scn, out)
    elif command == "follow":
        status = cmd_follow(scn, out)
    elif command == "explore":
        status = cmd_explore(scn, out, scenario_dir)
    else:
        status = cmd_lor(scn, out)
    out.self_check()
    out.manifest(command, scn)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cbcsim", description="Control barrier corridor simulator"
    )
    parser.add_argument("command", choices=["corridor", "follow", "explore", "lor"])
    parser.add_argument("scenario", type=FsPath)
    parser.add_argument("--out", type=FsPath, required=True)
    parser.add_argument("--sweep", default=None, help="key=v1,v2,... fan-out")
    args = parser.parse_args(argv)

    try:
        scn = load_scenario(args.scenario)
        if args.sweep:
            key, values = _parse_sweep(args.sweep)
            status = EXIT_OK
            for v in values:
                variant = copy.deepcopy(scn)
                _apply_sweep_key(variant, key, v)
                sub = args.out / f"{key.replace('.', '_')}_{_slug(v) if isinstance(v, float) else v}"
                status = max(
                    status, _run_one(args.command, variant, sub, args.scenario.parent)
                )
            return status
        return _run_one(args.command, scn, args.out, args.scenario.parent)
    except (ScenarioError, UnsafeAnchor) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GoalLost, ExplorationStuck) as exc:
        print(f"runtime: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
