import json
from pathlib import Path

import numpy as np
import pytest

from cbcsim import fileio
from cbcsim.cli import main
from cbcsim.geom import Corridor, Halfspace
from cbcsim.sim import Sample, Trajectory

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(command, scenario, out, *extra):
    return main([command, str(SCENARIOS / scenario), "--out", str(out), *extra])


def tree_bytes(root):
    return {
        p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_polygon_dump_roundtrip():
    polys = [
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
        np.array([[2.123456789, -3.0], [4.0, 5.0], [0.0, 1.0], [-1.0, 0.5]]),
    ]
    text = fileio.dump_polygons(polys)
    back = fileio.parse_polygons(text)
    assert len(back) == 2
    for a, b in zip(polys, back):
        np.testing.assert_allclose(a, b, rtol=1e-8)
    # 9 significant digits, one "x y" pair per line
    assert text.splitlines()[0] == "0 0"
    assert "2.12345679 -3" in text


def test_corridor_log_roundtrip():
    cor = Corridor(
        np.array([0.5, -0.25]),
        (
            Halfspace(np.array([-1.0, 0.0]), -1.0),
            Halfspace(np.array([0.25, 1.5]), 0.125),
        ),
        kind="full",
        unsafe_anchor=False,
    )
    back = fileio.parse_corridor(fileio.dump_corridor(cor))
    np.testing.assert_allclose(back.anchor, cor.anchor)
    assert back.kind == "full"
    for a, b in zip(back.halfspaces, cor.halfspaces):
        np.testing.assert_allclose(a.normal, b.normal)
        assert a.offset == pytest.approx(b.offset)


def test_trajectory_csv_roundtrip():
    traj = Trajectory(kind="full", dt=0.5)
    for k in range(3):
        traj.samples.append(
            Sample(
                t=0.5 * k,
                state=np.array([1.0 + k, -2.0]),
                control=np.array([0.25, 0.5]),
                h_values=np.array([0.1, 0.2, 0.3]),
                goal=np.array([3.0, 4.0]),
                goal_in_corridor=k != 1,
                s_star=None if k == 0 else 0.5 * k,
            )
        )
    text = fileio.dump_trajectory_csv(traj)
    assert text.splitlines()[0] == (
        "t,state_0,state_1,control_0,control_1,h_1,h_2,h_3,"
        "goal_0,goal_1,goal_in_corridor,s_star"
    )
    back = fileio.parse_trajectory_csv(text)
    assert len(back.samples) == 3
    assert back.dt == pytest.approx(0.5)
    for a, b in zip(back.samples, traj.samples):
        np.testing.assert_array_equal(a.state, b.state)
        np.testing.assert_array_equal(a.h_values, b.h_values)
        assert a.goal_in_corridor == b.goal_in_corridor
        assert a.s_star == b.s_star


def test_corridor_command_outputs_and_determinism(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run("corridor", "corridor_grid.yaml", out1) == 0
    assert run("corridor", "corridor_grid.yaml", out2) == 0
    files = tree_bytes(out1)
    assert len([p for p in files if p.suffix == ".poly"]) == 9  # 3 x 3 grid
    assert files == tree_bytes(out2)
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["command"] == "corridor"
    assert all((out1 / e["file"]).exists() for e in manifest["outputs"])


def test_softmin_command_outputs(tmp_path):
    assert run("corridor", "softmin.yaml", tmp_path) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert "corridor_exact.poly" in names
    assert {"corridor_softmin_l2.poly", "corridor_softmin_l10.poly",
            "corridor_softmin_l100.poly"} <= names


def test_follow_command_summary(tmp_path):
    assert run("follow", "follow.yaml", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["violated"] is False
    assert summary["goal_unsafe_count"] == 0
    assert summary["min_barrier"] > 0.0
    traj = fileio.parse_trajectory_csv((tmp_path / "trajectory.csv").read_text())
    assert traj.samples[-1].s_star == pytest.approx(1.0)


def test_lor_command_gates_on_trust_region(tmp_path):
    assert run("lor", "lor.yaml", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    by_y = {tuple(rec["y_star"]): rec for rec in summary["candidates"]}
    assert by_y[(3.0,)]["accepted"]  # X y* = x0 is always admissible
    assert not by_y[(6.0,)]["trust_region_member"]
    for rec in summary["candidates"]:
        if rec["accepted"]:
            assert rec["min_barrier"] >= -1e-6
            assert not rec["violated"]


def test_sweep_fans_out(tmp_path):
    code = run(
        "corridor", "softmin.yaml", tmp_path, "--sweep", "control.kappa=0.5,2.0"
    )
    assert code == 0
    subdirs = {p.name for p in tmp_path.iterdir() if p.is_dir()}
    assert subdirs == {"control_kappa_0p5", "control_kappa_2"}
    for sub in subdirs:
        assert (tmp_path / sub / "manifest.json").exists()


def test_validation_exit_code(tmp_path):
    missing = main(
        ["corridor", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]
    )
    assert missing == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("obstacles: [{q: [0, 0]}]\nstate: [0, 0]\n")
    assert main(["corridor", str(bad), "--out", str(tmp_path / "o2")]) == 2
