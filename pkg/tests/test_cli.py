import numpy as np
import yaml

from nfswarm import output
from nfswarm.cli import main
from nfswarm.scenario import load_scenario

from test_scenario import SCENARIOS, doc


def write(tmp_path, d, name="s.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return str(p)


def test_simulate_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["simulate", str(SCENARIOS / "square.yaml"), "--out", str(out)])
    assert rc == 0
    assert sorted(p.name for p in out.iterdir()) == ["metrics.yaml", "scenario.yaml", "trace.csv", "trajectories.svg"]
    assert "min Fiedler value" in capsys.readouterr().out
    m = yaml.safe_load((out / "metrics.yaml").read_text())
    assert m["status"] == "converged"


def test_simulate_echoes_overrides(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(SCENARIOS / "line.yaml"), "--out", str(out), "--dt", "0.05", "--seed", "9"]) == 0
    echoed = load_scenario(out / "scenario.yaml")
    assert echoed.dt == 0.05 and echoed.seed == 9


def test_simulate_duration_zero(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(SCENARIOS / "rendezvous.yaml"), "--out", str(out), "--duration", "0"]) == 0
    assert len((out / "trace.csv").read_text().splitlines()) == 1 + 6


def test_simulate_invalid_delta2(tmp_path, capsys):
    path = write(tmp_path, doc(delta2=2.5))
    assert main(["simulate", path, "--out", str(tmp_path / "o")]) == 2
    assert "delta2" in capsys.readouterr().err


def test_simulate_missing_file(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.yaml")]) == 2


def test_simulate_bad_topology(tmp_path, capsys):
    path = write(tmp_path, doc(agents=[{"x": -2.0, "y": 0.0}, {"x": 2.0, "y": 0.0}]))
    assert main(["simulate", path, "--out", str(tmp_path / "o")]) == 2
    assert "spanning tree" in capsys.readouterr().err


def test_simulate_failed_run_exits_3(tmp_path):
    # an oversized speed gain makes the explicit step overshoot
    d = doc(agents=[{"x": -4.0, "y": 1.0, "heading": 0.0}, {"x": -3.0, "y": 1.0, "heading": 0.0}],
            duration=20.0, gains={"k_v": 50.0})
    assert main(["simulate", write(tmp_path, d), "--out", str(tmp_path / "o")]) == 3
    last = (tmp_path / "o" / "trace.csv").read_text().splitlines()[-1]
    assert "failed" in last.split(",")[-1]
    assert yaml.safe_load((tmp_path / "o" / "metrics.yaml").read_text())["status"] == "failed"


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", str(SCENARIOS / "hexagon.yaml"), "--out", str(out)]) == 0
    for name in ("trace.csv", "metrics.yaml", "trajectories.svg", "scenario.yaml"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_field_dipole(tmp_path):
    assert main(["field", str(SCENARIOS / "dipole.yaml"), "--grid", "101", "--out", str(tmp_path)]) == 0
    v = output.grid_values((tmp_path / "field.csv").read_text())
    assert v.shape == (101 * 101, 3)
    assert v[(v[:, 0] == 0) & (v[:, 1] == 0), 2] == [0.0]
    rim = np.isclose(np.hypot(v[:, 0], v[:, 1]), 5.0)
    assert np.all(v[rim, 2] == 1.0)
    assert np.all((v[:, 2] >= 0) & (v[:, 2] <= 1))


def test_field_grid_too_small(tmp_path):
    assert main(["field", str(SCENARIOS / "dipole.yaml"), "--grid", "1", "--out", str(tmp_path)]) == 2


def test_field_formation_freezes_others(tmp_path):
    assert main(["field", str(SCENARIOS / "square.yaml"), "--grid", "25", "--out", str(tmp_path)]) == 0
    v = output.grid_values((tmp_path / "field.csv").read_text())
    assert np.all((v[:, 2] >= 0) & (v[:, 2] <= 1))
    # agent 0 can reach its goal relative to the frozen agents, so the grid dips well below 1
    assert v[:, 2].min() < 0.2


def test_gradcheck_pass_and_reproducible(capsys):
    assert main(["gradcheck", "--trials", "50", "--seed", "3"]) == 0
    first = capsys.readouterr().out
    assert main(["gradcheck", "--trials", "50", "--seed", "3"]) == 0
    assert capsys.readouterr().out == first
    assert "PASS" in first


def test_gradcheck_zero_trials():
    assert main(["gradcheck", "--trials", "0"]) == 2


def test_fiedler_connected(capsys):
    assert main(["fiedler", str(SCENARIOS / "rendezvous.yaml")]) == 0
    out = capsys.readouterr().out
    value = float(out.split("Fiedler value:")[1].split()[0])
    assert value > 0 and "yes" in out


def test_fiedler_split_layout(tmp_path, capsys):
    d = doc(mode="formation", agents=[{"x": -3.0, "y": 0.0}, {"x": 3.0, "y": 0.0}],
            formation_offsets=[{"i": 0, "j": 1, "offset": [-1.0, 0.0]}])
    assert main(["fiedler", write(tmp_path, d)]) == 3
    assert "Fiedler value: 0 (disconnected)" in capsys.readouterr().out


def test_fiedler_root_unreachable(tmp_path, capsys):
    # agents 1 and 2 are linked, informed agent 0 is out of range
    d = doc(agents=[{"x": -3.0, "y": 0.0}, {"x": 1.0, "y": 0.0}, {"x": 2.0, "y": 0.0}], informed=0)
    assert main(["fiedler", write(tmp_path, d)]) == 3
    assert "NO" in capsys.readouterr().out


def test_unknown_command():
    assert main(["bogus"]) == 2
