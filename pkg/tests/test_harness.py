import json

import numpy as np
import pytest

from ultrafast import cli, harness
from ultrafast.errors import ConfigurationError, PropertyViolation
from ultrafast.harness import ExperimentConfig, parse_config_text, read_summary

SMALL = """
r = 2
weight.kind = quadratic
grid.kind = truncated1d
grid.n_cells = 120
grid.L = 9   # half-width
initial.kind = cosine
initial.epsilon = 0.3
solver.t_end = 0.01
"""


def write(tmp_path, text, name="cfg.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_and_defaults():
    cfg = ExperimentConfig.from_text(SMALL)
    assert cfg["grid.n_cells"] == 120 and cfg["grid.L"] == 9.0
    assert cfg["solver.cfl_safety"] == 0.4 and cfg["solver.record_every"] is None
    assert cfg["ladder.k"] == (4.0, 6.0, 8.0, 10.0)
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again.values == cfg.values


@pytest.mark.parametrize(
    "text",
    ["nonsense.key = 1", "r = 1", "r = two", "grid.kind = hexagonal", "initial.kind = spike",
     "weight.kind = power\nweight.alpha = 2.5", "solver.cfl_safety = 2", "r 2"],
)
def test_bad_configs(text):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_text(text)


def test_parse_strips_comments():
    assert parse_config_text("# header\nr = 3 # cubic\n\n") == {"r": "3"}


def test_default_half_width_used():
    cfg = ExperimentConfig.from_text("grid.n_cells = 40")
    assert cfg.build_grid().half_width == pytest.approx(6 * 3**0.5)


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfg = write(out, SMALL)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out / "run")]) == 0
    return out / "run"


def test_simulate_outputs(simulated):
    for name in ("config.txt", "trajectory.csv", "final_field.txt", "summary.txt"):
        assert (simulated / name).exists()
    s = read_summary(simulated / "summary.txt")
    assert s["bound_holds"] == "true" and s["lambda_fit_ok"] == "true"
    assert float(s["lambda_fit"]) >= float(s["rate_bound"])
    assert float(s["max_mass_error"]) <= 1e-12
    header = (simulated / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,F,gap,I,chi2,c,C,mass,dt"
    data = np.loadtxt(simulated / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 9 and np.all(np.diff(data[:, 2]) <= 1e-10)


def test_simulate_is_deterministic(simulated, tmp_path):
    cfg = write(tmp_path, SMALL)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "trajectory.csv").read_bytes() == (simulated / "trajectory.csv").read_bytes()
    assert (tmp_path / "again" / "summary.txt").read_bytes() == (simulated / "summary.txt").read_bytes()


def test_config_error_exit_status(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace("r = 2", "r = 1"))
    status = cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "bad")])
    assert status == 2
    err = json.loads(capsys.readouterr().err)
    assert "r must exceed 1" in err["message"]
    assert json.loads((tmp_path / "bad" / "error.json").read_text())["exit_status"] == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "absent.txt")]) == 2


def test_property_violation_exit_status(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise PropertyViolation("forced")

    monkeypatch.setattr(harness, "cmd_verify", boom)
    cfg = write(tmp_path, SMALL)
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 1


def test_poincare_command(tmp_path):
    cfg = write(tmp_path, SMALL + "poincare.ladder = 100, 200, 400\ngrid.L = 10.392304845413264\n")
    assert cli.main(["poincare", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    lines = (tmp_path / "p" / "poincare.csv").read_text().splitlines()
    assert lines[0] == "N,L,lambda1,C_P,residual,status" and len(lines) == 4
    assert all(line.endswith(",ok") for line in lines[1:])
    limit = float(read_summary(tmp_path / "p" / "poincare_summary.txt")["C_P_extrapolated"])
    assert limit == pytest.approx(3.0, rel=1e-3)


def test_verify_command_and_seeding(tmp_path):
    cfg = write(tmp_path, SMALL + "verify.n_samples = 40\n")
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "7",
                     "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "verify.csv").read_bytes()
    assert a == (tmp_path / "b" / "verify.csv").read_bytes()
    assert len(a.splitlines()) == 41
    s = read_summary(tmp_path / "a" / "verify_summary.txt")
    assert s["n_passed"] == "40" and s["seed"] == "7"


def test_verify_sweep_samples_differ():
    cfg = ExperimentConfig.from_text(SMALL)
    rep = harness.verify_sweep(cfg, 5, seed=1)
    assert len({row[1] for row in rep.rows}) == 5
    assert rep.n_passed == 5


def test_localize_command(tmp_path):
    text = SMALL + "ladder.k = 4, 6, 8\nladder.h = 0.1\nladder.t_end = 0.004\n"
    cfg = write(tmp_path, text)
    assert cli.main(["localize", "--config", str(cfg), "--out", str(tmp_path / "l")]) == 0
    rows = (tmp_path / "l" / "ladder.csv").read_text().splitlines()
    assert rows[0] == "k,a_k,b_k,c_k,C_k,L1_gap_to_next" and len(rows) == 4
    assert read_summary(tmp_path / "l" / "ladder_summary.txt")["verdict"] == "pass"


def test_localize_needs_three_rungs(tmp_path):
    cfg = write(tmp_path, SMALL + "ladder.k = 4, 8\n")
    assert cli.main(["localize", "--config", str(cfg), "--out", str(tmp_path / "l")]) == 2


def test_localize_rejects_periodic(tmp_path):
    cfg = write(tmp_path, "weight.kind = uniform\ngrid.kind = periodic1d\ngrid.n_cells = 32\n")
    assert cli.main(["localize", "--config", str(cfg), "--out", str(tmp_path / "l")]) == 2
