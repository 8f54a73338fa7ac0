import json
import math

import numpy as np
import pytest

from dnp2d.cli import main
from dnp2d.config import load_config, loads_config, make_config
from dnp2d.errors import ConfigError
from dnp2d.runner import emit_plotdata, run

RADIAL = """
kind = "radial"
[grid]
n = 64
r_max = 20.0
ratio = 1.05
[time]
t_end = 0.5
[initial]
type = "gaussian"
mass = 0.5
"""


def test_minimal_profile_config_gets_defaults():
    cfg = make_config({"kind": "profile", "profile": {"mass": 8 * math.pi}})
    assert cfg.section("profile") == {"mass": 8 * math.pi, "tol": 1e-10, "y_max": 200.0}
    assert cfg.seed == 0


def test_negative_mass_names_the_precondition():
    with pytest.raises(ConfigError, match="mass_to_shoot"):
        make_config({"kind": "profile", "profile": {"mass": -1.0}})
    with pytest.raises(ConfigError, match="mass_to_shoot"):
        loads_config(RADIAL.replace("mass = 0.5", "mass = -0.5"))


@pytest.mark.parametrize(
    "patch, needle",
    [
        (("n = 64", "n = 8"), "N >= 16"),
        (("ratio = 1.05", "ratio = 1.5"), "[1, 1.2]"),
        (("t_end = 0.5", "t_end = -1.0"), "time.t_end"),
        (('kind = "radial"', 'kind = "nope"'), "kind"),
        (('type = "gaussian"', 'type = "dirac"'), "point charges"),
    ],
)
def test_range_errors(patch, needle):
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[").replace("]", r"\]")):
        loads_config(RADIAL.replace(*patch))


def test_schedule_outside_interval():
    with pytest.raises(ConfigError, match="schedule"):
        loads_config(RADIAL.replace('kind = "radial"', 'kind = "radial"\nschedule = [1.0]'))


def test_round_trip_is_idempotent(tmp_path):
    cfg = loads_config(RADIAL)
    again = loads_config(cfg.to_toml())
    assert again == cfg and again.hash == cfg.hash
    assert loads_config(again.to_toml()).to_toml() == cfg.to_toml()
    path = tmp_path / "c.toml"
    path.write_text(cfg.to_toml())
    assert load_config(path).hash == cfg.hash


def test_invalid_toml():
    with pytest.raises(ConfigError, match="TOML"):
        loads_config("kind = ")


def test_profile_run_hits_target(tmp_path):
    man = run(make_config({"kind": "profile", "profile": {"mass": 8 * math.pi, "tol": 1e-8}}), tmp_path)
    assert man.passed
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert meta["m_tail"] == pytest.approx(4.0, rel=1e-8)
    assert (tmp_path / "profile.csv").read_text().startswith("y,xi,xi_prime\n")


def test_radial_run_is_byte_identical(tmp_path):
    cfg = loads_config(RADIAL.replace('kind = "radial"', 'kind = "radial"\nschedule = [0.25]'))
    a = run(cfg, tmp_path / "a")
    b = run(cfg, tmp_path / "b")
    assert a.passed and a.artifacts == b.artifacts
    assert (tmp_path / "a" / "trajectory" / "manifest.json").exists()
    for rel in a.artifacts:
        if rel != "manifest.json":
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(ma["checks"]) == {"boundary_pinned", "monotone", "charge_bounds"}
    assert ma["config_hash"] == cfg.hash
    assert sorted(ma["artifacts"]) == sorted(a.artifacts)


def test_field2d_run(tmp_path):
    cfg = make_config({"kind": "field2d", "grid": {"n": 64, "L": 16.0}, "time": {"t_end": 0.1, "dt": 0.01}})
    man = run(cfg, tmp_path)
    assert man.passed and man.results["zero_mode_dropped"]
    assert "field_0000.bin" in man.artifacts


def test_emit_plotdata(tmp_path):
    emit_plotdata({"t": [], "value": []}, tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == "t,value\n"
    emit_plotdata({"t": [1.0, 2.0], "value": [0.5, 0.25]}, tmp_path / "s.csv")
    rows = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert rows.tolist() == [[1.0, 0.5], [2.0, 0.25]]


def test_cli_moser_and_profile(tmp_path, capsys):
    assert main(["moser", "--C", "2", "--kmax", "5", "--out", str(tmp_path / "m")]) == 0
    assert "[PASS] closed_form" in capsys.readouterr().out
    assert (tmp_path / "m" / "moser.csv").exists()
    assert main(["profile", "--shoot", "0.2", "--out", str(tmp_path / "p")]) == 0
    assert main(["profile", "--mass", "-3", "--out", str(tmp_path / "q")]) == 2
    assert "mass_to_shoot" in capsys.readouterr().err


def test_cli_radial_config(tmp_path):
    path = tmp_path / "r.toml"
    path.write_text(RADIAL)
    assert main(["radial", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    assert main(["field2d", "--config", str(path), "--out", str(tmp_path / "out2")]) == 2


def test_cli_diagnose_decay(tmp_path):
    assert main(["diagnose", "decay", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "decay.csv").read_text().splitlines()[0] == "t,value,fitted"


def test_cli_accept_exit_codes(capsys):
    assert main(["accept", "11"]) == 0
    assert capsys.readouterr().out.startswith("[PASS] 11")
    # the closed-form mass law is a one-sided bound and fails at its stated tolerance
    assert main(["accept", "1"]) == 1
    assert main(["accept", "99"]) == 2
