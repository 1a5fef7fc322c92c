import numpy as np
import pytest

from panelflow import cli
from panelflow.config import Scenario, level_scenario, parse_scenario, parse_text, serialize
from panelflow.errors import ConfigurationError
from panelflow.operators import CoupledState
from panelflow.snapshots import read_csv, read_snapshot, write_snapshot

TINY = """
[flow]
U = 2.0
nx = 16
ny = 16
nz = 8
sponge_width = 2
[plate]
nx = 9
ny = 9
[run]
T = 0.05
stride = 5
"""


def test_defaults_are_reference_grid():
    sc = parse_text("")
    assert sc == Scenario()
    fd = sc.flow_domain()
    assert fd.shape == (64, 64, 32) and fd.plate.shape == (33, 33)
    assert fd.hx == fd.hz == pytest.approx(1 / 32)
    assert sc.run.seed == 42 and sc.run.dt == "auto"
    assert level_scenario(2) == sc


def test_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        parse_text("[flow]\nU = 1.0\n")
    with pytest.raises(ConfigurationError):
        parse_text("[run]\nT = 0\n")
    with pytest.raises(ConfigurationError):
        parse_text("[plate]\nmodel = membrane\n")
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_text("[run]\nT = abc\n")


def test_unknown_key_and_section_report_line():
    with pytest.raises(ConfigurationError, match="line 4: unknown key 'speed'"):
        parse_text("[flow]\nU = 2.0\n\nspeed = 3\n")
    with pytest.raises(ConfigurationError, match="line 3: unknown section"):
        parse_text("[run]\nT = 1\n[solver]\nx = 1\n")
    with pytest.raises(ConfigurationError, match="line 1"):
        parse_text("U = 2\n")


def test_serialize_round_trip():
    sc = level_scenario(1, flow={"U": 0.5, "mu": 0.25, "sponge": False},
                        plate={"model": "berger", "kappa": 2.0, "gamma": 3.0},
                        ic={"kind": "random", "amplitude": 0.003}, run={"T": 2.5, "dt": 0.001})
    back = parse_text(serialize(sc))
    assert back == sc


def test_refined_halves_spacings():
    sc = level_scenario(0)
    r = sc.refined(1)
    assert r == level_scenario(1)
    assert r.flow_domain().hx == pytest.approx(sc.flow_domain().hx / 2)


def test_snapshot_round_trip_bit_exact(tmp_path):
    fd = level_scenario(0).flow_domain()
    y = CoupledState.random(fd, np.random.default_rng(0))
    p = tmp_path / "s.pnfl"
    write_snapshot(p, y, 0.125)
    z, t = read_snapshot(p)
    assert t == 0.125
    for a, b in ((y.phi, z.phi), (y.psi, z.psi), (y.u, z.u), (y.v, z.v)):
        assert a.tobytes() == b.tobytes()
    write_snapshot(tmp_path / "t.pnfl", z, t)
    assert (tmp_path / "t.pnfl").read_bytes() == p.read_bytes()


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.pnfl"
    p.write_bytes(b"XXXX" + bytes(100))
    with pytest.raises(ValueError):
        read_snapshot(p)
    p.write_bytes(b"PN")
    with pytest.raises(ValueError):
        read_snapshot(p)


def test_snapshot_initial_condition(tmp_path):
    sc = parse_text(TINY)
    y = CoupledState.random(sc.flow_domain(), np.random.default_rng(1))
    write_snapshot(tmp_path / "ic.pnfl", y, 0.0)
    sc2 = parse_text(TINY + "[ic]\nkind = snapshot\nfile = ic.pnfl\n", base_dir=str(tmp_path))
    assert np.array_equal(sc2.initial_state().psi, y.psi)
    with pytest.raises(ConfigurationError):
        parse_text(TINY + "[ic]\nkind = snapshot\nfile = missing.pnfl\n", base_dir=str(tmp_path))


def test_run_outputs_are_deterministic(tmp_path):
    (tmp_path / "s.ini").write_text(TINY)
    for name in ("a", "b"):
        assert cli.main(["run", str(tmp_path / "s.ini"), "--output", str(tmp_path / name)]) == 0
    for f in ("ledger.csv", "traces.csv", "report.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    snaps = sorted(p.name for p in (tmp_path / "a" / "snapshots").iterdir())
    assert snaps[0] == "snap_0000000.pnfl" and len(snaps) >= 2
    led = read_csv(tmp_path / "a" / "ledger.csv")
    assert led["step"][0] == 0 and "residual_supersonic" in led


def test_blowup_exit_code(tmp_path):
    # destabilizing linear force far beyond the first plate eigenvalue
    text = TINY.replace("[plate]\n", "[plate]\nmodel = kirchhoff\nlaw = linear\ncoeff = -12000\n")
    (tmp_path / "s.ini").write_text(text.replace("T = 0.05", "T = 1.0"))
    assert cli.main(["run", str(tmp_path / "s.ini"), "--output", str(tmp_path / "o")]) == 2
    assert "blowup=yes" in (tmp_path / "o" / "report.txt").read_text()


def test_cli_error_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 1
    (tmp_path / "bad.ini").write_text("[flow]\nU = 1\n")
    assert cli.main(["run", str(tmp_path / "bad.ini")]) == 1
    assert "error:" in capsys.readouterr().err
    assert cli.main(["no-such-command"]) == 1


def test_cli_checks(tmp_path, capsys):
    (tmp_path / "s.ini").write_text(TINY)
    s = str(tmp_path / "s.ini")
    assert cli.main(["check-multiplier", "--samples", "10000"]) == 0
    assert cli.main(["check-generator", s, "--pairs", "5", "--adjoint-pairs", "3"]) == 0
    assert cli.main(["resolvent", s, "--lambda", "0.5", "--samples", "2"]) == 0
    assert cli.main(["gradcheck", s, "--samples", "2"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 4
