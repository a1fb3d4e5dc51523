import csv
import io
import json
import math

import httpx
import pytest
from fastapi.testclient import TestClient

from prandtl_lab import cli, service
from prandtl_lab.api import app
from prandtl_lab.eulerian import DegeneracyError
from prandtl_lab.scenario import GAUSSIAN_LINE_SCENARIO
from prandtl_lab.verify import CONCAVE_SCENARIO, CheckResult


@pytest.fixture
def scn(tmp_path):
    def write(text, name="s.scn"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def _csv(text):
    return list(csv.reader(io.StringIO(text)))


def test_profile_ystar_at_origin(capsys):
    assert cli.main(["profile", "generic", "ystar", "--x", "0"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert rows[0] == ["X", "y_star"]
    assert float(rows[1][1]) == pytest.approx(3.0 * math.pi / 8.0, rel=1e-11)


def test_profile_axis_value(capsys):
    assert cli.main(["profile", "degenerate", "axis", "--what", "d1", "--y", "pi"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert float(rows[1][0]) == pytest.approx(math.pi) and float(rows[1][1]) == -1.0


def test_empty_range_is_header_only(capsys):
    assert cli.main(["profile", "generic", "ystar", "--range", "0 1 0"]) == 0
    assert capsys.readouterr().out == "X,y_star\n"


def test_precision_controls_digits(capsys):
    assert cli.main(["profile", "generic", "ystar", "--x", "0", "--precision", "6"]) == 0
    assert _csv(capsys.readouterr().out)[1][1] == "1.1781"


def test_evaluator_error_flushes_partial_table(capsys):
    code = cli.main(["profile", "degenerate", "axis", "--y", "1,-1,2"])
    out, err = capsys.readouterr()
    assert code == cli.EXIT_DEGENERACY
    assert len(_csv(out)) == 2 and "error" in err


def test_json_round_trip(capsys):
    assert cli.main(["profile", "generic", "theta", "--x", "0.1", "--y", "0.5,9", "--format", "json"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["columns"][:3] == ["X", "Y", "theta"]
    assert obj["rows"][1][-1] == "outside_support" and obj["rows"][1][2] is None


def test_blowup_gaussian_line(capsys, scn):
    assert cli.main(["blowup", "--scenario", scn(GAUSSIAN_LINE_SCENARIO)]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["T"] == pytest.approx(1.0, abs=1e-6)
    assert obj["T_b"] == pytest.approx(math.exp(0.5), abs=1e-4)
    assert obj["genericity"]["generic"] is False


def test_blowup_horizon_label(capsys, scn):
    assert cli.main(["blowup", "--scenario", scn(CONCAVE_SCENARIO), "--n", "11"]) == 0
    assert json.loads(capsys.readouterr().out)["T"] == ">= 50"
    assert cli.main(["blowup", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--t-max", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["T"] == ">= 0.5"


def test_invalid_scenario_exit_2(capsys, scn):
    assert cli.main(["blowup", "--scenario", scn('name = "a"\nu0 = "X+"')]) == cli.EXIT_INPUT
    assert cli.main(["blowup", "--scenario", "/nonexistent.scn"]) == cli.EXIT_INPUT
    assert "input error" in capsys.readouterr().err


def test_simulate_time_zero_reproduces_datum(capsys, scn):
    code = cli.main(["simulate", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--times", "0",
                     "--grid", "-1 1 3 0.5 2 2"])
    assert code == 0
    rows = _csv(capsys.readouterr().out)
    assert rows[0] == cli.SNAPSHOT_COLUMNS
    for r in rows[1:]:
        x, y, u = float(r[1]), float(r[2]), r[3]
        want = -math.sin(x) * math.exp(-(y - 1.0) ** 2 / 2.0)
        assert u == format(want + 0.0, ".12g")


def test_simulate_files_per_time(tmp_path, scn):
    out = tmp_path / "snap.json"
    code = cli.main(["simulate", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--times", "0,0.5",
                     "--grid", "0 1 2 0.5 1 2", "--format", "json", "--out", str(out)])
    assert code == 0
    files = sorted(p.name for p in tmp_path.glob("snap_t*.json"))
    assert files == ["snap_t0.5.json", "snap_t0.json"]
    obj = json.loads((tmp_path / "snap_t0.5.json").read_text())
    assert obj["t"] == 0.5 and len(obj["u"]) == 2


def test_simulate_rejects_times_past_blowup(capsys, scn):
    code = cli.main(["simulate", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--times", "1.5",
                     "--grid", "0 1 2 0.5 1 2"])
    assert code == cli.EXIT_INPUT
    code = cli.main(["simulate", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--times", "0.5",
                     "--grid", "0 1 2 0.5 1 2", "--renorm"])
    assert code == cli.EXIT_INPUT


def test_simulate_degeneracy_exit_3(capsys, scn, monkeypatch):
    def boom(t, *a, **k):
        raise DegeneracyError("|grad x| below threshold", t, 0.25, None)
    monkeypatch.setattr(service, "snapshot", boom)
    code = cli.main(["simulate", "--scenario", scn(GAUSSIAN_LINE_SCENARIO), "--times", "0.5",
                     "--grid", "0 1 2 0.5 1 2"])
    assert code == cli.EXIT_DEGENERACY
    assert "t=0.5, x=0.25" in capsys.readouterr().err


def test_verify_exit_codes(capsys, monkeypatch):
    assert cli.main(["verify", "--suite", "constants"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert rows[0] == cli.VERIFY_COLUMNS and all(r[2] == "true" for r in rows[1:])
    bad = CheckResult("A0", "forced", 1.0, 0.5, False)
    monkeypatch.setattr(service, "run_suite", lambda suite: [bad])
    assert cli.main(["verify", "--suite", "constants"]) == cli.EXIT_VERIFY
    assert "FAIL A0" in capsys.readouterr().err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["profile", "generic", "ystar", "--precision", "3"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["profile", "generic", "ystar", "--x", "foo(1)"])


def test_thin_client_over_http(capsys, scn, monkeypatch):
    client = TestClient(app, base_url="http://lab")
    monkeypatch.setattr(httpx, "Client", lambda **kw: client)
    assert cli.main(["--server", "http://lab", "profile", "generic", "ystar", "--x", "0"]) == 0
    assert float(_csv(capsys.readouterr().out)[1][1]) == pytest.approx(3.0 * math.pi / 8.0)
    bad = scn('name = "a"\nu0 = "X+"')
    assert cli.main(["--server", "http://lab", "blowup", "--scenario", bad]) == cli.EXIT_INPUT
