import math

import pytest
from fastapi.testclient import TestClient

from prandtl_lab import service
from prandtl_lab.api import app
from prandtl_lab.eulerian import SeedError
from prandtl_lab.scenario import GAUSSIAN_LINE_SCENARIO
from prandtl_lab.schemas import BlowupResponse, SimulateResponse, Table

client = TestClient(app)


def test_health():
    assert client.get("/health").json() == {"status": "ok"}


def test_profile_endpoint():
    r = client.post("/profile", json={"kind": "generic", "what": "ystar", "x": [0.0, 1.0]})
    assert r.status_code == 200
    t = Table.model_validate(r.json())
    assert t.rows[0][1] == pytest.approx(3.0 * math.pi / 8.0, rel=1e-12)
    assert t.error is None


def test_asymptotic_table_gaps_shrink():
    t = service.profile_table(service.ProfileRequest(kind="generic", what="asymptotics"))
    far = [r for r in t.rows if r[0] == "ystar_far"]
    gaps = [abs(r[5] / r[4]) for r in far if r[1] > 0]
    assert gaps == sorted(gaps, reverse=True)


def test_axis_request_for_generic_is_400():
    r = client.post("/profile", json={"kind": "generic", "what": "axis", "y": [1.0]})
    assert r.status_code == 400 and r.json()["kind"] == "input"


def test_malformed_body_is_422():
    assert client.post("/profile", json={"kind": "nope", "what": "ystar"}).status_code == 422


def test_blowup_endpoint():
    r = client.post("/blowup", json={"scenario": GAUSSIAN_LINE_SCENARIO})
    assert r.status_code == 200
    b = BlowupResponse.model_validate(r.json())
    assert b.T == pytest.approx(1.0, abs=1e-6)
    assert b.genericity is not None and not b.genericity.generic
    assert b.mu is None


def test_invalid_scenario_is_400():
    r = client.post("/blowup", json={"scenario": 'name = "a"\nu0 = "sin(X"'})
    assert r.status_code == 400
    assert "expected" in r.json()["message"]


def test_simulate_endpoint():
    body = {"scenario": GAUSSIAN_LINE_SCENARIO, "times": [0.0, 0.5],
            "grid": {"x0": 0.0, "x1": 1.0, "nx": 2, "y0": 0.5, "y1": 1.5, "ny": 3}}
    r = client.post("/simulate", json=body)
    assert r.status_code == 200
    s = SimulateResponse.model_validate(r.json())
    assert len(s.snapshots) == 2
    assert s.snapshots[0].u[1][2] == pytest.approx(-math.sin(1.0) * math.exp(-0.125))
    # u is constant along characteristics: u(0.5, x, .) on the wall x-line
    assert s.snapshots[1].u[0] == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_degeneracy_is_409(monkeypatch):
    def boom(t, *a, **k):
        raise SeedError("wall map not monotone")
    monkeypatch.setattr(service, "snapshot", boom)
    body = {"scenario": GAUSSIAN_LINE_SCENARIO, "times": [0.5],
            "grid": {"x0": 0.0, "x1": 1.0, "nx": 2, "y0": 0.5, "y1": 1.5, "ny": 3}}
    r = client.post("/simulate", json=body)
    assert r.status_code == 409
    assert r.json()["kind"] == "degeneracy" and r.json()["t"] == 0.5


def test_unknown_suite_is_400():
    assert client.get("/verify/bogus").status_code == 400


def test_verify_constants_endpoint():
    r = client.get("/verify/constants")
    assert r.status_code == 200 and r.json()["passed"] is True
    assert any(c["id"] == "A1" for c in r.json()["checks"])
