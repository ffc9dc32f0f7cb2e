import pytest
from fastapi.testclient import TestClient

from backend.app.config import get_settings
from backend.app.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_app_metadata_and_cors(client):
    assert app.title == get_settings().api_title
    assert "trajectory matrix" in app.description
    response = client.get("/healthz", headers={"Origin": "http://localhost:8888"})
    assert response.headers["access-control-allow-origin"] == "*"
    assert "access-control-allow-credentials" not in response.headers


def test_generate_constant(client):
    response = client.post("/series/generate", json={"spec": {"type": "constant"}, "n": 4})
    assert response.status_code == 200
    assert response.json() == {"values": [1.0, 1.0, 1.0, 1.0], "rank": 1}


def test_generate_stochastic_needs_seed(client):
    response = client.post("/series/generate", json={"spec": {"type": "white_noise"}, "n": 4})
    assert response.status_code == 422
    seeded = client.post("/series/generate", json={"spec": {"type": "white_noise"}, "n": 4, "seed": 1})
    assert seeded.status_code == 200
    assert seeded.json()["rank"] is None


def test_rank_of_oscillation(client):
    response = client.post("/series/rank", json={"type": "oscillating", "terms": [{"gamma": 1.0, "omega": 0.2}]})
    assert response.status_code == 200
    assert response.json() == {"rank": 2}


def test_analyze_const_saw(client):
    payload = {"signal": {"type": "constant"}, "noise": {"type": "saw"}, "n": 110, "L": 10, "delta": 0.25}
    response = client.post("/analyze", json=payload)
    assert response.status_code == 200
    body = response.json()
    assert (body["L"], body["K"], body["rank"]) == (10, 101, 1)
    assert body["expansion"] == "certified"
    assert body["delta_p_norm"] == pytest.approx(0.25 / 0.9375 / 101, rel=0.05)
    assert body["report"]["valid_thm3"] is True


def test_analyze_rank_too_high(client):
    payload = {"signal": {"type": "constant"}, "noise": {"type": "saw"}, "n": 30, "L": 10, "delta": 0.1, "rank": 3}
    response = client.post("/analyze", json=payload)
    assert response.status_code == 409
    assert "rank" in response.json()["detail"]


def test_analyze_bad_window(client):
    payload = {"signal": {"type": "constant"}, "noise": {"type": "saw"}, "n": 10, "L": 20, "delta": 0.1}
    assert client.post("/analyze", json=payload).status_code == 422


def test_rank_rejects_unknown_type(client):
    assert client.post("/series/rank", json={"type": "martian"}).status_code == 422
