import pytest
from fastapi.testclient import TestClient

from phkit.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app("umbrella.scn"))


def parse_sse(text):
    events = []
    name = None
    for line in text.splitlines():
        if line.startswith("event: "):
            name = line[len("event: "):]
        elif line.startswith("data: "):
            events.append((name, line[len("data: "):]))
    return events


def test_scene_description(client):
    doc = client.get("/v1/scene").json()
    assert doc["name"] == "umbrella"
    assert doc["width"] == 8 and doc["height"] == 8
    assert doc["clock"] == 0.0
    assert any(cell["cloaked"] for row in doc["cells"] for cell in row)


def test_fresh_frame_carries_clock(client):
    doc = client.get("/v1/frame").json()
    assert doc["clock"] == 0.0
    assert len(doc["color_grid"]) == 8


def test_deposit_guarded_before_convergence(client):
    r = client.post("/v1/deposit", json={"mode": "global"})
    assert r.status_code == 409
    assert r.json()["error"] == "DepositGuardError"
    assert "clock" in r.json()


def test_setpoint_streams_iterations_then_result(client):
    r = client.post("/v1/setpoint", json={"target": 6.0, "seed": 42})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/event-stream")
    events = parse_sse(r.text)
    names = [n for n, _ in events]
    assert names[-1] == "result"
    assert names[:-1] == ["iteration"] * (len(names) - 1)


def test_converge_deposit_step_changes_frame(client):
    client.post("/v1/setpoint", json={"target": 4.0, "seed": 1}).read()
    before = client.get("/v1/frame").json()
    r = client.post("/v1/deposit", json={"mode": "global"})
    assert r.status_code == 200
    r = client.post("/v1/step", json={"dt": 1.0})
    assert r.json()["clock"] == 1.0
    after = client.get("/v1/frame").json()
    changed = sum(
        1
        for y in range(8)
        for x in range(8)
        if before["color_grid"][y][x] != after["color_grid"][y][x]
    )
    assert changed >= 1


def test_unreachable_setpoint_is_409(client):
    r = client.post("/v1/setpoint", json={"target": 13.0})
    assert r.status_code == 409
    assert r.json()["error"] == "UnreachableSetpointError"


def test_malformed_requests_are_422(client):
    assert client.post("/v1/step", json={"dt": -1}).status_code == 422
    assert client.post("/v1/step", json={}).status_code == 422
    assert client.post("/v1/setpoint", json={"target": "six"}).status_code == 422
    assert client.get("/v1/events?rate=0").status_code == 422


def test_reset_restores_clock_and_guard(client):
    client.post("/v1/setpoint", json={"target": 4.0, "seed": 1}).read()
    client.post("/v1/step", json={"dt": 2.0})
    r = client.post("/v1/reset")
    assert r.json()["clock"] == 0.0
    assert client.post("/v1/deposit", json={"mode": "global"}).status_code == 409


def test_events_stream_bounded(client):
    r = client.get("/v1/events?rate=50&limit=3")
    frames = [n for n, _ in parse_sse(r.text) if n == "frame"]
    assert len(frames) == 3


def test_step_clock_total_order(client):
    clocks = [client.post("/v1/step", json={"dt": 0.5}).json()["clock"] for _ in range(4)]
    assert clocks == [0.5, 1.0, 1.5, 2.0]
