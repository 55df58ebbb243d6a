"""HTTP surface tests: endpoint contracts, error mapping, event stream."""

from __future__ import annotations

import base64
import json

import pytest
from fastapi.testclient import TestClient

from conceptstudio.editor import EditKind
from conceptstudio.errors import ProviderError
from conceptstudio.providers.base import Capability
from conceptstudio.providers.gateway import Gateway, GatewayConfig
from conceptstudio.providers.mock import MockScript, respond_vision
from conceptstudio.service.app import create_app
from conceptstudio.service.events import EventBus
from conceptstudio.service.storage import SessionStore
from conceptstudio.service.workflow import SessionManager

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

SKETCH = {
    "canvas": [512, 512],
    "strokes": [
        {
            "points": [[60.0, 300.0, 0.0], [420.0, 300.0, 40.0], [420.0, 380.0, 80.0]],
            "width": 3.0,
            "color": [20, 20, 20],
        }
    ],
}


def build_manager(tmp_path, script: MockScript | None = None) -> SessionManager:
    gateway = Gateway(GatewayConfig(mode="mock", backoff_base_s=0.0), script=script)
    return SessionManager(SessionStore(tmp_path / "store"), gateway, EventBus())


@pytest.fixture()
def manager(tmp_path) -> SessionManager:
    return build_manager(tmp_path)


@pytest.fixture()
def client(manager) -> TestClient:
    return TestClient(create_app(manager))


def new_session(client: TestClient) -> str:
    response = client.post("/sessions")
    assert response.status_code == 201
    return response.json()["session_id"]


def generated_session(client: TestClient) -> str:
    sid = new_session(client)
    assert client.put(f"/sessions/{sid}/sketch", json=SKETCH).status_code == 200
    response = client.post(
        f"/sessions/{sid}/brief", json={"transcript": "a pink pickup truck"}
    )
    assert response.status_code == 202
    return sid


def decomposed_session(client: TestClient) -> tuple[str, dict]:
    sid = generated_session(client)
    response = client.post(f"/sessions/{sid}/select", json={"index": 0})
    assert response.status_code == 200
    return sid, response.json()


def parse_sse(text: str) -> list[dict]:
    events = []
    for block in text.strip().split("\n\n"):
        record: dict = {}
        for line in block.split("\n"):
            key, _, value = line.partition(": ")
            record[key] = value
        record["id"] = int(record["id"])
        record["data"] = json.loads(record["data"])
        events.append(record)
    return events


# ---------------------------------------------------------------------------
# Lifecycle endpoints
# ---------------------------------------------------------------------------


def test_create_then_fetch_session(client):
    sid = new_session(client)
    summary = client.get(f"/sessions/{sid}").json()
    assert summary["session_id"] == sid
    assert summary["state"] == "Drafting"
    assert summary["candidates"] == []
    assert summary["version"] == 0


def test_unknown_session_is_404(client):
    for path in ("/sessions/nope", "/sessions/nope/chart", "/sessions/nope/events"):
        response = client.get(path)
        assert response.status_code == 404
        assert response.json()["type"] == "UnknownSession"
    assert client.post("/sessions/nope/brief", json={"transcript": "x"}).status_code == 404


def test_sketch_upload(client):
    sid = new_session(client)
    response = client.put(f"/sessions/{sid}/sketch", json=SKETCH)
    assert response.status_code == 200
    assert response.json() == {"state": "Drafting", "strokes": 1}


def test_brief_generates_candidates(client):
    sid = generated_session(client)
    summary = client.get(f"/sessions/{sid}").json()
    assert summary["state"] == "Generated"
    assert len(summary["candidates"]) == 3
    assert summary["category"] == "car"
    for index in range(3):
        image = client.get(f"/sessions/{sid}/candidates/{index}/image")
        assert image.status_code == 200
        assert image.content.startswith(PNG_MAGIC)


def test_brief_accepts_audio(client):
    sid = new_session(client)
    body = {"audio_b64": base64.b64encode(b"a robot dog").decode()}
    assert client.post(f"/sessions/{sid}/brief", json=body).status_code == 202
    assert client.get(f"/sessions/{sid}").json()["category"] == "robot_dog"


def test_brief_requires_transcript_or_audio(client):
    sid = new_session(client)
    response = client.post(f"/sessions/{sid}/brief", json={})
    assert response.status_code == 422


def test_brief_rejects_bad_base64(client):
    sid = new_session(client)
    response = client.post(f"/sessions/{sid}/brief", json={"audio_b64": "@@not-b64@@"})
    assert response.status_code == 422
    assert "base64" in response.json()["detail"]


def test_select_returns_chart_and_overlay(client):
    sid, body = decomposed_session(client)
    assert body["state"] == "Decomposed"
    assert body["selected_index"] == 0
    assert body["version"] == 1
    assert body["chart"]["components"]
    from conceptstudio.segmentation.schema import schema_for

    assert set(body["legend"].values()) <= set(schema_for("car").classes)

    chart = client.get(f"/sessions/{sid}/chart")
    assert chart.status_code == 200
    assert chart.json() == body["chart"]

    overlay = client.get(f"/sessions/{sid}/overlay")
    assert overlay.status_code == 200
    assert overlay.content.startswith(PNG_MAGIC)


def test_select_before_generation_is_409(client):
    sid = new_session(client)
    response = client.post(f"/sessions/{sid}/select", json={"index": 0})
    assert response.status_code == 409


def test_select_bad_index_is_422(client):
    sid = generated_session(client)
    assert client.post(f"/sessions/{sid}/select", json={"index": 9}).status_code == 422


def test_chart_before_decomposition_is_409(client):
    sid = new_session(client)
    assert client.get(f"/sessions/{sid}/chart").status_code == 409


def test_sketch_frozen_after_decomposition_is_409(client):
    sid, _ = decomposed_session(client)
    assert client.put(f"/sessions/{sid}/sketch", json=SKETCH).status_code == 409
    response = client.post(f"/sessions/{sid}/brief", json={"transcript": "again"})
    assert response.status_code == 409


# ---------------------------------------------------------------------------
# Edits over HTTP
# ---------------------------------------------------------------------------


def chart_alternative(body: dict, function: str) -> str:
    for entries in body["chart"]["components"].values():
        for entry in entries:
            if entry["function"] == function:
                return entry["alternatives"][0]
    raise AssertionError(f"{function} not in chart")


def test_recommendation_edit_over_http(client):
    sid, body = decomposed_session(client)
    chosen = chart_alternative(body, "wheel size")
    response = client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "wheel size", "chosen": chosen},
    )
    assert response.status_code == 202
    accepted = response.json()
    assert accepted["status"] == "pending"

    summary = client.get(f"/sessions/{sid}").json()
    txn = summary["transactions"][-1]
    assert txn["edit_id"] == accepted["edit_id"]
    assert txn["status"] == "applied"
    assert summary["version"] == 2
    assert summary["state"] == "Editing"

    v2 = client.get(f"/sessions/{sid}/image", params={"version": 2})
    assert v2.status_code == 200
    assert v2.content.startswith(PNG_MAGIC)
    v1 = client.get(f"/sessions/{sid}/image", params={"version": 1})
    assert v1.content != v2.content
    latest = client.get(f"/sessions/{sid}/image")
    assert latest.content == v2.content


def test_sketch_edit_over_http(client):
    sid, _ = decomposed_session(client)
    response = client.post(
        f"/sessions/{sid}/edits",
        json={
            "kind": "sketch",
            "function": "wheel size",
            "strokes": SKETCH["strokes"],
            "transcript": "a chunky off-road wheel",
        },
    )
    assert response.status_code == 202
    chart = client.get(f"/sessions/{sid}/chart").json()
    currents = [
        e["current"] for entries in chart["components"].values() for e in entries
    ]
    assert "chunky off-road wheel" in currents


def test_edit_with_unknown_kind_is_422(client):
    sid, _ = decomposed_session(client)
    response = client.post(
        f"/sessions/{sid}/edits", json={"kind": "telepathy", "function": "wheel size"}
    )
    assert response.status_code == 422


def test_edit_with_unknown_function_is_422(client):
    sid, _ = decomposed_session(client)
    response = client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "warp drive", "chosen": "x"},
    )
    assert response.status_code == 422


def test_edit_with_unlisted_choice_is_422(client):
    sid, _ = decomposed_session(client)
    response = client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "wheel size", "chosen": "nope"},
    )
    assert response.status_code == 422


def test_edit_before_decomposition_is_409(client):
    sid = generated_session(client)
    response = client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "wheel size", "chosen": "x"},
    )
    assert response.status_code == 409


def test_edit_while_pending_is_409(client, manager):
    sid, body = decomposed_session(client)
    chosen = chart_alternative(body, "wheel size")
    pending = manager.begin_edit(
        sid, kind=EditKind.RECOMMENDATION, function="wheel size", chosen=chosen
    )
    response = client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "wheel size", "chosen": chosen},
    )
    assert response.status_code == 409
    assert response.json()["type"] == "EditInFlight"
    manager.finish_edit(sid, pending)


def test_image_before_generation_is_422(client):
    sid = new_session(client)
    assert client.get(f"/sessions/{sid}/image").status_code == 422


def test_image_version_out_of_range_is_422(client):
    sid, _ = decomposed_session(client)
    response = client.get(f"/sessions/{sid}/image", params={"version": 5})
    assert response.status_code == 422


def test_provider_failure_maps_to_502(tmp_path):
    def flaky_vision(request, rng):
        if request.params.get("task") == "extract":
            raise ProviderError("vision backend unavailable")
        return respond_vision(request, rng)

    script = MockScript().with_fixture(Capability.VISION, r".", flaky_vision)
    manager = build_manager(tmp_path, script)
    client = TestClient(create_app(manager))
    sid = generated_session(client)
    response = client.post(f"/sessions/{sid}/select", json={"index": 0})
    assert response.status_code == 502
    events = parse_sse(
        client.get(f"/sessions/{sid}/events", params={"wait": "false"}).text
    )
    assert events[-1]["event"] == "ProviderError"


# ---------------------------------------------------------------------------
# Event stream
# ---------------------------------------------------------------------------


def test_event_snapshot_is_gapless_sse(client):
    sid, body = decomposed_session(client)
    chosen = chart_alternative(body, "wheel size")
    client.post(
        f"/sessions/{sid}/edits",
        json={"kind": "recommendation", "function": "wheel size", "chosen": chosen},
    )
    events = parse_sse(
        client.get(f"/sessions/{sid}/events", params={"wait": "false"}).text
    )
    assert [e["id"] for e in events] == list(range(1, len(events) + 1))
    kinds = [e["event"] for e in events]
    assert kinds == [
        "RefinementDone",
        "CandidatesReady",
        "SegmentationReady",
        "ChartReady",
        "EditApplied",
    ]
    applied = events[-1]["data"]["payload"]
    assert applied["version"] == 2
    assert events[-1]["data"]["seq"] == events[-1]["id"]


def test_event_resume_via_query_and_header(client):
    sid, _ = decomposed_session(client)
    full = parse_sse(
        client.get(f"/sessions/{sid}/events", params={"wait": "false"}).text
    )
    tail = parse_sse(
        client.get(
            f"/sessions/{sid}/events", params={"wait": "false", "after": 2}
        ).text
    )
    assert [e["id"] for e in tail] == [e["id"] for e in full if e["id"] > 2]

    via_header = parse_sse(
        client.get(
            f"/sessions/{sid}/events",
            params={"wait": "false"},
            headers={"Last-Event-ID": "2"},
        ).text
    )
    assert via_header == tail


def test_event_stream_waits_and_delivers(client):
    sid = generated_session(client)
    with client.stream(
        "GET",
        f"/sessions/{sid}/events",
        params={"wait": "true", "timeout_s": "0.6"},
    ) as response:
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/event-stream")
        body = "".join(response.iter_text())
    seen = parse_sse(body)
    assert [e["id"] for e in seen] == [1, 2]
    assert seen[0]["event"] == "RefinementDone"
    assert seen[1]["event"] == "CandidatesReady"
