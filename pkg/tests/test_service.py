"""The HTTP facade: content addressing, error mapping, isolation.

Each test builds a fresh app so store state never leaks between tests.
Solver behavior itself is pinned elsewhere; here the focus is the wire
contract: status codes, body shapes, hash guards, sessions, budgets.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from cgmlab.corpus import load_m1, load_m2, load_mu1
from cgmlab.jsonio import content_hash, model_to_dict, realization_from_dict
from cgmlab.model import check_realization
from cgmlab.service import create_app

CORPUS = Path(__file__).resolve().parent.parent / "src" / "cgmlab" / "corpus"
M1_TEXT = (CORPUS / "meeting_m1.cgm").read_text()
M2_TEXT = (CORPUS / "meeting_m2.cgm").read_text()


@pytest.fixture()
def client():
    app = create_app(budget_seconds=30.0)
    with TestClient(app) as c:
        yield c


def post_dsl(client, text, headers=None):
    merged = {"Content-Type": "text/plain"}
    if headers:
        merged.update(headers)
    return client.post("/api/models", content=text, headers=merged)


def make_conflicted(client) -> str:
    """M1 with both sides of a conflict edge asserted satisfied."""
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    for subject in ("ConfirmOccurrence", "CancelMeeting"):
        r = client.post(
            f"/api/models/{mid}/assertions",
            json={"subject": subject, "mark": "satisfied"},
        )
        assert r.status_code == 200
        mid = r.json()["modelId"]
    return mid


def test_post_model_is_content_addressed(client):
    r = post_dsl(client, M1_TEXT)
    assert r.status_code == 200
    body = r.json()
    assert body["modelId"] == content_hash(load_m1())
    assert body["diagnostics"] == []

    as_json = client.post(
        "/api/models",
        content=json.dumps(model_to_dict(load_m1())),
        headers={"Content-Type": "application/json"},
    )
    assert as_json.json()["modelId"] == body["modelId"]


def test_post_model_parse_failure_is_400(client):
    r = post_dsl(client, "goal Broken {")
    assert r.status_code == 400
    assert r.json()["diagnostics"]


def test_get_model_round_trips(client):
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.get(f"/api/models/{mid}")
    assert r.status_code == 200
    assert r.json() == model_to_dict(load_m1())
    assert client.get("/api/models/nope").status_code == 404


def test_solve_returns_the_pinned_optimum(client):
    m1, mu1 = load_m1(), load_mu1()
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.post(f"/api/models/{mid}/solve", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "sat"
    assert [(v["name"], v["value"]) for v in body["objectiveValues"]] == [
        ("penaltyMinusReward", "-65/1"),
        ("workTime", "2/1"),
        ("cost", "0/1"),
    ]
    _, got = realization_from_dict(body["realization"])
    assert dict(got.bool_assign) == dict(mu1.bool_assign)
    assert dict(got.num_assign) == dict(mu1.num_assign)
    assert body["realization"]["modelHash"] == content_hash(m1)
    assert body["stats"]["decisions"] > 0
    assert body["realizationId"]


def test_solve_accepts_objective_overrides_and_rejects_unknowns(client):
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.post(f"/api/models/{mid}/solve", json={"objectives": ["cost"]})
    assert r.status_code == 200
    assert [v["name"] for v in r.json()["objectiveValues"]] == ["cost"]
    r = client.post(f"/api/models/{mid}/solve", json={"objectives": ["speed"]})
    assert r.status_code == 400


def test_solve_on_conflicting_assertions_is_422_with_core(client):
    mid = make_conflicted(client)
    r = client.post(f"/api/models/{mid}/solve", json={})
    assert r.status_code == 422
    assert r.json()["core"] == ["CancelMeeting", "ConfirmOccurrence"]


def test_assertion_toggle_and_clear(client):
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.post(
        f"/api/models/{mid}/assertions",
        json={"subject": "LowCost", "mark": "satisfied"},
    )
    assert r.status_code == 200
    new_id = r.json()["modelId"]
    assert new_id != mid
    assert {"subject": "LowCost", "mark": "satisfied"} in r.json()["assertions"]

    r = client.post(
        f"/api/models/{new_id}/assertions", json={"subject": "LowCost", "mark": None}
    )
    assert r.status_code == 200
    assert r.json()["modelId"] == mid  # clearing restores the original content

    assert (
        client.post(
            f"/api/models/{mid}/assertions",
            json={"subject": "Nobody", "mark": "satisfied"},
        ).status_code
        == 404
    )
    assert (
        client.post(
            f"/api/models/{mid}/assertions",
            json={"subject": "LowCost", "mark": "perhaps"},
        ).status_code
        == 400
    )


def test_enumerate_streams_distinct_valid_realizations(client):
    m1 = load_m1()
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.post(f"/api/models/{mid}/enumerate", json={"limit": 12})
    assert r.status_code == 200
    out = r.json()["realizations"]
    assert len(out) == 12
    seen = set()
    for doc in out:
        _, partial = realization_from_dict(doc)
        realization = partial.complete(m1)
        assert check_realization(m1, realization).violations == ()
        seen.add(tuple(sorted(partial.bool_assign.items())))
    assert len(seen) == 12


def test_diagnose_endpoints(client):
    mid = make_conflicted(client)
    r = client.post(f"/api/models/{mid}/diagnose")
    assert r.status_code == 200
    assert r.json()["core"] == ["CancelMeeting", "ConfirmOccurrence"]

    fine = post_dsl(client, M1_TEXT).json()["modelId"]
    assert client.post(f"/api/models/{fine}/diagnose").status_code == 400


def test_evolve_round_trip_and_divergent_tiebreaks(client):
    m2 = load_m2()
    old_id = post_dsl(client, M1_TEXT).json()["modelId"]
    new_id = post_dsl(client, M2_TEXT).json()["modelId"]
    rid = client.post(f"/api/models/{old_id}/solve", json={}).json()["realizationId"]

    fam = client.post(
        "/api/evolve",
        json={
            "oldModelId": old_id,
            "oldRealizationId": rid,
            "newModelId": new_id,
            "criterion": "familiarity",
        },
    )
    assert fam.status_code == 200
    body = fam.json()
    assert body["criterionValue"] == "5/1"
    _, partial = realization_from_dict(body["realization"])
    realization = partial.complete(m2)
    assert check_realization(m2, realization).violations == ()
    assert realization.bool_assign["R5"]
    assert not realization.bool_assign["R3"]

    eff = client.post(
        "/api/evolve",
        json={
            "oldModelId": old_id,
            "oldRealizationId": rid,
            "newModelId": new_id,
            "criterion": "changeEffort",
            "tieBreakers": ["workTime", "penaltyMinusReward", "cost"],
        },
    )
    assert eff.status_code == 200
    body = eff.json()
    assert body["criterionValue"] == "3/1"
    _, partial = realization_from_dict(body["realization"])
    realization = partial.complete(m2)
    assert realization.bool_assign["R3"]
    assert not realization.bool_assign["R5"]


def test_evolve_error_mapping(client):
    old_id = post_dsl(client, M1_TEXT).json()["modelId"]
    new_id = post_dsl(client, M2_TEXT).json()["modelId"]
    rid = client.post(f"/api/models/{old_id}/solve", json={}).json()["realizationId"]

    base = {
        "oldModelId": old_id,
        "oldRealizationId": rid,
        "newModelId": new_id,
        "criterion": "familiarity",
    }
    assert (
        client.post("/api/evolve", json={**base, "oldModelId": "nope"}).status_code
        == 404
    )
    assert (
        client.post(
            "/api/evolve", json={**base, "oldRealizationId": "nope"}
        ).status_code
        == 404
    )
    assert (
        client.post("/api/evolve", json={**base, "criterion": "closeness"}).status_code
        == 400
    )

    # A realization carried to a model with different content: stale.
    toggled = client.post(
        f"/api/models/{old_id}/assertions",
        json={"subject": "LowCost", "mark": "satisfied"},
    ).json()["modelId"]
    stale = client.post("/api/evolve", json={**base, "oldModelId": toggled})
    assert stale.status_code == 409

    conflicted = make_conflicted(client)
    r = client.post("/api/evolve", json={**base, "newModelId": conflicted})
    assert r.status_code == 422
    assert r.json()["core"] == ["CancelMeeting", "ConfirmOccurrence"]


def test_export_smt2_text(client):
    mid = post_dsl(client, M1_TEXT).json()["modelId"]
    r = client.post(f"/api/models/{mid}/export-smt2")
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/plain")
    assert r.text.startswith("; constrained goal model")
    again = client.post(f"/api/models/{mid}/export-smt2")
    assert again.text == r.text
    flat = client.post(
        f"/api/models/{mid}/export-smt2", json={"includeObjectives": False}
    )
    assert "(minimize" not in flat.text


def test_sessions_are_isolated(client):
    alice = {"X-Session-Id": "alice"}
    bob = {"X-Session-Id": "bob"}
    mid = post_dsl(client, M1_TEXT, headers=alice).json()["modelId"]
    assert client.get(f"/api/models/{mid}", headers=alice).status_code == 200
    assert client.get(f"/api/models/{mid}", headers=bob).status_code == 404


def test_parallel_sessions_do_not_interleave_state():
    app = create_app(budget_seconds=30.0)
    tiny = "goal Root {{ reward {w}; root; }}\ntask T{n} {{ penalty 1; }}\nrefinement R1: Root <- T{n};\n"
    failures: list[str] = []

    def worker(n: int) -> None:
        session = {"X-Session-Id": f"s{n}"}
        with TestClient(app) as c:
            text = tiny.format(w=10 + n, n=n)
            mid = c.post(
                "/api/models",
                content=text,
                headers={**session, "Content-Type": "text/plain"},
            ).json()["modelId"]
            for _ in range(10):
                r = c.get(f"/api/models/{mid}", headers=session)
                if r.status_code != 200:
                    failures.append(f"session {n} lost its model")
                    return
                elements = {e["id"] for e in r.json()["elements"]}
                if elements != {"Root", f"T{n}"}:
                    failures.append(f"session {n} saw {elements}")
                    return
                solved = c.post(f"/api/models/{mid}/solve", json={}, headers=session)
                if solved.status_code != 200:
                    failures.append(f"session {n} solve failed: {solved.text}")
                    return
                if not solved.json()["realization"]["boolAssign"][f"T{n}"]:
                    failures.append(f"session {n} got a foreign realization")
                    return

    def guarded(n: int) -> None:
        try:
            worker(n)
        except Exception as exc:  # surface thread crashes as test failures
            failures.append(f"session {n} raised {exc!r}")

    threads = [threading.Thread(target=guarded, args=(n,)) for n in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert failures == []


def test_budget_exhaustion_is_503():
    app = create_app(budget_seconds=0.0005)
    with TestClient(app) as c:
        mid = post_dsl(c, M1_TEXT).json()["modelId"]
        r = c.post(f"/api/models/{mid}/solve", json={})
        assert r.status_code == 503


def test_idle_sessions_expire():
    app = create_app(budget_seconds=30.0, idle_ttl=0.05)
    with TestClient(app) as c:
        mid = post_dsl(c, M1_TEXT).json()["modelId"]
        assert c.get(f"/api/models/{mid}").status_code == 200
        time.sleep(0.12)
        assert c.get(f"/api/models/{mid}").status_code == 404
