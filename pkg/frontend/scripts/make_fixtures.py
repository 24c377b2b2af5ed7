"""Regenerate the console test fixtures from a live seeded service.

Runs the HTTP service in-process, drives a small campaign through enough
batches to converge, applies a blacklist, and records the exact JSON the
API returned at each step.  Console tests replay these payloads through a
stubbed fetch, so they exercise real response shapes without a server.

Usage: python3 scripts/make_fixtures.py  (from the frontend/ directory)
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from banditflow.service import ServiceConfig, create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

MS_PER_DAY = 86_400_000
TRUE_CTR = {"alpha": 0.07, "bravo": 0.10, "charlie": 0.13}
VISITORS_PER_EPOCH = 150


def dump(name: str, payload: dict) -> None:
    path = FIXTURES / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.name}")


def seed_epoch(client: TestClient, cid: str, day: int, rng: np.random.Generator) -> None:
    weights = client.get(f"/campaigns/{cid}/allocation").json()["weights"]
    arms = sorted(weights)
    probs = np.array([weights[a] for a in arms])
    probs = probs / probs.sum()
    events = []
    base = day * MS_PER_DAY
    for i in range(VISITORS_PER_EPOCH):
        arm = arms[int(rng.choice(len(arms), p=probs))]
        visitor = f"v{day}-{i}"
        rid = f"r{day}-{i}"
        served_at = base + i * 1000
        events.append(
            {
                "type": "served",
                "visitor_id": visitor,
                "arm": arm,
                "timestamp": served_at,
                "request_id": rid,
            }
        )
        if rng.random() < TRUE_CTR[arm]:
            events.append(
                {
                    "type": "interaction",
                    "kind": "click",
                    "visitor_id": visitor,
                    "timestamp": served_at + 60_000,
                    "request_id": rid,
                }
            )
    resp = client.post(f"/campaigns/{cid}/events", json={"events": events})
    assert resp.status_code == 200 and resp.json()["rejected"] == [], resp.text


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(17)
    with tempfile.TemporaryDirectory() as tmp:
        config = ServiceConfig(data_dir=Path(tmp), n_draws=4000, seed=11)
        app = create_app(config)
        with TestClient(app) as client:
            resp = client.post(
                "/campaigns",
                json={"campaign_id": "demo", "arms": sorted(TRUE_CTR)},
            )
            assert resp.status_code == 201, resp.text

            for day in range(8):
                seed_epoch(client, "demo", day, rng)
                resp = client.post("/campaigns/demo/batch")
                assert resp.status_code == 200 and resp.json()["changed"], resp.text

            dump("history-pre-blacklist.json", client.get("/campaigns/demo/history").json())
            dump("allocation-pre-blacklist.json", client.get("/campaigns/demo/allocation").json())

            resp = client.post("/campaigns/demo/arms/bravo/blacklist")
            assert resp.status_code == 200, resp.text
            dump("blacklist-response.json", resp.json())
            # Between the admin POST and the next batch the blacklist is
            # recorded but weights have not moved yet.
            dump(
                "history-blacklist-pending.json",
                client.get("/campaigns/demo/history").json(),
            )

            seed_epoch(client, "demo", 8, rng)
            resp = client.post("/campaigns/demo/batch")
            assert resp.status_code == 200, resp.text
            dump("batch-response.json", resp.json())
            dump("history-post-blacklist.json", client.get("/campaigns/demo/history").json())
            dump("allocation-post-blacklist.json", client.get("/campaigns/demo/allocation").json())

            resp = client.post(
                "/campaigns", json={"campaign_id": "fresh", "arms": ["a", "b", "c"]}
            )
            assert resp.status_code == 201, resp.text
            dump("history-fresh.json", client.get("/campaigns/fresh/history").json())

            # Infeasible on the server (4 arms) but fine for 3: lets tests
            # show a stale console passing its local check and still getting
            # the authoritative rejection back.
            resp = client.post(
                "/campaigns", json={"campaign_id": "wide", "arms": ["a", "b", "c", "d"]}
            )
            assert resp.status_code == 201, resp.text
            resp = client.put(
                "/campaigns/wide/floor-schedule", json={"default": 0.3, "entries": []}
            )
            assert resp.status_code == 422, resp.text
            dump("error-infeasible.json", resp.json())

            dump("campaigns.json", client.get("/campaigns").json())

            for arm in ("b", "c"):
                resp = client.post(f"/campaigns/fresh/arms/{arm}/blacklist")
                assert resp.status_code == 200, resp.text
            resp = client.post("/campaigns/fresh/arms/a/blacklist")
            assert resp.status_code == 422, resp.text
            dump("error-last-live.json", resp.json())

    history = json.loads((FIXTURES / "history-post-blacklist.json").read_text())
    final = history["epochs"][-1]
    assert final["weights"]["bravo"] == 0.0, final
    assert final["weights"]["charlie"] > 0.85, final
    first_batched = history["epochs"][1]
    assert first_batched["weights"]["charlie"] < 0.75, first_batched
    print("convergence + blacklist shape verified")


if __name__ == "__main__":
    main()
