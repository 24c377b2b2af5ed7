import { describe, expect, it } from "vitest";

import {
  ApiError,
  blacklistArm,
  getAllocation,
  getHistory,
  listCampaigns,
  putFloorSchedule,
  runBatch,
  type Session,
} from "../src/client.js";
import type {
  AllocationResponse,
  CampaignListResponse,
  ErrorBody,
  HistoryResponse,
} from "../src/types.js";
import { FakeService, fixture } from "./helpers.js";

const history = fixture<HistoryResponse>("history-pre-blacklist.json");
const allocation = fixture<AllocationResponse>("allocation-pre-blacklist.json");
const infeasible = fixture<ErrorBody>("error-infeasible.json");

function session(fake: FakeService, token?: string): Session {
  return { baseUrl: "http://svc", token, fetchImpl: fake.fetch };
}

describe("request plumbing", () => {
  it("hits the expected method and path per endpoint", async () => {
    const fake = new FakeService();
    fake.on("GET", "/campaigns", { status: 200, body: { campaigns: [] } });
    fake.on("GET", "/campaigns/demo/history", { status: 200, body: history });
    fake.on("GET", "/campaigns/demo/allocation", { status: 200, body: allocation });
    fake.on("POST", "/campaigns/demo/batch", {
      status: 200,
      body: { changed: false, ...allocation },
    });
    fake.on("POST", "/campaigns/demo/arms/bravo/blacklist", {
      status: 200,
      body: { arm: "bravo", blacklisted: true, effective_epoch: 9 },
    });
    const s = session(fake);
    await listCampaigns(s);
    await getHistory(s, "demo");
    await getAllocation(s, "demo");
    await runBatch(s, "demo");
    await blacklistArm(s, "demo", "bravo");
    expect(fake.calls.map((c) => `${c.method} ${c.path}`)).toEqual([
      "GET /campaigns",
      "GET /campaigns/demo/history",
      "GET /campaigns/demo/allocation",
      "POST /campaigns/demo/batch",
      "POST /campaigns/demo/arms/bravo/blacklist",
    ]);
  });

  it("returns parsed JSON bodies untouched", async () => {
    const fake = new FakeService();
    fake.on("GET", "/campaigns/demo/history", { status: 200, body: history });
    const got = await getHistory(session(fake), "demo");
    expect(got).toEqual(history);
  });

  it("sends the floor schedule as the PUT body", async () => {
    const fake = new FakeService();
    fake.on("PUT", "/campaigns/demo/floor-schedule", {
      status: 200,
      body: { default: 0.1, entries: [], effective_epoch: 9 },
    });
    await putFloorSchedule(session(fake), "demo", { default: 0.1, entries: [] });
    const call = fake.requests("PUT", "/campaigns/demo/floor-schedule")[0]!;
    expect(call.body).toEqual({ default: 0.1, entries: [] });
    expect(call.headers["Content-Type"]).toBe("application/json");
  });

  it("attaches the api token header only when configured", async () => {
    const fake = new FakeService();
    fake.on("GET", "/campaigns", { status: 200, body: { campaigns: [] } });
    await listCampaigns(session(fake, "sesame"));
    await listCampaigns(session(fake));
    const [first, second] = fake.requests("GET", "/campaigns");
    expect(first!.headers["x-api-token"]).toBe("sesame");
    expect(second!.headers["x-api-token"]).toBeUndefined();
  });

  it("lists campaigns with their blacklists", async () => {
    const fake = new FakeService();
    fake.on("GET", "/campaigns", {
      status: 200,
      body: fixture<CampaignListResponse>("campaigns.json"),
    });
    const got = await listCampaigns(session(fake));
    const demo = got.campaigns.find((c) => c.campaign_id === "demo")!;
    expect(demo.blacklist).toEqual(["bravo"]);
  });
});

describe("error handling", () => {
  it("rethrows the server's error code and message verbatim", async () => {
    const fake = new FakeService();
    fake.on("PUT", "/campaigns/wide/floor-schedule", {
      status: 422,
      body: infeasible,
    });
    const err = await putFloorSchedule(session(fake), "wide", {
      default: 0.3,
      entries: [],
    }).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("infeasible");
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).message).toBe(infeasible.error.message);
  });

  it("falls back to the status code for non-JSON error bodies", async () => {
    const s: Session = {
      baseUrl: "http://svc",
      fetchImpl: async () =>
        new Response("<html>bad gateway</html>", { status: 502 }),
    };
    const err = await getHistory(s, "demo").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("internal");
    expect((err as ApiError).message).toBe("request failed with status 502");
  });
});
