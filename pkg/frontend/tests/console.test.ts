// Campaign console flows against a scripted service. The fixtures are
// captured from a real seeded run: a three-arm campaign converging on
// "charlie" over eight batches, then "bravo" blacklisted and one more
// batch driving its weight to zero.

import { afterEach, describe, expect, it, vi } from "vitest";

import { renderSeries } from "../src/chart.js";
import type { Session } from "../src/client.js";
import { CampaignConsole, type ConsoleState } from "../src/store.js";
import type {
  AllocationResponse,
  BatchResponse,
  BlacklistResponse,
  ErrorBody,
  HistoryResponse,
} from "../src/types.js";
import { FakeService, fixture } from "./helpers.js";

const preHistory = fixture<HistoryResponse>("history-pre-blacklist.json");
const preAllocation = fixture<AllocationResponse>("allocation-pre-blacklist.json");
const pendingHistory = fixture<HistoryResponse>("history-blacklist-pending.json");
const postHistory = fixture<HistoryResponse>("history-post-blacklist.json");
const postAllocation = fixture<AllocationResponse>("allocation-post-blacklist.json");
const blacklistResponse = fixture<BlacklistResponse>("blacklist-response.json");
const batchResponse = fixture<BatchResponse>("batch-response.json");
const infeasible = fixture<ErrorBody>("error-infeasible.json");
const lastLive = fixture<ErrorBody>("error-last-live.json");

type Phase = "pre" | "pending" | "post";

// Replays the captured service lifecycle: admin actions move the phase
// forward exactly as the real server moved between captures.
function demoService(): { fake: FakeService; phase: () => Phase } {
  const fake = new FakeService();
  let phase: Phase = "pre";
  fake.on("GET", "/campaigns/demo/history", () => ({
    status: 200,
    body:
      phase === "pre" ? preHistory : phase === "pending" ? pendingHistory : postHistory,
  }));
  fake.on("GET", "/campaigns/demo/allocation", () => ({
    status: 200,
    body: phase === "post" ? postAllocation : preAllocation,
  }));
  fake.on("POST", "/campaigns/demo/arms/bravo/blacklist", () => {
    phase = "pending";
    return { status: 200, body: blacklistResponse };
  });
  fake.on("POST", "/campaigns/demo/batch", () => {
    if (phase === "pending") {
      phase = "post";
    }
    return { status: 200, body: batchResponse };
  });
  fake.on("PUT", "/campaigns/demo/floor-schedule", {
    status: 422,
    body: infeasible,
  });
  return { fake, phase: () => phase };
}

function makeConsole(
  fake: FakeService,
  options: ConstructorParameters<typeof CampaignConsole>[2] = {},
): CampaignConsole {
  const session: Session = { baseUrl: "http://svc", fetchImpl: fake.fetch };
  return new CampaignConsole(session, "demo", options);
}

afterEach(() => {
  vi.useRealTimers();
});

describe("refresh", () => {
  it("assembles the campaign view from history and allocation", async () => {
    const { fake } = demoService();
    const console_ = makeConsole(fake, { now: () => 777 });
    await console_.refresh();
    const view = console_.state.view!;
    expect(view.campaignId).toBe("demo");
    expect(view.epoch).toBe(8);
    expect(view.series.map((s) => s.arm)).toEqual(["alpha", "bravo", "charlie"]);
    expect(view.posteriors["charlie"]!.mean).toBeGreaterThan(
      view.posteriors["alpha"]!.mean,
    );
    const [lo, hi] = view.posteriors["charlie"]!.ci95;
    expect(lo).toBeLessThan(view.posteriors["charlie"]!.mean);
    expect(hi).toBeGreaterThan(view.posteriors["charlie"]!.mean);
    expect(view.allocation.weights["charlie"]).toBeCloseTo(0.9, 9);
    expect(view.pendingAdmin).toEqual([]);
    expect(console_.state.lastSync).toBe(777);
  });

  it("parks transport failures in state.error", async () => {
    const session: Session = {
      baseUrl: "http://svc",
      fetchImpl: async () => {
        throw new Error("connection refused");
      },
    };
    const console_ = new CampaignConsole(session, "demo");
    await console_.refresh();
    expect(console_.state.view).toBeNull();
    expect(console_.state.error).toBe("connection refused");
  });
});

describe("blacklist flow", () => {
  it("does nothing when the operator declines the confirmation", async () => {
    const { fake } = demoService();
    let asked = "";
    const console_ = makeConsole(fake, {
      confirm: (message) => {
        asked = message;
        return false;
      },
    });
    await console_.refresh();
    const ok = await console_.blacklistArm("bravo");
    expect(ok).toBe(false);
    expect(asked).toContain("bravo");
    expect(fake.requests("POST", "/campaigns/demo/arms/bravo/blacklist")).toEqual([]);
    expect(console_.state.pendingBlacklist).toEqual([]);
  });

  it("flags optimistically, reconciles on refresh, zeroes the arm after the next batch", async () => {
    const { fake, phase } = demoService();
    const console_ = makeConsole(fake, { confirm: () => true });
    const snapshots: ConsoleState[] = [];
    console_.subscribe((state) => snapshots.push(state));
    await console_.refresh();

    const ok = await console_.blacklistArm("bravo");
    expect(ok).toBe(true);
    // While the request was out, the view still showed no blacklist but
    // the optimistic flag was up.
    const optimistic = snapshots.find(
      (s) => s.pendingBlacklist.includes("bravo") && s.view?.blacklist.length === 0,
    );
    expect(optimistic).toBeDefined();
    // One refresh later the server state took over: flag cleared, ban
    // recorded, weights untouched until the next batch runs.
    expect(console_.state.pendingBlacklist).toEqual([]);
    expect(console_.state.view!.blacklist).toEqual(["bravo"]);
    expect(console_.state.view!.pendingAdmin).toEqual([
      { type: "blacklist", arm: "bravo", on: true, effective_epoch: 9 },
    ]);
    const bravoNow = console_.state.view!.series.find((s) => s.arm === "bravo")!;
    expect(bravoNow.blacklisted).toBe(true);
    expect(bravoNow.finalWeight).toBeCloseTo(0.05, 9);

    await console_.triggerBatch();
    expect(phase()).toBe("post");
    const view = console_.state.view!;
    expect(view.epoch).toBe(9);
    const bravo = view.series.find((s) => s.arm === "bravo")!;
    expect(bravo.finalWeight).toBe(0);
    expect(view.allocation.weights["bravo"]).toBe(0);
    const svg = renderSeries(view.series, view.campaignId);
    expect(svg).toContain('class="arm blacklisted" data-arm="bravo"');
    expect(svg).toContain('<g class="blacklist-flag" data-arm="bravo">');
  });

  it("surfaces the server's rejection of banning the last live arm", async () => {
    const fake = new FakeService();
    fake.on("GET", "/campaigns/demo/history", { status: 200, body: preHistory });
    fake.on("GET", "/campaigns/demo/allocation", { status: 200, body: preAllocation });
    fake.on("POST", "/campaigns/demo/arms/charlie/blacklist", {
      status: 422,
      body: lastLive,
    });
    const console_ = makeConsole(fake);
    await console_.refresh();
    const ok = await console_.blacklistArm("charlie");
    expect(ok).toBe(false);
    expect(console_.state.error).toBe("cannot blacklist the last live arm");
    expect(console_.state.pendingBlacklist).toEqual([]);
  });
});

describe("floor schedule editing", () => {
  it("stops an obviously infeasible edit before any request", async () => {
    const { fake } = demoService();
    const console_ = makeConsole(fake);
    await console_.refresh();
    const ok = await console_.editFloorSchedule({ default: 0.5, entries: [] });
    expect(ok).toBe(false);
    expect(console_.state.error).toBe("floor 0.5 infeasible for 3 arms");
    expect(fake.requests("PUT", "/campaigns/demo/floor-schedule")).toEqual([]);
  });

  it("surfaces the server's rejection verbatim when the mirror passes", async () => {
    // The console knows three arms, so 0.3 looks fine locally; the server
    // (authoritative, here with four arms) still refuses.
    const { fake } = demoService();
    const console_ = makeConsole(fake);
    await console_.refresh();
    const ok = await console_.editFloorSchedule({ default: 0.3, entries: [] });
    expect(ok).toBe(false);
    expect(fake.requests("PUT", "/campaigns/demo/floor-schedule")).toHaveLength(1);
    expect(console_.state.error).toBe(infeasible.error.message);
    expect(console_.state.error).toBe("floor 0.3 infeasible for 4 arms");
  });
});

describe("adding arms", () => {
  it("rejects malformed arm ids without a request", async () => {
    const { fake } = demoService();
    const console_ = makeConsole(fake);
    await console_.refresh();
    const ok = await console_.addArm("not ok!");
    expect(ok).toBe(false);
    expect(console_.state.error).toMatch(/letters, digits/);
    expect(fake.requests("POST", "/campaigns/demo/arms")).toEqual([]);
  });

  it("posts a valid arm and refreshes", async () => {
    const { fake } = demoService();
    fake.on("POST", "/campaigns/demo/arms", {
      status: 201,
      body: { arm: "delta", effective_epoch: 9 },
    });
    const console_ = makeConsole(fake);
    await console_.refresh();
    const before = fake.requests("GET", "/campaigns/demo/history").length;
    const ok = await console_.addArm("delta");
    expect(ok).toBe(true);
    const post = fake.requests("POST", "/campaigns/demo/arms")[0]!;
    expect(post.body).toEqual({ arm: "delta" });
    expect(fake.requests("GET", "/campaigns/demo/history").length).toBe(before + 1);
  });
});

describe("polling", () => {
  it("refreshes on the configured cadence until stopped", async () => {
    vi.useFakeTimers();
    const { fake } = demoService();
    const console_ = makeConsole(fake, { pollIntervalMs: 5000 });
    console_.startPolling();
    expect(fake.requests("GET", "/campaigns/demo/history")).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(5000);
    expect(fake.requests("GET", "/campaigns/demo/history")).toHaveLength(1);
    await vi.advanceTimersByTimeAsync(10_000);
    expect(fake.requests("GET", "/campaigns/demo/history")).toHaveLength(3);
    console_.stopPolling();
    await vi.advanceTimersByTimeAsync(20_000);
    expect(fake.requests("GET", "/campaigns/demo/history")).toHaveLength(3);
  });

  it("keeps a single timer across repeated start calls", async () => {
    vi.useFakeTimers();
    const { fake } = demoService();
    const console_ = makeConsole(fake, { pollIntervalMs: 5000 });
    console_.startPolling();
    console_.startPolling();
    await vi.advanceTimersByTimeAsync(5000);
    expect(fake.requests("GET", "/campaigns/demo/history")).toHaveLength(1);
    console_.stopPolling();
  });
});
