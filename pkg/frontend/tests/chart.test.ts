import { describe, expect, it } from "vitest";

import { buildSeries, renderSeries, renderTimeseries, stackSeries } from "../src/chart.js";
import type { HistoryResponse } from "../src/types.js";
import { fixture } from "./helpers.js";

const pre = fixture<HistoryResponse>("history-pre-blacklist.json");
const post = fixture<HistoryResponse>("history-post-blacklist.json");
const fresh = fixture<HistoryResponse>("history-fresh.json");

describe("buildSeries", () => {
  it("keeps arms sorted and aligned with the epoch axis", () => {
    const series = buildSeries(pre);
    expect(series.map((s) => s.arm)).toEqual(["alpha", "bravo", "charlie"]);
    for (const s of series) {
      expect(s.points.map((p) => p.epoch)).toEqual(
        pre.epochs.map((e) => e.epoch),
      );
    }
  });

  it("traces convergence from uniform start to the winning arm", () => {
    const series = buildSeries(pre);
    const winner = series.find((s) => s.arm === "charlie")!;
    expect(winner.points[0]!.weight).toBeCloseTo(1 / 3, 6);
    expect(winner.points[1]!.weight).toBeLessThan(0.75);
    expect(winner.finalWeight).toBeGreaterThanOrEqual(0.85);
    expect(winner.finalWeight).toBeGreaterThan(winner.points[1]!.weight);
    for (const other of series) {
      if (other.arm !== "charlie") {
        expect(other.finalWeight).toBeLessThan(winner.finalWeight);
      }
    }
  });

  it("gives arms missing from early epochs zero weight there", () => {
    const history: HistoryResponse = {
      ...fresh,
      epochs: [
        fresh.epochs[0]!,
        {
          ...fresh.epochs[0]!,
          epoch: 1,
          weights: { ...fresh.epochs[0]!.weights, d: 0.1 },
        },
      ],
    };
    const series = buildSeries(history);
    const late = series.find((s) => s.arm === "d")!;
    expect(late.points.map((p) => p.weight)).toEqual([0, 0.1]);
  });
});

describe("stackSeries", () => {
  it("stacks bands so the top edge carries the epoch total", () => {
    const series = buildSeries(pre);
    const bands = stackSeries(series);
    const top = bands[bands.length - 1]!;
    pre.epochs.forEach((entry, i) => {
      const total = Object.values(entry.weights).reduce((a, b) => a + b, 0);
      expect(top.points[i]!.upper).toBeCloseTo(total, 9);
      expect(bands[0]!.points[i]!.lower).toBe(0);
    });
  });

  it("collapses the blacklisted arm's band once the ban takes effect", () => {
    const bands = stackSeries(buildSeries(post));
    const banned = bands.find((b) => b.arm === "bravo")!;
    expect(banned.blacklisted).toBe(true);
    const last = banned.points[banned.points.length - 1]!;
    expect(last.upper - last.lower).toBe(0);
    const before = banned.points[banned.points.length - 2]!;
    expect(before.upper - before.lower).toBeGreaterThan(0);
  });
});

describe("renderTimeseries", () => {
  it("draws one area per arm for the converged campaign", () => {
    const svg = renderTimeseries(pre);
    expect((svg.match(/class="arm"/g) ?? []).length).toBe(3);
    for (const arm of ["alpha", "bravo", "charlie"]) {
      expect(svg).toContain(`data-arm="${arm}"`);
    }
    expect(svg).not.toContain("blacklisted");
  });

  it("flags the blacklisted arm at the epoch its band reaches zero", () => {
    const svg = renderTimeseries(post);
    expect(svg).toContain('class="arm blacklisted" data-arm="bravo"');
    expect(svg).toContain('<g class="blacklist-flag" data-arm="bravo">');
    expect(svg).toContain("bravo blacklisted");
    expect((svg.match(/blacklist-flag/g) ?? []).length).toBe(1);
  });

  it("renders a fresh campaign's single uniform epoch", () => {
    const svg = renderTimeseries(fresh);
    expect((svg.match(/class="arm"/g) ?? []).length).toBe(3);
    expect(svg).not.toContain("blacklist-flag");
  });

  it("falls back to a placeholder when there are no epochs", () => {
    expect(renderSeries([], "empty")).toContain("no epochs yet");
  });
});
