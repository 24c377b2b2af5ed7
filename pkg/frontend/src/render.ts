// HTML for one campaign screen, produced as a plain string from console
// state: timeseries chart, posterior table, pending actions and admin
// controls. No DOM access here, so every piece is assertable in node.

import { renderSeries, type ChartOptions } from "./chart.js";
import type { ConsoleState } from "./store.js";
import type { AdminEvent } from "./types.js";

const ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ESCAPES[ch] ?? ch);
}

export function describeAdmin(event: AdminEvent): string {
  switch (event.type) {
    case "add_arm":
      return `add arm ${event.arm} (effective epoch ${event.effective_epoch})`;
    case "blacklist":
      return (
        `${event.on ? "blacklist" : "reinstate"} ${event.arm} ` +
        `(effective epoch ${event.effective_epoch})`
      );
    case "floor_schedule":
      return `new floor schedule (effective epoch ${event.effective_epoch})`;
  }
}

function posteriorRows(state: ConsoleState): string {
  const view = state.view;
  if (!view) {
    return "";
  }
  const pending = new Set(state.pendingBlacklist);
  return view.series
    .map((s) => {
      const p = view.posteriors[s.arm];
      const cells = p
        ? `<td>${p.mean.toFixed(4)}</td>` +
          `<td>[${p.ci95[0].toFixed(4)}, ${p.ci95[1].toFixed(4)}]</td>`
        : "<td>-</td><td>-</td>";
      const badges = [
        s.blacklisted ? '<span class="badge blacklisted">blacklisted</span>' : "",
        pending.has(s.arm) && !s.blacklisted
          ? '<span class="badge pending">blacklist pending</span>'
          : "",
      ].join("");
      return (
        `<tr data-arm="${escapeHtml(s.arm)}">` +
        `<td>${escapeHtml(s.arm)}${badges}</td>` +
        `<td>${s.finalWeight.toFixed(4)}</td>${cells}` +
        `<td><button data-action="${s.blacklisted ? "reinstate" : "blacklist"}" ` +
        `data-arm="${escapeHtml(s.arm)}">` +
        `${s.blacklisted ? "reinstate" : "blacklist"}</button></td></tr>`
      );
    })
    .join("\n");
}

export function renderConsole(
  state: ConsoleState,
  chartOptions: ChartOptions = {},
): string {
  if (!state.view) {
    const error = state.error
      ? `<p class="error" role="alert">${escapeHtml(state.error)}</p>`
      : "";
    return `<section class="console loading">${error}<p>loading campaign...</p></section>`;
  }
  const view = state.view;
  const parts = [
    `<section class="console" data-campaign="${escapeHtml(view.campaignId)}">`,
    `<header><h1>${escapeHtml(view.campaignId)}</h1>` +
      `<p class="epoch">epoch ${view.epoch}</p></header>`,
  ];
  if (state.error) {
    parts.push(`<p class="error" role="alert">${escapeHtml(state.error)}</p>`);
  }
  parts.push(
    `<figure class="timeseries">${renderSeries(
      view.series,
      view.campaignId,
      chartOptions,
    )}</figure>`,
  );
  parts.push(
    "<table class=\"arms\"><thead><tr><th>arm</th><th>weight</th><th>mean</th>" +
      "<th>95% interval</th><th></th></tr></thead>" +
      `<tbody>${posteriorRows(state)}</tbody></table>`,
  );
  if (view.pendingAdmin.length > 0) {
    const items = view.pendingAdmin
      .map((a) => `<li>${escapeHtml(describeAdmin(a))}</li>`)
      .join("");
    parts.push(`<ul class="pending-admin">${items}</ul>`);
  }
  parts.push(
    '<form class="add-arm" data-form="add-arm">' +
      '<input name="arm" placeholder="new arm id"/>' +
      '<button data-action="add-arm">add arm</button></form>',
    '<form class="floor" data-form="floor">' +
      '<input name="default" placeholder="default floor"/>' +
      '<button data-action="edit-floor">set floor</button></form>',
    '<button data-action="batch">run batch now</button>',
    "</section>",
  );
  return parts.join("\n");
}
