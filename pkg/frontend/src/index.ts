// Public surface of the console plus the small piece of browser glue that
// binds a CampaignConsole to a DOM element.

import { renderConsole } from "./render.js";
import { CampaignConsole } from "./store.js";

export { ApiError } from "./client.js";
export type { Session } from "./client.js";
export {
  addArm,
  blacklistArm,
  getAllocation,
  getHistory,
  listCampaigns,
  putFloorSchedule,
  reinstateArm,
  runBatch,
} from "./client.js";
export {
  buildSeries,
  renderSeries,
  renderTimeseries,
  stackSeries,
  type Band,
  type BandPoint,
  type ChartOptions,
} from "./chart.js";
export { maxFloor, validateArmId, validateFloorSchedule } from "./feasibility.js";
export { describeAdmin, escapeHtml, renderConsole } from "./render.js";
export {
  buildView,
  CampaignConsole,
  DEFAULT_POLL_INTERVAL_MS,
  type ConsoleOptions,
  type ConsoleState,
} from "./store.js";
export type * from "./types.js";

// Renders into `root`, re-renders on every state change, polls until the
// returned teardown runs. Confirmation for destructive actions goes
// through options.confirm (window.confirm by default, supplied by the
// caller constructing the CampaignConsole).
export function mountConsole(root: HTMLElement, console: CampaignConsole): () => void {
  const rerender = () => {
    root.innerHTML = renderConsole(console.state);
  };
  const onClick = (event: Event) => {
    const target = (event.target as Element | null)?.closest("[data-action]");
    if (!target) {
      return;
    }
    event.preventDefault();
    const arm = target.getAttribute("data-arm") ?? "";
    switch (target.getAttribute("data-action")) {
      case "blacklist":
        void console.blacklistArm(arm);
        break;
      case "reinstate":
        void console.reinstateArm(arm);
        break;
      case "add-arm": {
        const input = root.querySelector<HTMLInputElement>(
          '[data-form="add-arm"] input[name="arm"]',
        );
        if (input) {
          void console.addArm(input.value.trim());
        }
        break;
      }
      case "edit-floor": {
        const input = root.querySelector<HTMLInputElement>(
          '[data-form="floor"] input[name="default"]',
        );
        if (input) {
          void console.editFloorSchedule({
            default: Number(input.value),
            entries: [],
          });
        }
        break;
      }
      case "batch":
        void console.triggerBatch();
        break;
    }
  };
  const unsubscribe = console.subscribe(rerender);
  root.addEventListener("click", onClick);
  rerender();
  void console.refresh();
  console.startPolling();
  return () => {
    console.stopPolling();
    unsubscribe();
    root.removeEventListener("click", onClick);
  };
}
