// Client-side mirrors of the server's input validation, used to reject
// obviously bad admin edits before a request is made. The server remains
// authoritative; anything that passes here can still come back rejected.

import type { FloorScheduleBody } from "./types.js";

const ID_PATTERN = /^[A-Za-z0-9_-]+$/;
const SUM_TOL = 1e-9;

function validateArmId(arm: string): string | null {
  if (arm.length === 0) {
    return "arm id must not be empty";
  }
  if (!ID_PATTERN.test(arm)) {
    return "arm id must use only letters, digits, '_' and '-'";
  }
  return null;
}

function maxFloor(schedule: FloorScheduleBody): number {
  let top = schedule.default;
  for (const [, floor] of schedule.entries) {
    if (floor > top) {
      top = floor;
    }
  }
  return top;
}

// Same checks the server runs on a floor schedule: floors live in [0, 1),
// scheduled epochs strictly increase, and K arms at the highest floor must
// still fit inside the whole allocation.
function validateFloorSchedule(
  schedule: FloorScheduleBody,
  armCount: number,
): string | null {
  const floors = [schedule.default, ...schedule.entries.map(([, f]) => f)];
  for (const floor of floors) {
    if (!Number.isFinite(floor) || floor < 0 || floor >= 1) {
      return `floor must be in [0, 1), got ${floor}`;
    }
  }
  let previous = -Infinity;
  for (const [epoch] of schedule.entries) {
    if (!Number.isInteger(epoch) || epoch <= previous) {
      return "schedule epochs must be strictly increasing";
    }
    previous = epoch;
  }
  if (armCount * maxFloor(schedule) > 1 + SUM_TOL) {
    return `floor ${maxFloor(schedule)} infeasible for ${armCount} arms`;
  }
  return null;
}

export { maxFloor, validateArmId, validateFloorSchedule };
