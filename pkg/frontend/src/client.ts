// Thin fetch wrapper over the service HTTP API. Every non-2xx response
// carries {"error": {code, message}}; the message is surfaced verbatim so
// operators see exactly what the server said.

import type {
  AddArmResponse,
  AllocationResponse,
  BatchResponse,
  BlacklistResponse,
  CampaignListResponse,
  ErrorBody,
  FloorScheduleBody,
  FloorScheduleResponse,
  HistoryResponse,
} from "./types.js";

export interface Session {
  baseUrl: string;
  token?: string;
  fetchImpl?: typeof fetch;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

async function request<T>(
  session: Session,
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const doFetch = session.fetchImpl ?? fetch;
  const headers: Record<string, string> = {};
  if (body !== undefined) {
    headers["Content-Type"] = "application/json";
  }
  if (session.token) {
    headers["x-api-token"] = session.token;
  }
  const response = await doFetch(session.baseUrl + path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!response.ok) {
    let code = "internal";
    let message = `request failed with status ${response.status}`;
    try {
      const parsed = (await response.json()) as ErrorBody;
      code = parsed.error.code;
      message = parsed.error.message;
    } catch {
      // non-JSON error body: keep the status fallback
    }
    throw new ApiError(code, message, response.status);
  }
  return (await response.json()) as T;
}

async function listCampaigns(session: Session): Promise<CampaignListResponse> {
  return request(session, "GET", "/campaigns");
}

async function getAllocation(
  session: Session,
  campaignId: string,
): Promise<AllocationResponse> {
  return request(session, "GET", `/campaigns/${campaignId}/allocation`);
}

async function getHistory(
  session: Session,
  campaignId: string,
): Promise<HistoryResponse> {
  return request(session, "GET", `/campaigns/${campaignId}/history`);
}

async function runBatch(
  session: Session,
  campaignId: string,
): Promise<BatchResponse> {
  return request(session, "POST", `/campaigns/${campaignId}/batch`);
}

async function addArm(
  session: Session,
  campaignId: string,
  arm: string,
): Promise<AddArmResponse> {
  return request(session, "POST", `/campaigns/${campaignId}/arms`, { arm });
}

async function blacklistArm(
  session: Session,
  campaignId: string,
  arm: string,
): Promise<BlacklistResponse> {
  return request(session, "POST", `/campaigns/${campaignId}/arms/${arm}/blacklist`);
}

async function reinstateArm(
  session: Session,
  campaignId: string,
  arm: string,
): Promise<BlacklistResponse> {
  return request(session, "DELETE", `/campaigns/${campaignId}/arms/${arm}/blacklist`);
}

async function putFloorSchedule(
  session: Session,
  campaignId: string,
  schedule: FloorScheduleBody,
): Promise<FloorScheduleResponse> {
  return request(session, "PUT", `/campaigns/${campaignId}/floor-schedule`, schedule);
}

export {
  addArm,
  blacklistArm,
  getAllocation,
  getHistory,
  listCampaigns,
  putFloorSchedule,
  reinstateArm,
  runBatch,
};
