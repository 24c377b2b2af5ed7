// Shared test plumbing: fixture loading and a scripted fetch standing in
// for the service. Fixtures are verbatim captures from a seeded service
// run (scripts/make_fixtures.py), so shapes and messages match production.

import { readFileSync } from "node:fs";

export function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export interface RecordedCall {
  method: string;
  path: string;
  headers: Record<string, string>;
  body?: unknown;
}

interface CannedResponse {
  status: number;
  body: unknown;
}

type Responder = CannedResponse | (() => CannedResponse);

export class FakeService {
  calls: RecordedCall[] = [];
  private readonly routes = new Map<string, Responder>();

  on(method: string, path: string, responder: Responder): void {
    this.routes.set(`${method} ${path}`, responder);
  }

  requests(method: string, path: string): RecordedCall[] {
    return this.calls.filter((c) => c.method === method && c.path === path);
  }

  fetch: typeof fetch = async (input, init) => {
    const path = new URL(String(input)).pathname;
    const method = init?.method ?? "GET";
    this.calls.push({
      method,
      path,
      headers: Object.fromEntries(
        Object.entries((init?.headers ?? {}) as Record<string, string>),
      ),
      body: init?.body === undefined ? undefined : JSON.parse(String(init.body)),
    });
    const responder = this.routes.get(`${method} ${path}`);
    if (!responder) {
      return jsonResponse(404, {
        error: { code: "not_found", message: `no route for ${method} ${path}` },
      });
    }
    const canned = typeof responder === "function" ? responder() : responder;
    return jsonResponse(canned.status, canned.body);
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
