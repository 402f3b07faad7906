/** Thin JSON client with a latest-request guard.
 *
 * Each panel keeps at most one in-flight request; when responses arrive out
 * of order, only the one matching the most recent token is applied.
 */

import type { ApiErrorDetail, ApiResult } from "./types.js";

export type FetchLike = (url: string, init: RequestInit) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  async post<T>(path: string, body: unknown): Promise<ApiResult<T>> {
    let response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      return {
        ok: false,
        status: 0,
        error: { code: "network", message: err instanceof Error ? err.message : String(err) },
      };
    }
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const error = (payload?.error ?? {
        code: "http_error",
        message: `request failed with status ${response.status}`,
      }) as ApiErrorDetail;
      return { ok: false, status: response.status, error };
    }
    return { ok: true, data: payload as T };
  }
}

export class LatestRequestGuard {
  private token = 0;

  begin(): number {
    this.token += 1;
    return this.token;
  }

  isCurrent(token: number): boolean {
    return token === this.token;
  }
}
