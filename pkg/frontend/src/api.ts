// Thin client over the summarization service. All mutations go through
// the events endpoint with the caller's known version; the server owns
// statuses and perplexities.

import type { ApiErrorBody, EditEventPayload, Session } from './types';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }

  /** Another client moved the session forward; reload and re-apply. */
  get isConflict(): boolean {
    return this.status === 409;
  }
}

type FetchLike = typeof fetch;

async function raiseForStatus(r: Response): Promise<void> {
  if (r.ok) return;
  let body: ApiErrorBody = { code: 'error', stage: null, message: r.statusText };
  try {
    body = (await r.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(r.status, body.code, body.message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = fetch,
    private readonly apiToken?: string,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.apiToken) h['x-api-token'] = this.apiToken;
    return h;
  }

  async loadSession(sessionId: string, includeHidden = false): Promise<Session> {
    const query = includeHidden ? '?include_hidden=true' : '';
    const r = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}${query}`,
      { headers: this.headers() },
    );
    await raiseForStatus(r);
    return (await r.json()) as Session;
  }

  async postEvent(
    sessionId: string,
    event: EditEventPayload,
  ): Promise<{ session_id: string; version: number }> {
    const r = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/events`, {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify(event),
    });
    await raiseForStatus(r);
    return (await r.json()) as { session_id: string; version: number };
  }

  async finalize(
    sessionId: string,
  ): Promise<{ session_id: string; state: string; version: number }> {
    const r = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/finalize`, {
      method: 'POST',
      headers: this.headers(),
    });
    await raiseForStatus(r);
    return (await r.json()) as { session_id: string; state: string; version: number };
  }
}
