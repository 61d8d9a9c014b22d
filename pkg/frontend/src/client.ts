import type {
  ContourDoc,
  EditPayload,
  HedDoc,
  SessionDoc,
  SweepRequest,
  SweepResponse,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the HTTP status and the service's `detail` message. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly errorId?: string,
  ) {
    super(`service replied ${status}: ${detail}`);
    this.name = 'ServiceError';
  }
}

async function raiseFor(res: Response): Promise<never> {
  let detail = res.statusText || `HTTP ${res.status}`;
  let errorId: string | undefined;
  try {
    const body = await res.json();
    if (typeof body?.detail === 'string') detail = body.detail;
    if (typeof body?.error_id === 'string') errorId = body.error_id;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(res.status, detail, errorId);
}

/**
 * Thin REST wrapper over the session service, one method per endpoint.
 *
 * The fetch implementation is injectable so tests can run against an
 * in-memory stand-in without opening sockets.
 */
export class ServiceClient {
  private readonly fetchFn: FetchLike;

  constructor(readonly baseUrl: string = '', fetchFn?: FetchLike) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'content-type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) await raiseFor(res);
    if (res.status === 204) return undefined as T;
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request('GET', '/health');
  }

  /** Create a session whose ED is predicted from a phone string. */
  createFromText(text: string, speaker?: string): Promise<SessionDoc> {
    const body: Record<string, unknown> = { text };
    if (speaker !== undefined) body.speaker = speaker;
    return this.request('POST', '/sessions', body);
  }

  /** Create a session around an already extracted ED. */
  createFromHed(
    hed: HedDoc,
    words: string[][],
    mode?: string,
    speaker?: string,
  ): Promise<SessionDoc> {
    const body: Record<string, unknown> = { hed, words };
    if (mode !== undefined) body.mode = mode;
    if (speaker !== undefined) body.speaker = speaker;
    return this.request('POST', '/sessions', body);
  }

  getSession(id: string): Promise<SessionDoc> {
    return this.request('GET', `/sessions/${id}`);
  }

  edit(id: string, payload: EditPayload): Promise<SessionDoc> {
    return this.request('POST', `/sessions/${id}/edits`, payload);
  }

  sweep(id: string, req: SweepRequest): Promise<SweepResponse> {
    return this.request('POST', `/sessions/${id}/sweep`, req);
  }

  contour(
    id: string,
    speaker?: string,
  ): Promise<{ session_id: string; contour: ContourDoc }> {
    const query = speaker ? `?speaker=${encodeURIComponent(speaker)}` : '';
    return this.request('GET', `/sessions/${id}/contour${query}`);
  }

  save(id: string): Promise<{ session_id: string; path: string }> {
    return this.request('POST', `/sessions/${id}/save`);
  }

  remove(id: string): Promise<void> {
    return this.request('DELETE', `/sessions/${id}`);
  }
}
