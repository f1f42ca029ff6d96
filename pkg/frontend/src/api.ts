/**
 * Thin client for the session service.  All traffic goes through the
 * endpoints below; fetch is injectable for tests.
 */

import { ScribbleSetJson } from "./schema.js";

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
  superpixel_count: number;
}

export interface PropagateOptions {
  use_pairwise: boolean;
  predictor: "none" | "model";
  lambda: number;
}

export interface PropagateResult {
  revision: number;
  energy: number;
  labels_url: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type Fetch = typeof globalThis.fetch;

async function fail(response: Response): Promise<never> {
  let detail = `${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, detail);
}

export class SessionClient {
  private readonly fetch: Fetch;

  constructor(readonly baseUrl: string = "", fetchImpl?: Fetch) {
    this.fetch = fetchImpl ?? globalThis.fetch.bind(globalThis);
  }

  async createSession(imageBytes: BlobPart, params: Record<string, number> = {}):
      Promise<SessionInfo> {
    const query = new URLSearchParams(
      Object.entries(params).map(([k, v]) => [k, String(v)]));
    const suffix = query.size ? `?${query}` : "";
    const r = await this.fetch(`${this.baseUrl}/sessions${suffix}`, {
      method: "POST",
      body: new Blob([imageBytes]),
    });
    if (r.status !== 201) await fail(r);
    return r.json();
  }

  async putScribbles(id: string, scribbles: ScribbleSetJson): Promise<number> {
    const r = await this.fetch(`${this.baseUrl}/sessions/${id}/scribbles`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(scribbles),
    });
    if (!r.ok) await fail(r);
    return (await r.json()).revision;
  }

  async propagate(id: string, options: PropagateOptions): Promise<PropagateResult> {
    const r = await this.fetch(`${this.baseUrl}/sessions/${id}/propagate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    });
    if (!r.ok) await fail(r);
    return r.json();
  }

  labelsUrl(id: string, revision: number): string {
    // the revision is a cache-buster only; the endpoint serves latest labels
    return `${this.baseUrl}/sessions/${id}/labels.png?rev=${revision}`;
  }

  superpixelsUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/superpixels.png`;
  }

  async deleteSession(id: string): Promise<void> {
    await this.fetch(`${this.baseUrl}/sessions/${id}`, { method: "DELETE" });
  }
}
