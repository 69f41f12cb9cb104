// Thin client over the edit service HTTP API. All state lives on the
// server; every mutation returns the authoritative session view.

import type {
  EditOp, GenerateResult, SampleEntry, SessionView, Vocab,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}${path}`, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class Client {
  constructor(readonly base: string = "") {}

  listSamples(split = "test"): Promise<{ split: string; samples: SampleEntry[] }> {
    return request(this.base, `/api/samples?split=${encodeURIComponent(split)}`);
  }

  vocab(): Promise<Vocab> {
    return request(this.base, "/api/vocab");
  }

  createSession(payload: { sample_id: string } | { image: string; graph: unknown })
      : Promise<SessionView> {
    return request(this.base, "/api/sessions", post(payload));
  }

  getSession(id: string): Promise<SessionView> {
    return request(this.base, `/api/sessions/${id}`);
  }

  postEdit(id: string, edit: EditOp): Promise<SessionView> {
    return request(this.base, `/api/sessions/${id}/edits`, post(edit));
  }

  generate(id: string, reseed = false): Promise<GenerateResult> {
    return request(this.base, `/api/sessions/${id}/generate`, post({ reseed }));
  }

  imageUrl(imageId: string): string {
    return `${this.base}/api/images/${imageId}.png`;
  }
}
