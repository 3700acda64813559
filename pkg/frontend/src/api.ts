/** Typed client for the exploration service HTTP API. */

export interface SessionDescriptor {
  session_id: string;
  checkpoint: string;
  variant: "independent" | "guided";
  scale: number;
  lr_size: [number, number];
  hr_size: [number, number];
  region_names: string[];
  mask_png: string; // base64 palette PNG
  style: number[][] | null;
  has_guide_style: boolean;
  snapshots: string[];
  n_renders: number;
  undo_depth: number;
}

export interface CommandResult extends SessionDescriptor {
  applied?: string;
  render_index?: number;
  inputs_hash?: string;
}

export interface CheckpointInfo {
  id: string;
  scale: number;
  variant: string;
  n_regions: number;
  style_dim: number;
  has_segmentation: boolean;
}

export type Command =
  | { type: "paint"; region: number | string; stroke: [number, number][]; radius: number }
  | { type: "grow"; region: number | string; radius: number }
  | { type: "shrink"; region: number | string; radius: number }
  | { type: "transfer"; src: number | string; dst: number | string }
  | { type: "undo_mask" }
  | { type: "set_style"; data: number[][] }
  | { type: "snapshot"; name: string }
  | { type: "interpolate"; a?: string; b?: string; t: number }
  | { type: "mix"; regions: (number | string)[]; source?: string }
  | { type: "jitter"; delta?: number; seed?: number }
  | { type: "sample"; seed?: number }
  | { type: "render" };

export interface CreateSessionRequest {
  lr_png: string;
  guide_png?: string;
  mask_png?: string;
  checkpoint?: string;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: unknown };
      if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ExplorerApi {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  async listCheckpoints(): Promise<CheckpointInfo[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/checkpoints`);
    return parseOrThrow(resp);
  }

  async createSession(req: CreateSessionRequest): Promise<SessionDescriptor> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    return parseOrThrow(resp);
  }

  async getSession(id: string): Promise<SessionDescriptor> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}`);
    return parseOrThrow(resp);
  }

  async sendCommand(id: string, command: Command): Promise<CommandResult> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}/commands`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(command),
    });
    return parseOrThrow(resp);
  }

  renderUrl(id: string, index: number): string {
    return `${this.baseUrl}/sessions/${id}/renders/${index}`;
  }
}
