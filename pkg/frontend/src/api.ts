/** Typed client for the /v1 scene service; the playground's only data source. */

import { consumeSse } from "./sse.js";
import type {
  DomainError,
  Frame,
  SceneDescription,
  TraceIteration,
  TraceResult,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly payload: DomainError | null,
  ) {
    super(payload ? `${payload.error}: ${payload.message}` : `HTTP ${status}`);
  }
}

async function jsonOrThrow<T>(res: Response): Promise<T> {
  if (res.ok) return (await res.json()) as T;
  let payload: DomainError | null = null;
  try {
    payload = (await res.json()) as DomainError;
  } catch {
    /* non-JSON error body */
  }
  throw new ServiceError(res.status, payload);
}

export class PhkitClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  getScene(): Promise<SceneDescription> {
    return fetch(this.url("/scene")).then((r) => jsonOrThrow<SceneDescription>(r));
  }

  getFrame(): Promise<Frame> {
    return fetch(this.url("/frame")).then((r) => jsonOrThrow<Frame>(r));
  }

  /** Run the controller; iterations stream in, the promise resolves with the result. */
  async runSetpoint(
    target: number,
    seed: number,
    onIteration: (it: TraceIteration) => void,
  ): Promise<TraceResult> {
    const res = await fetch(this.url("/setpoint"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, seed }),
    });
    if (!res.ok) return jsonOrThrow<TraceResult>(res);
    let result: TraceResult | null = null;
    await consumeSse(res.body!, (ev) => {
      if (ev.event === "iteration") onIteration(JSON.parse(ev.data) as TraceIteration);
      else if (ev.event === "result") result = JSON.parse(ev.data) as TraceResult;
    });
    if (!result) throw new ServiceError(502, null);
    return result;
  }

  deposit(mode: string, targets: unknown = null): Promise<{ deposited: boolean; clock: number }> {
    return fetch(this.url("/deposit"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mode, targets }),
    }).then((r) => jsonOrThrow(r));
  }

  step(dt: number): Promise<{ clock: number }> {
    return fetch(this.url("/step"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dt }),
    }).then((r) => jsonOrThrow(r));
  }

  reset(): Promise<{ clock: number }> {
    return fetch(this.url("/reset"), { method: "POST" }).then((r) => jsonOrThrow(r));
  }

  /** Stream frames; resolves when the server closes or `limit` frames arrive. */
  async streamFrames(
    onFrame: (frame: Frame) => void,
    rate = 10,
    limit?: number,
  ): Promise<void> {
    const q = limit === undefined ? `rate=${rate}` : `rate=${rate}&limit=${limit}`;
    const res = await fetch(this.url(`/events?${q}`));
    if (!res.ok) throw new ServiceError(res.status, null);
    await consumeSse(res.body!, (ev) => {
      if (ev.event === "frame") onFrame(JSON.parse(ev.data) as Frame);
    });
  }
}
