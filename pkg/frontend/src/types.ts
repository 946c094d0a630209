/** Wire types mirroring the /v1 service payloads. */

export type Lab = [number, number, number];

export interface SceneDescription {
  name: string;
  width: number;
  height: number;
  clock: number;
  cells: {
    method: string;
    parts: string[];
    cloaked: boolean;
    responsive: boolean;
    thickness_factor: number;
  }[][];
  hinges: { hinge_id: string; cells: [number, number][] }[];
  channels: { channel_id: string; length_m: number; n_cells: number }[];
  pending_events: number;
  version: string;
}

export interface Frame {
  time: number;
  color_grid: (Lab | null)[][];
  angles: { hinge_id: string; degrees: number }[];
  odor_field: number[][];
  aggregate_odor: number;
  clock: number;
}

export interface TraceIteration {
  index: number;
  pump_ratio: number;
  true_ph: number;
  measured_ph: number;
}

export interface TraceResult {
  setpoint: number;
  rng_seed: number;
  converged: boolean;
  clock: number;
}

export interface DomainError {
  error: string;
  message: string;
  clock: number;
}
