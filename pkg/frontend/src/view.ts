/** View state reducer.
 *
 * Every field derives from service responses plus local UI selections; no
 * numeric state evolves client-side. The displayed pH is the setpoint the
 * service echoed back in the trace result, never a locally computed value.
 */

import type { Frame, TraceIteration, TraceResult } from "./types.js";

export interface ViewState {
  knobFraction: number; // local UI selection
  runningSetpoint: boolean;
  /** setpoint echoed by the service's trace result; null before any run */
  displayedPh: number | null;
  converged: boolean;
  depositEnabled: boolean;
  trace: TraceIteration[];
  frame: Frame | null;
  clock: number;
  lastError: string | null;
}

export const initialView: ViewState = {
  knobFraction: 0.5,
  runningSetpoint: false,
  displayedPh: null,
  converged: false,
  depositEnabled: false,
  trace: [],
  frame: null,
  clock: 0,
  lastError: null,
};

export type ViewAction =
  | { type: "knob"; fraction: number }
  | { type: "run-started" }
  | { type: "iteration"; iteration: TraceIteration }
  | { type: "result"; result: TraceResult }
  | { type: "frame"; frame: Frame }
  | { type: "deposited"; clock: number }
  | { type: "reset"; clock: number }
  | { type: "error"; message: string };

export function reduce(state: ViewState, action: ViewAction): ViewState {
  switch (action.type) {
    case "knob":
      return { ...state, knobFraction: Math.min(1, Math.max(0, action.fraction)) };
    case "run-started":
      return { ...state, runningSetpoint: true, trace: [], lastError: null };
    case "iteration":
      return { ...state, trace: [...state.trace, action.iteration] };
    case "result":
      return {
        ...state,
        runningSetpoint: false,
        displayedPh: action.result.setpoint,
        converged: action.result.converged,
        depositEnabled: action.result.converged,
        clock: action.result.clock,
      };
    case "frame":
      return { ...state, frame: action.frame, clock: action.frame.clock };
    case "deposited":
      return { ...state, clock: action.clock };
    case "reset":
      return {
        ...initialView,
        knobFraction: state.knobFraction,
        clock: action.clock,
      };
    case "error":
      return { ...state, runningSetpoint: false, lastError: action.message };
  }
}
