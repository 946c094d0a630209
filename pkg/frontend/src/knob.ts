/** Virtual knob: a fraction in [0, 1] maps linearly onto the pH 2–10 range. */

export const KNOB_PH_MIN = 2.0;
export const KNOB_PH_MAX = 10.0;

export function knobToSetpoint(fraction: number): number {
  const f = Math.min(1, Math.max(0, fraction));
  return KNOB_PH_MIN + f * (KNOB_PH_MAX - KNOB_PH_MIN);
}

export function setpointToKnob(setpoint: number): number {
  const s = Math.min(KNOB_PH_MAX, Math.max(KNOB_PH_MIN, setpoint));
  return (s - KNOB_PH_MIN) / (KNOB_PH_MAX - KNOB_PH_MIN);
}
