/** CIELAB (D65) to sRGB display conversion with a gamut-clip indicator.
 *
 * Display-only: converts Lab values received from the service; no material
 * state is computed here.
 */

import type { Lab } from "./types.js";

const XN = 0.95047;
const YN = 1.0;
const ZN = 1.08883;
const EPS = 216 / 24389;
const KAPPA = 24389 / 27;

function finv(t: number): number {
  const t3 = t * t * t;
  return t3 > EPS ? t3 : (116 * t - 16) / KAPPA;
}

function gamma(u: number): number {
  return u <= 0.0031308 ? 12.92 * u : 1.055 * Math.pow(u, 1 / 2.4) - 0.055;
}

export interface Rgb {
  r: number;
  g: number;
  b: number;
  /** true when the Lab color fell outside the sRGB gamut and was clipped */
  clipped: boolean;
}

export function labToSrgb([L, a, b]: Lab): Rgb {
  const fy = (L + 16) / 116;
  const fx = fy + a / 500;
  const fz = fy - b / 200;
  const x = XN * finv(fx);
  const y = YN * (L > KAPPA * EPS ? fy * fy * fy : L / KAPPA);
  const z = ZN * finv(fz);

  const rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const gl = -0.969266 * x + 1.8760108 * y + 0.041556 * z;
  const bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;

  // tolerance absorbs rounding in the matrix constants at the gamut edge
  const clipped = [rl, gl, bl].some((u) => u < -1e-6 || u > 1 + 1e-6);
  const clamp = (u: number) => Math.min(1, Math.max(0, u));
  return {
    r: Math.round(255 * gamma(clamp(rl))),
    g: Math.round(255 * gamma(clamp(gl))),
    b: Math.round(255 * gamma(clamp(bl))),
    clipped,
  };
}

export function cssColor(rgb: Rgb): string {
  return `rgb(${rgb.r}, ${rgb.g}, ${rgb.b})`;
}
