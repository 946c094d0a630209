/** Canvas renderer: one rectangle per grid cell, colored from the frame's
 * Lab values; a corner tick marks gamut-clipped cells; colorless cells show
 * odor intensity as gray.
 */

import { cssColor, labToSrgb } from "./color.js";
import type { Frame } from "./types.js";

export function renderFrame(
  ctx: CanvasRenderingContext2D,
  frame: Frame,
  cellPx = 40,
): void {
  const rows = frame.color_grid.length;
  const cols = rows > 0 ? frame.color_grid[0].length : 0;
  ctx.clearRect(0, 0, cols * cellPx, rows * cellPx);
  for (let y = 0; y < rows; y++) {
    for (let x = 0; x < cols; x++) {
      const lab = frame.color_grid[y][x];
      const px = x * cellPx;
      const py = y * cellPx;
      if (lab === null) {
        const odor = frame.odor_field[y][x];
        const g = Math.round(255 * Math.max(0, 1 - odor));
        ctx.fillStyle = `rgb(${g}, ${g}, ${g})`;
        ctx.fillRect(px, py, cellPx, cellPx);
        continue;
      }
      const rgb = labToSrgb(lab);
      ctx.fillStyle = cssColor(rgb);
      ctx.fillRect(px, py, cellPx, cellPx);
      if (rgb.clipped) {
        ctx.fillStyle = "#000";
        ctx.fillRect(px + cellPx - 6, py, 6, 6);
      }
    }
  }
  ctx.strokeStyle = "#ccc";
  for (let y = 0; y <= rows; y++) {
    ctx.beginPath();
    ctx.moveTo(0, y * cellPx);
    ctx.lineTo(cols * cellPx, y * cellPx);
    ctx.stroke();
  }
  for (let x = 0; x <= cols; x++) {
    ctx.beginPath();
    ctx.moveTo(x * cellPx, 0);
    ctx.lineTo(x * cellPx, rows * cellPx);
    ctx.stroke();
  }
}
