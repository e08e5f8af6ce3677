/** Top-down ring view: vehicles as arcs placed by track position and
 * colored by speed, ego highlighted.
 */

import type { VehicleState } from "./protocol.js";

export interface RingArc {
  angle: number;
  color: string;
  isEgo: boolean;
}

/** Track position -> angle around the ring: 2*pi*pos/L. */
export function posToAngle(pos: number, circumference: number): number {
  return (2 * Math.PI * pos) / circumference;
}

/** Slow traffic shades red, free flow shades cyan. */
export function speedColor(v: number, vScale: number): string {
  const frac = Math.min(Math.max(v / vScale, 0), 1);
  const hue = Math.round(frac * 180); // 0 = red, 180 = cyan
  return `hsl(${hue}, 80%, 55%)`;
}

export function ringLayout(
  vehicles: VehicleState[],
  egoIndex: number,
  circumference: number,
  vScale: number,
): RingArc[] {
  return vehicles.map((veh, i) => ({
    angle: posToAngle(veh.pos, circumference),
    color: speedColor(veh.v, vScale),
    isEgo: i === egoIndex,
  }));
}

export function drawRing(
  ctx: CanvasRenderingContext2D,
  arcs: RingArc[],
  cx: number,
  cy: number,
  radius: number,
): void {
  ctx.save();
  ctx.strokeStyle = "#333";
  ctx.lineWidth = radius * 0.12;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, 0, 2 * Math.PI);
  ctx.stroke();
  for (const arc of arcs) {
    const x = cx + radius * Math.cos(arc.angle);
    const y = cy - radius * Math.sin(arc.angle); // counter-clockwise travel
    ctx.fillStyle = arc.color;
    ctx.beginPath();
    ctx.arc(x, y, radius * (arc.isEgo ? 0.09 : 0.06), 0, 2 * Math.PI);
    ctx.fill();
    if (arc.isEgo) {
      ctx.strokeStyle = "#fff";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
  ctx.restore();
}
