/** Speedometer gauge layout: green advised band, red advice line, needle,
 * and the numeric speed readout (green when within the band).
 *
 * Layout is computed as pure data so it can be tested without a canvas;
 * drawing is a thin projection of the layout.
 */

import { bandRange, msToMph, withinBand } from "./protocol.js";

export const GAUGE_MIN = 0;
export const GAUGE_MAX = 35; // m/s, matches the advice grid ceiling
const START_ANGLE = 0.75 * Math.PI; // gauge sweeps 270 degrees
const SWEEP = 1.5 * Math.PI;

export interface GaugeLayout {
  needleAngle: number;
  bandStartAngle: number;
  bandEndAngle: number;
  redLineAngle: number;
  speedText: string;
  unitText: string;
  textColor: "green" | "white";
}

export function speedToAngle(v: number): number {
  const frac = Math.min(Math.max(v, GAUGE_MIN), GAUGE_MAX) / GAUGE_MAX;
  return START_ANGLE + frac * SWEEP;
}

export function formatSpeed(vMs: number, useMph: boolean): string {
  const value = useMph ? msToMph(vMs) : vMs;
  return value.toFixed(1);
}

export function gaugeLayout(
  vEgo: number,
  advice: number,
  useMph: boolean,
): GaugeLayout {
  const [lo, hi] = bandRange(advice);
  return {
    needleAngle: speedToAngle(vEgo),
    bandStartAngle: speedToAngle(lo),
    bandEndAngle: speedToAngle(hi),
    redLineAngle: speedToAngle(advice),
    speedText: formatSpeed(vEgo, useMph),
    unitText: useMph ? "mph" : "m/s",
    textColor: withinBand(vEgo, advice) ? "green" : "white",
  };
}

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  layout: GaugeLayout,
  cx: number,
  cy: number,
  radius: number,
): void {
  ctx.save();
  ctx.lineWidth = radius * 0.06;
  ctx.strokeStyle = "#444";
  ctx.beginPath();
  ctx.arc(cx, cy, radius, START_ANGLE, START_ANGLE + SWEEP);
  ctx.stroke();

  ctx.strokeStyle = "#2e9e4f";
  ctx.lineWidth = radius * 0.12;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, layout.bandStartAngle, layout.bandEndAngle);
  ctx.stroke();

  ctx.strokeStyle = "#d0342c";
  ctx.lineWidth = radius * 0.03;
  ctx.beginPath();
  ctx.moveTo(
    cx + 0.85 * radius * Math.cos(layout.redLineAngle),
    cy + 0.85 * radius * Math.sin(layout.redLineAngle),
  );
  ctx.lineTo(
    cx + 1.08 * radius * Math.cos(layout.redLineAngle),
    cy + 1.08 * radius * Math.sin(layout.redLineAngle),
  );
  ctx.stroke();

  ctx.strokeStyle = "#eee";
  ctx.lineWidth = radius * 0.025;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(
    cx + 0.8 * radius * Math.cos(layout.needleAngle),
    cy + 0.8 * radius * Math.sin(layout.needleAngle),
  );
  ctx.stroke();

  ctx.fillStyle = layout.textColor === "green" ? "#3ddc68" : "#ffffff";
  ctx.font = `${Math.round(radius * 0.32)}px sans-serif`;
  ctx.textAlign = "center";
  ctx.fillText(layout.speedText, cx, cy + radius * 0.55);
  ctx.font = `${Math.round(radius * 0.14)}px sans-serif`;
  ctx.fillStyle = "#999";
  ctx.fillText(layout.unitText, cx, cy + radius * 0.72);
  ctx.restore();
}
