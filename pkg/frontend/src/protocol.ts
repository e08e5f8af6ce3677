/** Wire schema shared with the drive server, plus display predicates.
 *
 * The console never simulates: every rendered value comes from a server
 * state message.
 */

export interface VehicleState {
  pos: number;
  v: number;
}

export interface StateMessage {
  type: "state";
  t: number;
  ego: { v: number; pos: number };
  advice: { v: number; band: number };
  vehicles: VehicleState[];
  phase: string;
}

export interface EndMessage {
  type: "end";
  metrics: { mu: number; sigma: number; cf: number };
  collided: boolean;
  partial: boolean;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = StateMessage | EndMessage | ErrorMessage;

export interface StartMessage {
  type: "start";
  policy: string;
  delta: number;
  seed: number;
}

export interface ControlMessage {
  type: "control";
  accel: number;
}

export const BAND_HALF_WIDTH = 1.0;
export const MPH_PER_MS = 2.23694;

/** Mirror of the server's advice display predicate. */
export function withinBand(vEgo: number, advice: number): boolean {
  return Math.abs(vEgo - advice) <= BAND_HALF_WIDTH;
}

/** Green band edges around the red line, clamped below at zero. */
export function bandRange(advice: number): [number, number] {
  return [Math.max(0, advice - BAND_HALF_WIDTH), advice + BAND_HALF_WIDTH];
}

export function msToMph(ms: number): number {
  return ms * MPH_PER_MS;
}

export function parseServerMessage(raw: string): ServerMessage {
  const msg = JSON.parse(raw);
  if (msg.type !== "state" && msg.type !== "end" && msg.type !== "error") {
    throw new Error(`unknown message type ${msg.type}`);
  }
  return msg as ServerMessage;
}
