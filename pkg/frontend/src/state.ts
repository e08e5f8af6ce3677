/** Console state: the latest server message plus connection bookkeeping.
 *
 * Physics-free by construction — a reconnect simply resumes rendering
 * from the next state message.
 */

import type { EndMessage, ServerMessage, StateMessage } from "./protocol.js";

export const STALE_MS = 500;

export type Phase = "lobby" | "driving" | "ended" | "error";

export interface ConsoleState {
  phase: Phase;
  lastState: StateMessage | null;
  lastStateAt: number; // wall-clock ms of the last state message
  end: EndMessage | null;
  errorText: string | null;
  useMph: boolean; // display unit toggle; server values stay m/s
}

export function initialState(): ConsoleState {
  return {
    phase: "lobby",
    lastState: null,
    lastStateAt: 0,
    end: null,
    errorText: null,
    useMph: true,
  };
}

/** Fold one server message into the console state. */
export function applyMessage(
  state: ConsoleState,
  msg: ServerMessage,
  now: number,
): ConsoleState {
  if (msg.type === "state") {
    return { ...state, phase: "driving", lastState: msg, lastStateAt: now };
  }
  if (msg.type === "end") {
    return { ...state, phase: "ended", end: msg };
  }
  return { ...state, phase: "error", errorText: msg.message };
}

/** True when no state message arrived for STALE_MS while driving. */
export function isStale(state: ConsoleState, now: number): boolean {
  if (state.phase !== "driving" || state.lastState === null) return false;
  return now - state.lastStateAt > STALE_MS;
}

/** End-card rows, numerically identical to the server's end message. */
export function endCard(end: EndMessage): { label: string; value: number }[] {
  return [
    { label: "mean speed (m/s)", value: end.metrics.mu },
    { label: "speed deviation (m/s)", value: end.metrics.sigma },
    { label: "congestion factor", value: end.metrics.cf },
  ];
}
