/** Entry point: wires the session socket, keyboard input, and canvas
 * rendering together. All physics comes from the server.
 */

import { InputLoop } from "./input.js";
import { SessionClient } from "./net.js";
import { applyMessage, endCard, initialState, isStale } from "./state.js";
import { drawGauge, gaugeLayout } from "./speedometer.js";
import { drawRing, ringLayout } from "./ring.js";

const params = new URLSearchParams(window.location.search);
// ring circumference is display-only (position -> angle); override with ?L=
const CIRCUMFERENCE = Number(params.get("L") ?? 628);
const POLICY = params.get("policy") ?? "osl";
const DELTA = Number(params.get("delta") ?? 50);
const SEED = Number(params.get("seed") ?? 0);
const WS_URL = `ws://${window.location.host}/session`;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const overlay = document.getElementById("overlay")!;

let state = initialState();

const client = new SessionClient(
  WS_URL,
  { type: "start", policy: POLICY, delta: DELTA, seed: SEED },
  {
    onMessage: (msg) => {
      state = applyMessage(state, msg, performance.now());
      if (msg.type === "end") input.stop();
    },
    onOpen: () => input.start(),
    onClose: () => input.stop(), // socket closed -> input disabled
  },
);

const input = new InputLoop((accel) => client.sendControl(accel));

window.addEventListener("keydown", (ev) => {
  if (ev.code === "KeyU") {
    state = { ...state, useMph: !state.useMph };
    return;
  }
  if (ev.code === "Escape") {
    client.abort();
    return;
  }
  input.handleKey(ev.code, true);
});
window.addEventListener("keyup", (ev) => input.handleKey(ev.code, false));

function egoIndex(): number {
  const s = state.lastState!;
  return s.vehicles.findIndex(
    (veh) => veh.pos === s.ego.pos && veh.v === s.ego.v,
  );
}

function render(): void {
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, w, h);

  if (state.phase === "driving" && state.lastState !== null) {
    const s = state.lastState;
    drawGauge(
      ctx,
      gaugeLayout(s.ego.v, s.advice.v, state.useMph),
      w * 0.27,
      h * 0.5,
      Math.min(w, h) * 0.3,
    );
    drawRing(
      ctx,
      ringLayout(s.vehicles, egoIndex(), CIRCUMFERENCE, 15),
      w * 0.73,
      h * 0.5,
      Math.min(w, h) * 0.32,
    );
    overlay.textContent = isStale(state, performance.now())
      ? "connection lost"
      : "";
  } else if (state.phase === "ended" && state.end !== null) {
    ctx.fillStyle = "#eee";
    ctx.font = "24px sans-serif";
    ctx.textAlign = "center";
    const rows = endCard(state.end);
    ctx.fillText(
      state.end.collided ? "trial ended: collision" : "trial complete",
      w / 2,
      h / 2 - 60,
    );
    rows.forEach((row, i) => {
      ctx.fillText(`${row.label}: ${row.value.toFixed(3)}`, w / 2, h / 2 + i * 34);
    });
  } else if (state.phase === "error") {
    overlay.textContent = state.errorText ?? "session error";
  } else {
    overlay.textContent = "connecting…";
  }
  requestAnimationFrame(render);
}

client.connect();
requestAnimationFrame(render);
