import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { SessionClient } from "../src/net.js";
import type { ServerMessage } from "../src/protocol.js";

/** Minimal scripted WebSocket double. */
class FakeWebSocket {
  static instances: FakeWebSocket[] = [];
  static OPEN = 1;
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  readyState = 0;
  sent: string[] = [];

  constructor(public url: string) {
    FakeWebSocket.instances.push(this);
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.serverClose();
  }

  serverOpen(): void {
    this.readyState = FakeWebSocket.OPEN;
    this.onopen?.();
  }

  serverMessage(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  serverClose(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

function newClient(received: ServerMessage[], events: string[]) {
  return new SessionClient(
    "ws://test/session",
    { type: "start", policy: "osl", delta: 50, seed: 0 },
    {
      onMessage: (m) => received.push(m),
      onOpen: () => events.push("open"),
      onClose: () => events.push("close"),
    },
  );
}

describe("SessionClient", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    FakeWebSocket.instances = [];
    vi.stubGlobal("WebSocket", FakeWebSocket);
  });
  afterEach(() => {
    vi.unstubAllGlobals();
    vi.useRealTimers();
  });

  it("sends the start message on open, then forwards server messages", () => {
    const received: ServerMessage[] = [];
    const events: string[] = [];
    const client = newClient(received, events);
    client.connect();
    const ws = FakeWebSocket.instances[0];
    ws.serverOpen();
    expect(JSON.parse(ws.sent[0])).toEqual({
      type: "start",
      policy: "osl",
      delta: 50,
      seed: 0,
    });
    ws.serverMessage({ type: "error", message: "nope" });
    expect(received).toHaveLength(1);
    expect(events).toEqual(["open"]);
  });

  it("sends control frames only while the socket is open", () => {
    const client = newClient([], []);
    client.sendControl(3); // not connected yet: dropped
    client.connect();
    const ws = FakeWebSocket.instances[0];
    ws.serverOpen();
    client.sendControl(3);
    expect(ws.sent).toHaveLength(2); // start + control
    expect(JSON.parse(ws.sent[1])).toEqual({ type: "control", accel: 3 });
  });

  it("reconnects with backoff after an unexpected close", () => {
    const events: string[] = [];
    const client = newClient([], events);
    client.connect();
    FakeWebSocket.instances[0].serverOpen();
    FakeWebSocket.instances[0].serverClose();
    expect(events).toEqual(["open", "close"]);
    expect(FakeWebSocket.instances).toHaveLength(1);
    vi.advanceTimersByTime(500);
    expect(FakeWebSocket.instances).toHaveLength(2);
    // second failure backs off to 1000 ms
    FakeWebSocket.instances[1].serverClose();
    vi.advanceTimersByTime(999);
    expect(FakeWebSocket.instances).toHaveLength(2);
    vi.advanceTimersByTime(1);
    expect(FakeWebSocket.instances).toHaveLength(3);
  });

  it("does not reconnect after a user-initiated close", () => {
    const client = newClient([], []);
    client.connect();
    FakeWebSocket.instances[0].serverOpen();
    client.close();
    vi.advanceTimersByTime(60000);
    expect(FakeWebSocket.instances).toHaveLength(1);
  });
});
