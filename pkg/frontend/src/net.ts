/** WebSocket session client with automatic reconnect.
 *
 * The console is stateless with respect to physics, so reconnecting
 * mid-trial just resumes rendering from the next state message.
 */

import type { ServerMessage, StartMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";

export interface SessionHooks {
  onMessage: (msg: ServerMessage) => void;
  onOpen: () => void;
  onClose: () => void;
}

export class SessionClient {
  private ws: WebSocket | null = null;
  private retryMs = 500;
  private closedByUser = false;

  constructor(
    private url: string,
    private start: StartMessage,
    private hooks: SessionHooks,
  ) {}

  connect(): void {
    this.closedByUser = false;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.retryMs = 500;
      ws.send(JSON.stringify(this.start));
      this.hooks.onOpen();
    };
    ws.onmessage = (ev) => this.hooks.onMessage(parseServerMessage(ev.data));
    ws.onclose = () => {
      this.ws = null;
      this.hooks.onClose();
      if (!this.closedByUser) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
  }

  get open(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  sendControl(accel: number): void {
    if (this.open) {
      this.ws!.send(JSON.stringify({ type: "control", accel }));
    }
  }

  abort(): void {
    if (this.open) {
      this.ws!.send(JSON.stringify({ type: "abort" }));
    }
  }

  close(): void {
    this.closedByUser = true;
    this.ws?.close();
  }
}
