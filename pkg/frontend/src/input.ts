/** Keyboard throttle/brake: bang-bang acceleration commands at 10 Hz.
 *
 * Accelerate key held -> +3 m/s^2, brake key held -> -3 m/s^2, both or
 * neither -> 0.
 */

export const ACCEL_CMD = 3.0;
export const TICK_MS = 100;

export interface KeyState {
  up: boolean;
  down: boolean;
}

export function commandFor(keys: KeyState): number {
  if (keys.up && !keys.down) return ACCEL_CMD;
  if (keys.down && !keys.up) return -ACCEL_CMD;
  return 0;
}

export class InputLoop {
  keys: KeyState = { up: false, down: false };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private send: (accel: number) => void) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.send(commandFor(this.keys)), TICK_MS);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }

  handleKey(code: string, pressed: boolean): void {
    if (code === "ArrowUp" || code === "KeyW") this.keys.up = pressed;
    if (code === "ArrowDown" || code === "KeyS") this.keys.down = pressed;
  }
}
