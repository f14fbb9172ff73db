// Console wiring: WebSocket lifecycle, keyboard pedals and clutch, pointer
// stylus, the 60 Hz send loop, and the render loop. All displayed values
// come from the last parsed state message.

import { gaugeView, isStale } from "./gauges.js";
import { HandInput } from "./input.js";
import { ForceHistory } from "./history.js";
import {
  buildInputMessage,
  HelloMessage,
  parseServerMessage,
  StateMessage,
} from "./protocol.js";
import { drawBanner, drawEyeView, drawGauge, drawSparkline } from "./render.js";

const SEND_INTERVAL_MS = 16; // one frame: input latency budget

type Side = "right" | "left";

export class ConsoleApp {
  private ws: WebSocket | null = null;
  private hello: HelloMessage | null = null;
  private lastState: StateMessage | null = null;
  private lastStateAtMs = 0;
  private lastError = "";
  private focus: Side = "right";
  readonly hands: Record<Side, HandInput> = { right: new HandInput(), left: new HandInput() };
  private histories: Record<Side, ForceHistory> = {
    right: new ForceHistory(10),
    left: new ForceHistory(10),
  };
  private sendTimer: number | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private statusLine: HTMLElement,
  ) {}

  connect(url: string): void {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.setStatus(`connected to ${url}`);
    this.ws.onclose = () => {
      this.setStatus("disconnected (robots frozen server-side); refresh to reconnect");
      this.stopSendLoop();
    };
    this.ws.onerror = () => this.setStatus("connection error");
    this.ws.onmessage = (ev) => this.onMessage(String(ev.data));
    this.startSendLoop();
    this.attachInputs();
    const draw = () => {
      this.render();
      requestAnimationFrame(draw);
    };
    requestAnimationFrame(draw);
  }

  private setStatus(text: string): void {
    this.statusLine.textContent = text;
  }

  private onMessage(data: string): void {
    const msg = parseServerMessage(data);
    if (!msg) return;
    if (msg.type === "hello") {
      this.hello = msg;
      this.setStatus(`session: mode ${msg.mode}, dt ${msg.dt}s, 1/${msg.decimation} ticks`);
    } else if (msg.type === "state") {
      this.lastState = msg;
      this.lastStateAtMs = performance.now();
      for (const robot of msg.robots) {
        this.histories[robot.side].push(msg.t, robot.fs);
      }
    } else if (msg.type === "error") {
      this.lastError = msg.error;
    }
  }

  private startSendLoop(): void {
    this.sendTimer = window.setInterval(() => {
      if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return;
      const now = performance.now();
      for (const side of ["right", "left"] as Side[]) {
        const cmd = this.hands[side].sample(now);
        if (cmd === null) continue; // clutch released: stream nothing
        this.ws.send(buildInputMessage(side, cmd.v, cmd.pedal, cmd.clutch, now / 1000));
      }
    }, SEND_INTERVAL_MS);
  }

  private stopSendLoop(): void {
    if (this.sendTimer !== null) window.clearInterval(this.sendTimer);
    this.sendTimer = null;
  }

  private attachInputs(): void {
    let dragging = false;
    let origin: [number, number] = [0, 0];
    this.canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      origin = [ev.clientX, ev.clientY];
      this.canvas.setPointerCapture(ev.pointerId);
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      this.hands[this.focus].moveBy(ev.clientX - origin[0], ev.clientY - origin[1]);
    });
    const endDrag = () => {
      dragging = false;
      this.hands[this.focus].moveBy(0, 0);
    };
    this.canvas.addEventListener("pointerup", endDrag);
    this.canvas.addEventListener("pointercancel", endDrag);
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.hands[this.focus].wheelBy(Math.sign(ev.deltaY));
    });
    window.addEventListener("keydown", (ev) => {
      if (ev.repeat) return;
      const now = performance.now();
      if (ev.code === "KeyZ") this.hands.left.pedal.press(now);
      if (ev.code === "KeyM") this.hands.right.pedal.press(now);
      if (ev.code === "Space") this.hands[this.focus].setClutch(true);
      if (ev.code === "KeyF") this.focus = this.focus === "right" ? "left" : "right";
      if (ev.code === "ShiftLeft" || ev.code === "ShiftRight")
        this.hands[this.focus].setRotateModifier(true);
    });
    window.addEventListener("keyup", (ev) => {
      if (ev.code === "KeyZ") this.hands.left.pedal.release();
      if (ev.code === "KeyM") this.hands.right.pedal.release();
      if (ev.code === "Space") this.hands[this.focus].setClutch(false);
      if (ev.code === "ShiftLeft" || ev.code === "ShiftRight")
        this.hands[this.focus].setRotateModifier(false);
    });
  }

  private render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#16181d";
    ctx.fillRect(0, 0, w, h);
    if (!this.lastState || !this.hello) {
      drawBanner(ctx, w, "waiting for session...", "#888");
      return;
    }
    const stale = isStale(this.lastStateAtMs, performance.now());
    const [right, left] = this.lastState.robots;
    drawGauge(ctx, 50, 70, 36, 200, gaugeView(left), stale);
    drawGauge(ctx, w - 110, 70, 36, 200, gaugeView(right), stale);
    drawEyeView(ctx, { x: 150, y: 50, w: w - 300, h: h - 220 }, this.hello, this.lastState, this.focus);
    drawSparkline(ctx, { x: 150, y: h - 150, w: (w - 320) / 2, h: 110 }, this.histories.left, "#42a5ff");
    drawSparkline(
      ctx,
      { x: 160 + (w - 320) / 2, y: h - 150, w: (w - 320) / 2, h: 110 },
      this.histories.right,
      "#ff8c42",
    );
    if (stale) drawBanner(ctx, w, "STALE", "#d22f2f");
    if (this.lastError) {
      ctx.fillStyle = "#d27f2f";
      ctx.font = "12px monospace";
      ctx.fillText(`last server error: ${this.lastError}`, 12, h - 10);
    }
    ctx.fillStyle = "#aaa";
    ctx.font = "12px monospace";
    ctx.fillText(
      `focus: ${this.focus}  t=${this.lastState.t.toFixed(2)}s  events: ${this.lastState.events.join(" ") || "-"}`,
      12,
      16,
    );
  }
}
