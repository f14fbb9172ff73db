// Canvas drawing for gauges, switch lamps, the top-down eye view, and the
// force-history sparkline. Pure presentation: all values come from the
// gauge/history view models.

import { AMBER_MARK_MN, RED_MARK_MN, GaugeView } from "./gauges.js";
import type { ForceHistory } from "./history.js";
import type { HelloMessage, StateMessage } from "./protocol.js";

const GAUGE_FULL_SCALE_MN = 200;

const ZONE_COLORS = { normal: "#3fa34d", amber: "#e0a800", red: "#d22f2f" };

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  w: number,
  h: number,
  view: GaugeView,
  stale: boolean,
): void {
  ctx.save();
  ctx.strokeStyle = "#888";
  ctx.strokeRect(x, y, w, h);
  const frac = Math.min(1, Math.max(0, view.fs / GAUGE_FULL_SCALE_MN));
  ctx.fillStyle = stale ? "#666" : ZONE_COLORS[view.zone];
  ctx.fillRect(x, y + h * (1 - frac), w, h * frac);
  for (const [mark, color] of [
    [AMBER_MARK_MN, ZONE_COLORS.amber],
    [RED_MARK_MN, ZONE_COLORS.red],
  ] as Array<[number, string]>) {
    const my = y + h * (1 - mark / GAUGE_FULL_SCALE_MN);
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(x - 4, my);
    ctx.lineTo(x + w + 4, my);
    ctx.stroke();
  }
  ctx.fillStyle = stale ? "#666" : "#ddd";
  ctx.font = "12px monospace";
  ctx.fillText(`${view.side} Fs ${view.fs.toFixed(1)} mN`, x - 8, y + h + 16);
  ctx.fillText(`Ft ${view.ft.toFixed(1)} depth ${view.depth.toFixed(1)}`, x - 8, y + h + 30);
  // switch lamps
  for (const [i, lit, label] of [
    [0, view.lampX, "dx"],
    [1, view.lampY, "dy"],
  ] as Array<[number, boolean, string]>) {
    const cx = x + 8 + i * 26;
    ctx.beginPath();
    ctx.arc(cx, y - 14, 7, 0, Math.PI * 2);
    ctx.fillStyle = lit && !stale ? "#ffcf40" : "#333";
    ctx.fill();
    ctx.strokeStyle = "#888";
    ctx.stroke();
    ctx.fillStyle = "#aaa";
    ctx.fillText(label, cx - 7, y - 26);
  }
  // pedal bar
  ctx.fillStyle = "#2e6da4";
  ctx.fillRect(x + w + 10, y + h * (1 - view.pedal), 6, h * view.pedal);
  ctx.strokeStyle = "#555";
  ctx.strokeRect(x + w + 10, y, 6, h);
  ctx.restore();
}

function rotateByRotvec(v: number[], rv: number[]): number[] {
  // Rodrigues rotation of a vector; the one geometric helper the overlay
  // needs to place eye-fixed markers with the server-reported orientation.
  const angle = Math.hypot(rv[0], rv[1], rv[2]);
  if (angle < 1e-12) return v;
  const k = rv.map((x) => x / angle);
  const cos = Math.cos(angle);
  const sin = Math.sin(angle);
  const cross = [
    k[1] * v[2] - k[2] * v[1],
    k[2] * v[0] - k[0] * v[2],
    k[0] * v[1] - k[1] * v[0],
  ];
  const dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
  return v.map((x, i) => x * cos + cross[i] * sin + k[i] * dot * (1 - cos));
}

export function drawEyeView(
  ctx: CanvasRenderingContext2D,
  rect: { x: number; y: number; w: number; h: number },
  hello: HelloMessage,
  state: StateMessage,
  focusSide: "right" | "left",
): void {
  const scene = hello.scene;
  if (!scene) return;
  const scale = (0.4 * Math.min(rect.w, rect.h)) / scene.radius;
  const cx = rect.x + rect.w / 2;
  const cy = rect.y + rect.h / 2;
  const toScreen = (p: number[]): [number, number] => [
    cx + (p[0] - scene.center[0]) * scale,
    cy - (p[1] - scene.center[1]) * scale,
  ];
  ctx.save();
  ctx.strokeStyle = "#789";
  ctx.beginPath();
  ctx.arc(cx, cy, scene.radius * scale, 0, Math.PI * 2);
  ctx.stroke();
  const rv = state.eye_rotvec ?? [0, 0, 0];
  const colors = hello.colors ?? ["red", "green", "blue", "yellow"];
  scene.pins.forEach((dir, i) => {
    const world = rotateByRotvec(dir.map((d) => d * scene.retina_radius), rv);
    const [px, py] = toScreen(world.map((w, j) => w + scene.center[j]));
    ctx.fillStyle = colors[i] ?? "#fff";
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, Math.PI * 2);
    ctx.fill();
  });
  const startWorld = rotateByRotvec(scene.start.map((d) => d * scene.retina_radius), rv);
  const [sx, sy] = toScreen(startWorld.map((w, j) => w + scene.center[j]));
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(sx - 4, sy - 4, 8, 8);
  scene.ports.forEach((dir) => {
    const world = rotateByRotvec(dir.map((d) => d * scene.radius), rv);
    const [px, py] = toScreen(world.map((w, j) => w + scene.center[j]));
    ctx.fillStyle = "#9ab";
    ctx.fillRect(px - 3, py - 3, 6, 6);
  });
  for (const robot of state.robots) {
    const [tx, ty] = toScreen(robot.tip);
    ctx.fillStyle = robot.side === "right" ? "#ff8c42" : "#42a5ff";
    ctx.beginPath();
    ctx.arc(tx, ty, robot.side === focusSide ? 6 : 4, 0, Math.PI * 2);
    ctx.fill();
    if (robot.side === focusSide) {
      ctx.strokeStyle = "#fff";
      ctx.stroke();
    }
  }
  ctx.restore();
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  rect: { x: number; y: number; w: number; h: number },
  history: ForceHistory,
  color: string,
): void {
  const samples = history.values();
  if (samples.length < 2) return;
  const span = history.span();
  if (!span || span[1] === span[0]) return;
  const fullScale = Math.max(GAUGE_FULL_SCALE_MN, history.max());
  ctx.save();
  ctx.strokeStyle = "#444";
  ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
  for (const [mark, c] of [
    [AMBER_MARK_MN, ZONE_COLORS.amber],
    [RED_MARK_MN, ZONE_COLORS.red],
  ] as Array<[number, string]>) {
    const my = rect.y + rect.h * (1 - mark / fullScale);
    ctx.strokeStyle = c;
    ctx.setLineDash([3, 3]);
    ctx.beginPath();
    ctx.moveTo(rect.x, my);
    ctx.lineTo(rect.x + rect.w, my);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.strokeStyle = color;
  ctx.beginPath();
  samples.forEach(([t, v], i) => {
    const px = rect.x + ((t - span[0]) / (span[1] - span[0])) * rect.w;
    const py = rect.y + rect.h * (1 - Math.min(1, v / fullScale));
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.restore();
}

export function drawBanner(
  ctx: CanvasRenderingContext2D,
  w: number,
  text: string,
  color: string,
): void {
  ctx.save();
  ctx.fillStyle = color;
  ctx.font = "bold 16px monospace";
  ctx.fillText(text, w / 2 - ctx.measureText(text).width / 2, 24);
  ctx.restore();
}
