// Wire protocol mirror of the server's shipped JSON schema. The console
// renders server-derived values only; everything displayed must come out of
// a parsed StateMessage untouched.

export interface RobotSnapshot {
  side: "right" | "left";
  theta: number[];
  tip: number[];
  fsx: number;
  fsy: number;
  fs: number;
  ft: number;
  depth: number;
  delta: [number, number];
  pedal: number;
}

export interface StateMessage {
  type: "state";
  tick: number;
  t: number;
  robots: [RobotSnapshot, RobotSnapshot];
  events: string[];
  eye_rotvec?: number[];
}

export interface SceneGeometry {
  center: number[];
  radius: number;
  retina_radius: number;
  ports: number[][];
  pins: number[][];
  start: number[];
}

export interface HelloMessage {
  type: "hello";
  version: number;
  mode: "BMAT" | "BMAC";
  dt: number;
  decimation: number;
  colors?: string[];
  scene?: SceneGeometry;
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export type ServerMessage = StateMessage | HelloMessage | ErrorMessage;

export interface InputMessage {
  type: "input";
  robot: "right" | "left";
  t_client: number;
  v: number[];
  pedal: number;
  clutch: 0 | 1;
}

function isNumberArray(x: unknown, n: number): x is number[] {
  return Array.isArray(x) && x.length === n && x.every((v) => typeof v === "number");
}

function parseRobot(raw: unknown): RobotSnapshot | null {
  const r = raw as Record<string, unknown>;
  if (!r || (r.side !== "right" && r.side !== "left")) return null;
  if (!isNumberArray(r.theta, 5) || !isNumberArray(r.tip, 3)) return null;
  if (!isNumberArray(r.delta, 2)) return null;
  for (const key of ["fsx", "fsy", "fs", "ft", "depth", "pedal"]) {
    if (typeof r[key] !== "number") return null;
  }
  return {
    side: r.side as "right" | "left",
    theta: r.theta as number[],
    tip: r.tip as number[],
    fsx: r.fsx as number,
    fsy: r.fsy as number,
    fs: r.fs as number,
    ft: r.ft as number,
    depth: r.depth as number,
    delta: r.delta as [number, number],
    pedal: r.pedal as number,
  };
}

/** Parse and validate one server message; null for anything malformed. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  const msg = raw as Record<string, unknown>;
  if (!msg || typeof msg.type !== "string") return null;
  if (msg.type === "hello") {
    if (typeof msg.version !== "number" || typeof msg.dt !== "number") return null;
    if (msg.mode !== "BMAT" && msg.mode !== "BMAC") return null;
    if (typeof msg.decimation !== "number") return null;
    return msg as unknown as HelloMessage;
  }
  if (msg.type === "error") {
    return typeof msg.error === "string" ? (msg as unknown as ErrorMessage) : null;
  }
  if (msg.type === "state") {
    if (typeof msg.tick !== "number" || typeof msg.t !== "number") return null;
    if (!Array.isArray(msg.robots) || msg.robots.length !== 2) return null;
    const robots = msg.robots.map(parseRobot);
    if (robots.some((r) => r === null)) return null;
    if (!Array.isArray(msg.events)) return null;
    const state: StateMessage = {
      type: "state",
      tick: msg.tick,
      t: msg.t,
      robots: robots as [RobotSnapshot, RobotSnapshot],
      events: msg.events as string[],
    };
    if (isNumberArray(msg.eye_rotvec, 3)) state.eye_rotvec = msg.eye_rotvec;
    return state;
  }
  return null;
}

export function buildInputMessage(
  robot: "right" | "left",
  v: number[],
  pedal: number,
  clutch: 0 | 1,
  tClient: number,
): string {
  const msg: InputMessage = { type: "input", robot, t_client: tClient, v, pedal, clutch };
  return JSON.stringify(msg);
}
