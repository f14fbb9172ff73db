// Force-gauge view model: pure classification of server values against the
// fixed clinical markers. No client-side physics: every number rendered is a
// field of the latest snapshot, passed through unchanged.

import type { RobotSnapshot } from "./protocol.js";

export const AMBER_MARK_MN = 100; // adaptive-control activation threshold
export const RED_MARK_MN = 120; // safe sclera-force limit
export const STALE_AFTER_MS = 500;

export type GaugeZone = "normal" | "amber" | "red";

export function gaugeZone(fsMn: number): GaugeZone {
  if (fsMn >= RED_MARK_MN) return "red";
  if (fsMn >= AMBER_MARK_MN) return "amber";
  return "normal";
}

export interface GaugeView {
  side: "right" | "left";
  fs: number; // mN, exactly as received
  fsx: number;
  fsy: number;
  ft: number;
  depth: number;
  zone: GaugeZone;
  lampX: boolean; // adaptive control owns body x
  lampY: boolean;
  pedal: number;
}

/** Snapshot fields copied verbatim plus derived display classification. */
export function gaugeView(snapshot: RobotSnapshot): GaugeView {
  return {
    side: snapshot.side,
    fs: snapshot.fs,
    fsx: snapshot.fsx,
    fsy: snapshot.fsy,
    ft: snapshot.ft,
    depth: snapshot.depth,
    zone: gaugeZone(snapshot.fs),
    lampX: snapshot.delta[0] === 1,
    lampY: snapshot.delta[1] === 1,
    pedal: snapshot.pedal,
  };
}

/** True when the last snapshot is older than the staleness budget. */
export function isStale(lastSnapshotMs: number, nowMs: number): boolean {
  return nowMs - lastSnapshotMs > STALE_AFTER_MS;
}
