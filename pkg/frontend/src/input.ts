// Virtual-stylus input: pointer drags map to body-frame velocities, the
// wheel drives insertion, holding a pedal key ramps its value to one, and
// the clutch gates whether any motion is streamed at all.

export interface StylusGains {
  linearPerPx: number; // (m/s) per px of drag
  wheelPerNotch: number; // (m/s) per wheel notch, along the shaft
  angularPerPx: number; // (rad/s) per px with the rotate modifier held
  maxLinear: number; // m/s saturation
  maxAngular: number; // rad/s saturation
}

export const DEFAULT_GAINS: StylusGains = {
  linearPerPx: 1e-4,
  wheelPerNotch: 2e-3,
  angularPerPx: 2e-3,
  maxLinear: 0.02,
  maxAngular: 1.0,
};

export const PEDAL_RAMP_MS = 300; // hold-to-engage rise time

function clampNorm(v: number[], maxNorm: number): number[] {
  const n = Math.hypot(...v);
  if (n <= maxNorm || n === 0) return v;
  return v.map((x) => (x * maxNorm) / n);
}

/**
 * Map a stylus drag to a 6-vector body velocity.
 *
 * Plain drag: screen x -> body x, screen y -> body y. Wheel notches slide
 * along the shaft (body z). With the rotate modifier the same drag commands
 * yaw/pitch instead. Linear and angular parts saturate separately.
 */
export function stylusToVelocity(
  dragPx: [number, number],
  wheelNotches: number,
  rotateModifier: boolean,
  gains: StylusGains = DEFAULT_GAINS,
): number[] {
  let linear = [0, 0, 0];
  let angular = [0, 0, 0];
  if (rotateModifier) {
    angular = [dragPx[1] * gains.angularPerPx, -dragPx[0] * gains.angularPerPx, 0];
  } else {
    linear = [dragPx[0] * gains.linearPerPx, dragPx[1] * gains.linearPerPx, 0];
  }
  linear[2] += wheelNotches * gains.wheelPerNotch;
  linear = clampNorm(linear, gains.maxLinear);
  angular = clampNorm(angular, gains.maxAngular);
  return [...linear, ...angular];
}

/** Analog pedal model: ramps 0 -> 1 over PEDAL_RAMP_MS while held, snaps to
 * zero on release. */
export class PedalState {
  private heldSinceMs: number | null = null;

  press(nowMs: number): void {
    if (this.heldSinceMs === null) this.heldSinceMs = nowMs;
  }

  release(): void {
    this.heldSinceMs = null;
  }

  value(nowMs: number): number {
    if (this.heldSinceMs === null) return 0;
    return Math.min(1, (nowMs - this.heldSinceMs) / PEDAL_RAMP_MS);
  }
}

export interface HandCommand {
  v: number[];
  pedal: number;
  clutch: 0 | 1;
}

/** One hand's input device: drag/wheel accumulate while the clutch is
 * engaged; a released clutch produces no message at all (the master is being
 * repositioned). */
export class HandInput {
  private drag: [number, number] = [0, 0];
  private wheel = 0;
  private rotate = false;
  private clutched = false;
  readonly pedal = new PedalState();

  setClutch(engaged: boolean): void {
    this.clutched = engaged;
    if (!engaged) {
      this.drag = [0, 0];
      this.wheel = 0;
    }
  }

  get clutchEngaged(): boolean {
    return this.clutched;
  }

  setRotateModifier(on: boolean): void {
    this.rotate = on;
  }

  moveBy(dxPx: number, dyPx: number): void {
    if (!this.clutched) return;
    this.drag = [dxPx, dyPx];
  }

  wheelBy(notches: number): void {
    if (!this.clutched) return;
    this.wheel += notches;
  }

  /** Command to stream this frame, or null when the clutch is released. */
  sample(nowMs: number, gains: StylusGains = DEFAULT_GAINS): HandCommand | null {
    if (!this.clutched) return null;
    const v = stylusToVelocity(this.drag, this.wheel, this.rotate, gains);
    this.wheel = 0; // wheel is impulsive, drag persists until moved again
    return { v, pedal: this.pedal.value(nowMs), clutch: 1 };
  }
}
