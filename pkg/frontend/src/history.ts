// Rolling force history for the sparkline: keeps the last windowS seconds
// of (t, value) pairs in arrival order.

export class ForceHistory {
  private samples: Array<[number, number]> = [];

  constructor(readonly windowS: number = 10) {}

  push(t: number, value: number): void {
    this.samples.push([t, value]);
    const cutoff = t - this.windowS;
    let drop = 0;
    while (drop < this.samples.length && this.samples[drop][0] < cutoff) drop++;
    if (drop > 0) this.samples = this.samples.slice(drop);
  }

  values(): ReadonlyArray<[number, number]> {
    return this.samples;
  }

  span(): [number, number] | null {
    if (this.samples.length === 0) return null;
    return [this.samples[0][0], this.samples[this.samples.length - 1][0]];
  }

  max(): number {
    return this.samples.reduce((m, [, v]) => Math.max(m, v), 0);
  }
}
