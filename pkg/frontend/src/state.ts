/** Explorer state: slider values bounded by the learned coefficient range. */

import { Meta } from "./api.js";

export type ViewMode = "geometry" | "field" | "side-by-side";

export interface SliderBounds {
  lo: number[];
  hi: number[];
}

/** Training min/max per dimension, optionally widened 25% on both ends. */
export function sliderBounds(meta: Meta, explore: boolean): SliderBounds {
  const lo: number[] = [];
  const hi: number[] = [];
  for (let i = 0; i < meta.k_star; i++) {
    let a = meta.stats.min[i];
    let b = meta.stats.max[i];
    if (explore) {
      const margin = 0.25 * (b - a);
      a -= margin;
      b += margin;
    }
    lo.push(a);
    hi.push(b);
  }
  return { lo, hi };
}

export class ExplorerState {
  alpha: number[];
  pinnedA: number[] | null = null;
  pinnedB: number[] | null = null;
  t = 0.5;
  view: ViewMode = "side-by-side";
  exploreBeyondData = false;
  private bounds: SliderBounds;

  constructor(public readonly meta: Meta) {
    this.bounds = sliderBounds(meta, false);
    this.alpha = meta.stats.mean.slice(0, meta.k_star);
  }

  currentBounds(): SliderBounds {
    return this.bounds;
  }

  setExplore(on: boolean): void {
    this.exploreBeyondData = on;
    this.bounds = sliderBounds(this.meta, on);
    this.alpha = this.alpha.map((v, i) => this.clampDim(v, i));
  }

  private clampDim(v: number, i: number): number {
    return Math.min(this.bounds.hi[i], Math.max(this.bounds.lo[i], v));
  }

  setSlider(i: number, value: number): void {
    this.alpha[i] = this.clampDim(value, i);
  }

  setAlpha(alpha: number[]): void {
    this.alpha = alpha.map((v, i) => this.clampDim(v, i));
  }

  setT(t: number): void {
    this.t = Math.min(1, Math.max(0, t));
  }

  pinA(): void {
    this.pinnedA = this.alpha.slice();
  }

  pinB(): void {
    this.pinnedB = this.alpha.slice();
  }

  /** Linear blend of the pinned codes at the current t (clamped on entry). */
  interpolated(): number[] | null {
    if (!this.pinnedA || !this.pinnedB) {
      return null;
    }
    const a = this.pinnedA;
    const b = this.pinnedB;
    return a.map((av, i) => (1 - this.t) * av + this.t * b[i]);
  }
}
