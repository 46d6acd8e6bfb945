/** Studio state: the selected head, the two exaggeration weights, and the
 * editable leading coefficient offsets.
 *
 * Sliders are clamped to [0, 2]; coefficient offsets are clamped to three
 * standard deviations of their component (derived from the model's
 * explained-variance ratios).  The state maps injectively onto request
 * bodies; it never combines geometry itself.
 */

import type { ExaggerateRequest, HeadInfo, ModelInfo } from "./api.js";

export const SLIDER_MIN = 0;
export const SLIDER_MAX = 2;
export const SLIDER_STEP = 0.05;
export const EDITABLE_COEFF_COUNT = 8;

const clamp = (value: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, value));

export class StudioState {
  headId: string | null = null;
  u1 = 1.0;
  u2 = 1.0;
  readonly coeffOffsets: number[];
  readonly coeffBounds: number[];

  constructor(model: ModelInfo, editableCoeffs: number = EDITABLE_COEFF_COUNT) {
    const k = Math.min(editableCoeffs, model.d, model.variance_ratios.length);
    this.coeffOffsets = new Array(k).fill(0);
    this.coeffBounds = model.variance_ratios
      .slice(0, k)
      .map((ratio) => 3 * Math.sqrt(Math.max(ratio, 0)));
  }

  setU1(value: number): void {
    this.u1 = clamp(value, SLIDER_MIN, SLIDER_MAX);
  }

  setU2(value: number): void {
    this.u2 = clamp(value, SLIDER_MIN, SLIDER_MAX);
  }

  setCoeffOffset(index: number, value: number): void {
    if (index < 0 || index >= this.coeffOffsets.length) {
      throw new Error(`coefficient index ${index} out of range`);
    }
    const bound = this.coeffBounds[index];
    this.coeffOffsets[index] = clamp(value, -bound, bound);
  }

  resetCoeffOffsets(): void {
    this.coeffOffsets.fill(0);
  }

  hasCoeffEdits(): boolean {
    return this.coeffOffsets.some((v) => v !== 0);
  }

  /** Request body for the current state.
   *
   * Plain slider moves reference the head slot; coefficient edits send the
   * slot's caricature code plus the offsets so the service decodes the
   * edited shape.  Distinct states produce distinct bodies.
   */
  requestBody(heads: HeadInfo[]): ExaggerateRequest {
    if (this.headId === null) {
      throw new Error("no head selected");
    }
    if (!this.hasCoeffEdits()) {
      return { head_id: this.headId, u1: this.u1, u2: this.u2 };
    }
    const head = heads.find((h) => h.id === this.headId);
    if (!head) {
      throw new Error(`unknown head ${this.headId}`);
    }
    const coeffs = head.cari_coeffs.slice();
    for (let i = 0; i < this.coeffOffsets.length; i++) {
      coeffs[i] += this.coeffOffsets[i];
    }
    return { head_id: this.headId, coeffs, u1: this.u1, u2: this.u2 };
  }
}
