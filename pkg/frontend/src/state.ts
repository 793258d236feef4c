/** Instance view-state: the loaded row, live edits, and dirty tracking.
 *
 * Edits validate into [0, 1] before touching state; one-hot groups are
 * exclusive (selecting a category zeroes its siblings); undoing all
 * edits restores the exact loaded values and prediction display.
 */

import type { ChangedFeature, InstanceRow, Meta, Prediction } from "./types.js";

export interface SuggestionView {
  mode: "PN" | "PP";
  changes: ChangedFeature[];
  afterClass: number;
  afterProbabilities: number[];
  converged: boolean;
  applied: boolean;
}

export interface EditResult {
  ok: boolean;
  error?: string;
}

export class InstanceView {
  readonly split: string;
  readonly index: number;
  readonly rawLabel: string;
  readonly loadedValues: number[];
  readonly loadedPrediction: Prediction;
  values: number[];
  prediction: Prediction;

  private columnIndex: Map<string, number>;

  constructor(private meta: Meta, row: InstanceRow) {
    this.split = row.split;
    this.index = row.index;
    this.rawLabel = row.raw_label;
    this.loadedValues = [...row.encoded];
    this.values = [...row.encoded];
    this.loadedPrediction = {
      probabilities: [...row.probabilities],
      class: row.predicted_class,
    };
    this.prediction = this.loadedPrediction;
    this.columnIndex = new Map(meta.encoded_columns.map((c, i) => [c, i]));
  }

  get dirty(): boolean {
    return this.values.some((v, i) => v !== this.loadedValues[i]);
  }

  columnOf(name: string): number {
    const idx = this.columnIndex.get(name);
    if (idx === undefined) throw new Error(`unknown column ${name}`);
    return idx;
  }

  /** Validate-then-set a single encoded column. No state change on error. */
  edit(column: string, value: number): EditResult {
    if (!Number.isFinite(value) || value < 0 || value > 1) {
      return { ok: false, error: `${column}: value must be in [0, 1]` };
    }
    const idx = this.columnIndex.get(column);
    if (idx === undefined) {
      return { ok: false, error: `unknown column ${column}` };
    }
    this.values = [...this.values];
    this.values[idx] = value;
    return { ok: true };
  }

  /** Exclusive one-hot selection: the chosen category's column goes to 1,
   * siblings to 0; null clears the whole group (unseen category). */
  selectCategory(feature: string, category: string | null): EditResult {
    const group = this.meta.groups[feature];
    if (!group) return { ok: false, error: `${feature} is not categorical` };
    let chosen = -1;
    if (category !== null) {
      chosen = group.categories.indexOf(category);
      if (chosen < 0) {
        return { ok: false, error: `${feature}: unknown category ${category}` };
      }
    }
    this.values = [...this.values];
    for (let k = 0; k < group.size; k++) {
      this.values[group.start + k] = k === chosen ? 1 : 0;
    }
    return { ok: true };
  }

  /** Apply a suggestion atomically: every change validates or none land. */
  applySuggestion(s: SuggestionView): EditResult {
    const updates: Array<[number, number]> = [];
    for (const ch of s.changes) {
      const idx = this.columnIndex.get(ch.feature);
      if (idx === undefined) {
        return { ok: false, error: `suggestion references unknown ${ch.feature}` };
      }
      if (!Number.isFinite(ch.new) || ch.new < 0 || ch.new > 1) {
        return { ok: false, error: `suggestion value out of range for ${ch.feature}` };
      }
      updates.push([idx, ch.new]);
    }
    this.values = [...this.values];
    for (const [idx, v] of updates) this.values[idx] = v;
    return { ok: true };
  }

  undoAll(): void {
    this.values = [...this.loadedValues];
    this.prediction = this.loadedPrediction;
  }

  setPrediction(p: Prediction): void {
    this.prediction = p;
  }
}
