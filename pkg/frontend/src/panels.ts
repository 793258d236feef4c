/** Pure view-model builders for the explanation panels.
 *
 * These transform service responses into render-ready rows; they never
 * compute model quantities themselves.
 */

import type {
  Attribution,
  ContrastResult,
  PrototypesResult,
  RulesApplied,
  RulesInfo,
} from "./types.js";
import type { SuggestionView } from "./state.js";

export interface AttributionBar {
  feature: string;
  phi: number;
  value: number;
  supportsAttack: boolean;
}

/** Exactly the top-k features by |phi|, sorted descending. */
export function attributionBars(attr: Attribution, topK = 10): AttributionBar[] {
  const order = attr.phi
    .map((phi, i) => ({ i, abs: Math.abs(phi) }))
    .sort((a, b) => b.abs - a.abs || a.i - b.i)
    .slice(0, topK);
  return order.map(({ i }) => ({
    feature: attr.feature_names[i],
    phi: attr.phi[i],
    value: attr.instance[i],
    supportsAttack: attr.phi[i] > 0,
  }));
}

export function suggestionFromContrast(res: ContrastResult): SuggestionView {
  return {
    mode: res.mode,
    changes: res.changed_features,
    afterClass: res.prediction_after.class,
    afterProbabilities: res.prediction_after.probabilities,
    converged: res.converged,
    applied: false,
  };
}

export interface PrototypeRow {
  rank: number;
  trainIndex: number;
  weight: number;
  predictedClass: number;
  rawLabel: string;
}

/** Neighbor rows sorted by weight descending (re-asserted client-side). */
export function prototypeRows(res: PrototypesResult): PrototypeRow[] {
  return [...res.prototypes]
    .sort((a, b) => b.weight - a.weight || a.rank - b.rank)
    .map((p, rank) => ({
      rank,
      trainIndex: p.train_index,
      weight: p.weight,
      predictedClass: p.predicted_class,
      rawLabel: p.raw_label,
    }));
}

export interface RuleRow {
  index: number;
  text: string;
  fireCount: number;
  fired: boolean;
}

/** Clause list with the currently fired ones highlighted. */
export function ruleRows(rules: RulesInfo, applied: RulesApplied | null): RuleRow[] {
  const fired = new Set(applied?.fired ?? []);
  return rules.clauses.map((c) => ({
    index: c.index,
    text: c.text,
    fireCount: c.train_fire_count,
    fired: fired.has(c.index),
  }));
}

export function classLabel(cls: number): string {
  return cls === 1 ? "attack" : "normal";
}

export function formatProbabilities(probs: number[]): string {
  return `normal ${probs[0].toFixed(3)} / attack ${probs[1].toFixed(3)}`;
}
