/** End-to-end checks against a genuinely running service.
 *
 * Skipped unless XNIDS_API points at a live server, e.g.:
 *   xnids serve --model model.bin --data dataset.bin --port 8123 &
 *   XNIDS_API=http://127.0.0.1:8123 npx vitest run tests/live.test.ts
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Console } from "../src/console.js";

const BASE = process.env.XNIDS_API;

describe.skipIf(!BASE)("live service loop", () => {
  it("loads, edits, re-predicts, and applies a PN against the real API", async () => {
    const ui = new Console(new ApiClient(BASE!), 0);
    await ui.init();
    expect(ui.meta!.encoded_columns.length).toBeGreaterThan(0);

    await ui.loadInstance("test", 0);
    expect(ui.error).toBeNull();
    const view = ui.view!;
    const loadedClass = view.prediction.class;

    // editing a feature to its own value re-predicts identically
    const t0 = Date.now();
    await ui.repredictNow();
    expect(Date.now() - t0).toBeLessThan(500);
    expect(ui.view!.prediction.class).toBe(loadedClass);

    // a PN suggestion, when it converges, flips the displayed class
    await ui.requestSuggestion("pn", { iterations: 150, steps: 5 });
    const suggestion = ui.suggestion!;
    if (suggestion.converged) {
      await ui.applySuggestion();
      expect(ui.view!.prediction.class).toBe(suggestion.afterClass);
      expect(ui.view!.prediction.class).not.toBe(loadedClass);
    }

    await ui.requestAttribution("shap", { coalitions: 150, background: 10 });
    expect(ui.attribution!.bars.length).toBeLessThanOrEqual(10);
    const absPhi = ui.attribution!.bars.map((b) => Math.abs(b.phi));
    expect(absPhi).toEqual([...absPhi].sort((a, b) => b - a));

    await ui.requestPrototypes(3);
    const weights = ui.prototypes!.map((p) => p.weight);
    expect(weights).toEqual([...weights].sort((a, b) => b - a));

    await ui.requestRules();
    expect(Array.isArray(ui.rules)).toBe(true);
  }, 120_000);
});
