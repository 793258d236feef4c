import { describe, expect, it } from "vitest";

import { InstanceView } from "../src/state.js";
import type { InstanceRow } from "../src/types.js";
import { META } from "./mock_service.js";

function row(): InstanceRow {
  return {
    index: 0,
    split: "test",
    encoded: [0.2, 0.4, 1, 0],
    raw: { duration: 0.2, src_bytes: 0.4, protocol_type: "tcp" },
    label: 0,
    raw_label: "normal",
    predicted_class: 0,
    probabilities: [0.9, 0.1],
  };
}

describe("InstanceView", () => {
  it("starts clean with the loaded prediction", () => {
    const v = new InstanceView(META, row());
    expect(v.dirty).toBe(false);
    expect(v.prediction.class).toBe(0);
  });

  it("accepts in-range edits and flags dirty", () => {
    const v = new InstanceView(META, row());
    expect(v.edit("duration", 0.7).ok).toBe(true);
    expect(v.values[0]).toBe(0.7);
    expect(v.dirty).toBe(true);
  });

  it("rejects out-of-range edits without touching state", () => {
    const v = new InstanceView(META, row());
    const res = v.edit("duration", 1.5);
    expect(res.ok).toBe(false);
    expect(res.error).toContain("[0, 1]");
    expect(v.values[0]).toBe(0.2);
    expect(v.dirty).toBe(false);
  });

  it("editing a feature to its current value keeps dirty false", () => {
    const v = new InstanceView(META, row());
    expect(v.edit("duration", 0.2).ok).toBe(true);
    expect(v.dirty).toBe(false);
  });

  it("keeps one-hot groups exclusive on category selection", () => {
    const v = new InstanceView(META, row());
    expect(v.selectCategory("protocol_type", "icmp").ok).toBe(true);
    expect(v.values.slice(2)).toEqual([0, 1]);
    expect(v.selectCategory("protocol_type", null).ok).toBe(true);
    expect(v.values.slice(2)).toEqual([0, 0]);
  });

  it("applies suggestions atomically", () => {
    const v = new InstanceView(META, row());
    const bad = v.applySuggestion({
      mode: "PN",
      changes: [
        { feature: "duration", original: 0.2, new: 0.8 },
        { feature: "no_such", original: 0, new: 0.1 },
      ],
      afterClass: 1,
      afterProbabilities: [0.1, 0.9],
      converged: true,
      applied: false,
    });
    expect(bad.ok).toBe(false);
    expect(v.values[0]).toBe(0.2); // nothing applied

    const good = v.applySuggestion({
      mode: "PN",
      changes: [{ feature: "duration", original: 0.2, new: 0.8 }],
      afterClass: 1,
      afterProbabilities: [0.1, 0.9],
      converged: true,
      applied: false,
    });
    expect(good.ok).toBe(true);
    expect(v.values[0]).toBe(0.8);
  });

  it("undoAll restores the exact loaded values and prediction", () => {
    const v = new InstanceView(META, row());
    v.edit("duration", 0.9);
    v.setPrediction({ probabilities: [0.1, 0.9], class: 1 });
    v.undoAll();
    expect(v.values).toEqual([0.2, 0.4, 1, 0]);
    expect(v.prediction).toEqual({ probabilities: [0.9, 0.1], class: 0 });
    expect(v.dirty).toBe(false);
  });
});
