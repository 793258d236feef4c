import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { Console } from "../src/console.js";
import { mockService } from "./mock_service.js";

const BASE = "http://test";

async function readyConsole(overrides = {}) {
  const { fetchFn, log } = mockService(overrides);
  const ui = new Console(new ApiClient(BASE, fetchFn));
  await ui.init();
  await ui.loadInstance("test", 0);
  return { ui, log };
}

describe("console what-if loop", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("loads an instance with its served prediction", async () => {
    const { ui } = await readyConsole();
    expect(ui.view).not.toBeNull();
    expect(ui.view!.prediction.class).toBe(0);
    expect(ui.error).toBeNull();
  });

  it("an out-of-range index shows an inline error and keeps the view", async () => {
    const { ui } = await readyConsole();
    const before = ui.view;
    await ui.loadInstance("test", 999);
    expect(ui.error).toContain("out of range");
    expect(ui.view).toBe(before);
  });

  it("editing re-predicts within 500 ms of simulated time", async () => {
    const { ui } = await readyConsole();
    ui.editFeature("duration", 0.9);
    expect(ui.view!.prediction.class).toBe(0); // not yet; debounce pending
    await vi.advanceTimersByTimeAsync(499);
    expect(ui.view!.prediction.class).toBe(1); // mock backend: 0.9 > 0.5
    expect(ui.view!.dirty).toBe(true);
  });

  it("displays only service-computed predictions", async () => {
    const { ui, log } = await readyConsole();
    ui.editFeature("duration", 0.7);
    await vi.advanceTimersByTimeAsync(500);
    const served = log.responses.filter(
      (r): r is { probabilities: number[]; class: number } =>
        typeof r === "object" && r !== null && "probabilities" in (r as object),
    );
    const latest = served[served.length - 1];
    expect(ui.view!.prediction).toEqual(latest);
  });

  it("client-side validation blocks the request entirely", async () => {
    const { ui, log } = await readyConsole();
    const callsBefore = log.calls.length;
    ui.editFeature("duration", 1.5);
    await vi.advanceTimersByTimeAsync(1000);
    expect(ui.editError).toContain("[0, 1]");
    expect(log.calls.length).toBe(callsBefore); // no request sent
  });

  it("a 422 keeps the previous prediction and flags the edit", async () => {
    const { ui } = await readyConsole({
      "/api/predict": () =>
        new Response(
          JSON.stringify({ code: "out_of_range", message: "features must lie in [0, 1]" }),
          { status: 422, headers: { "Content-Type": "application/json" } },
        ),
    });
    const before = ui.view!.prediction;
    ui.editFeature("duration", 0.9);
    await vi.advanceTimersByTimeAsync(500);
    expect(ui.view!.prediction).toEqual(before);
    expect(ui.editError).toContain("[0, 1]");
  });

  it("PN suggestion applies atomically and flips the displayed class", async () => {
    const { ui } = await readyConsole();
    expect(ui.view!.prediction.class).toBe(0);
    await ui.requestSuggestion("pn");
    expect(ui.suggestion).not.toBeNull();
    expect(ui.suggestion!.converged).toBe(true);
    await ui.applySuggestion();
    expect(ui.suggestion!.applied).toBe(true);
    expect(ui.view!.values[0]).toBe(0.8);
    expect(ui.view!.prediction.class).toBe(1); // flipped, served by the mock
  });

  it("attribution panel shows exactly the top-10 |phi| features sorted", async () => {
    const names = Array.from({ length: 12 }, (_, i) => `f${i}`);
    const phi = [0.01, -0.5, 0.3, -0.2, 0.45, 0.05, -0.35, 0.15, 0.25, -0.1, 0.02, 0.4];
    const wideRow = {
      index: 0,
      split: "test",
      encoded: Array(12).fill(0.5),
      raw: {},
      label: 0,
      raw_label: "normal",
      predicted_class: 0,
      probabilities: [0.9, 0.1],
    };
    const { ui } = await readyConsole({
      "/api/meta": () => ({
        encoded_columns: names,
        features: names.map((n) => ({ name: n, kind: "continuous" })),
        groups: {},
        col_min: Array(12).fill(0),
        col_max: Array(12).fill(1),
        splits: { train: 10, test: 10 },
        model_fingerprint: "f",
        schema_id: "s",
        seed: 0,
      }),
      "/api/instances": () => ({ split: "test", offset: 0, total: 10, rows: [wideRow] }),
      "/api/explain": (body: { features: number[] }) => ({
        method: "shap",
        feature_names: names,
        phi,
        base_value: 0.1,
        model_output: 0.6,
        target_class: 1,
        instance: body.features,
      }),
    });
    await ui.requestAttribution("shap");
    const bars = ui.attribution!.bars;
    expect(bars).toHaveLength(10);
    const absValues = bars.map((b) => Math.abs(b.phi));
    expect(absValues).toEqual([...absValues].sort((a, b) => b - a));
    expect(bars[0].feature).toBe("f1"); // |-0.5| is the largest
    const shown = new Set(bars.map((b) => b.feature));
    expect(shown.has("f0")).toBe(false); // the two smallest fall outside top-10
    expect(shown.has("f10")).toBe(false);
  });

  it("undo after edits restores the loaded prediction display", async () => {
    const { ui } = await readyConsole();
    const loaded = ui.view!.prediction;
    ui.editFeature("duration", 0.9);
    await vi.advanceTimersByTimeAsync(500);
    expect(ui.view!.prediction).not.toEqual(loaded);
    ui.undoEdits();
    expect(ui.view!.prediction).toEqual(loaded);
    expect(ui.view!.dirty).toBe(false);
  });

  it("rules panel highlights fired clauses for the current values", async () => {
    const { ui } = await readyConsole();
    await ui.requestRules();
    expect(ui.rules![0].fired).toBe(false); // duration 0.2 <= 0.5
    ui.editFeature("duration", 0.9);
    await vi.advanceTimersByTimeAsync(500);
    await ui.requestRules();
    expect(ui.rules![0].fired).toBe(true);
  });

  it("prototype rows come back sorted by weight descending", async () => {
    const { ui } = await readyConsole();
    await ui.requestPrototypes(2);
    const weights = ui.prototypes!.map((p) => p.weight);
    expect(weights).toEqual([...weights].sort((a, b) => b - a));
  });

  it("budget responses surface a reduce-options hint", async () => {
    const { ui } = await readyConsole({
      "/api/explain": () =>
        new Response(
          JSON.stringify({ code: "budget", message: "reduce sample counts" }),
          { status: 503, headers: { "Content-Type": "application/json" } },
        ),
    });
    await ui.requestAttribution("shap");
    expect(ui.error).toContain("reduce options");
    expect(ui.attribution).toBeNull();
  });

  it("stale panel responses never overwrite newer ones", async () => {
    let slowResolve!: (r: Response) => void;
    let call = 0;
    const { ui } = await readyConsole({
      "/api/explain": (body: { features: number[] }) => {
        call += 1;
        const payload = {
          method: "shap",
          feature_names: ["duration", "src_bytes", "protocol_type_tcp", "protocol_type_icmp"],
          phi: [call, 0, 0, 0],
          base_value: 0,
          model_output: 0.1,
          target_class: 1,
          instance: body.features,
        };
        if (call === 1) {
          return new Promise<Response>((resolve) => (slowResolve = resolve)) as never;
        }
        return payload;
      },
    });
    const first = ui.requestAttribution("shap");
    const second = ui.requestAttribution("shap");
    await second;
    expect(ui.attribution!.bars[0].phi).toBe(2);
    slowResolve(
      new Response(
        JSON.stringify({
          method: "shap",
          feature_names: ["duration", "src_bytes", "protocol_type_tcp", "protocol_type_icmp"],
          phi: [1, 0, 0, 0],
          base_value: 0,
          model_output: 0.1,
          target_class: 1,
          instance: [0, 0, 0, 0],
        }),
        { status: 200, headers: { "Content-Type": "application/json" } },
      ),
    );
    await first;
    expect(ui.attribution!.bars[0].phi).toBe(2); // stale response discarded
  });
});
