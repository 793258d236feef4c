/** Console controller: the what-if loop, DOM-free and fully testable.
 *
 * Owns the instance view, debounced re-prediction, per-panel request
 * sequencing, and suggestion application. A renderer subscribes to
 * snapshots; every displayed number originates from a service response.
 */

import { ApiClient, ApiError } from "./api.js";
import type { SuggestionView } from "./state.js";
import { InstanceView } from "./state.js";
import {
  AttributionBar,
  PrototypeRow,
  RuleRow,
  attributionBars,
  prototypeRows,
  ruleRows,
  suggestionFromContrast,
} from "./panels.js";
import { Debouncer, PanelRequester } from "./requests.js";
import type { Attribution, Meta } from "./types.js";

export interface ConsoleSnapshot {
  view: InstanceView | null;
  error: string | null;
  attribution: { method: string; bars: AttributionBar[] } | null;
  suggestion: SuggestionView | null;
  prototypes: PrototypeRow[] | null;
  rules: RuleRow[] | null;
  busy: Record<string, boolean>;
  editError: string | null;
}

type Listener = (snap: ConsoleSnapshot) => void;

export class Console {
  meta: Meta | null = null;
  view: InstanceView | null = null;
  error: string | null = null;
  editError: string | null = null;
  attribution: { method: string; bars: AttributionBar[] } | null = null;
  suggestion: SuggestionView | null = null;
  prototypes: PrototypeRow[] | null = null;
  rules: RuleRow[] | null = null;
  busy: Record<string, boolean> = {};

  private listeners: Listener[] = [];
  private predictDebounce: Debouncer<[]>;
  private panels = {
    predict: new PanelRequester(),
    attribution: new PanelRequester(),
    contrast: new PanelRequester(),
    prototypes: new PanelRequester(),
    rules: new PanelRequester(),
  };

  constructor(
    private api: ApiClient,
    debounceMs = 300,
  ) {
    this.predictDebounce = new Debouncer(debounceMs, () => {
      void this.repredictNow();
    });
  }

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  /** Re-emit the current snapshot (e.g. after a pure view filter change). */
  refresh(): void {
    this.emit();
  }

  private emit(): void {
    const snap: ConsoleSnapshot = {
      view: this.view,
      error: this.error,
      attribution: this.attribution,
      suggestion: this.suggestion,
      prototypes: this.prototypes,
      rules: this.rules,
      busy: { ...this.busy },
      editError: this.editError,
    };
    for (const fn of this.listeners) fn(snap);
  }

  async init(): Promise<void> {
    this.meta = await this.api.meta();
    this.emit();
  }

  /** Load one instance; on failure the previous view stays intact. */
  async loadInstance(split: string, index: number): Promise<void> {
    if (!this.meta) throw new Error("init() first");
    try {
      const page = await this.api.instances(split, index, 1);
      const row = page.rows[0];
      if (!row || row.index !== index) {
        throw new ApiError(200, "range", `index ${index} out of range`);
      }
      this.view = new InstanceView(this.meta, row);
      this.error = null;
      this.editError = null;
      // a fresh instance clears stale panels
      this.attribution = null;
      this.suggestion = null;
      this.prototypes = null;
      this.rules = null;
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  /** Client-validated edit followed by a debounced re-prediction. */
  editFeature(column: string, value: number): void {
    if (!this.view) return;
    const res = this.view.edit(column, value);
    this.editError = res.ok ? null : res.error ?? "invalid edit";
    if (res.ok) this.predictDebounce.call();
    this.emit();
  }

  selectCategory(feature: string, category: string | null): void {
    if (!this.view) return;
    const res = this.view.selectCategory(feature, category);
    this.editError = res.ok ? null : res.error ?? "invalid selection";
    if (res.ok) this.predictDebounce.call();
    this.emit();
  }

  undoEdits(): void {
    if (!this.view) return;
    this.predictDebounce.cancel();
    this.view.undoAll();
    this.editError = null;
    this.emit();
  }

  async repredictNow(): Promise<void> {
    if (!this.view) return;
    const values = [...this.view.values];
    this.busy.predict = true;
    this.emit();
    try {
      const pred = await this.panels.predict.run(() => this.api.predict(values));
      if (pred && this.view) this.view.setPrediction(pred);
      this.error = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.editError = err.message; // keep the previous prediction
      } else {
        this.error = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.busy.predict = false;
      this.emit();
    }
  }

  async requestAttribution(method: "shap" | "lime",
                           options?: Record<string, unknown>): Promise<void> {
    if (!this.view) return;
    const values = [...this.view.values];
    await this.panel("attribution", async () => {
      const attr: Attribution | undefined = await this.panels.attribution.run(
        () => this.api.explain(method, values, options),
      );
      if (attr) this.attribution = { method, bars: attributionBars(attr, 10) };
    });
  }

  async requestSuggestion(mode: "pn" | "pp",
                          options?: Record<string, unknown>): Promise<void> {
    if (!this.view) return;
    const values = [...this.view.values];
    await this.panel("contrast", async () => {
      const res = await this.panels.contrast.run(
        () => this.api.contrast(mode, values, options),
      );
      if (res) this.suggestion = suggestionFromContrast(res);
    });
  }

  /** Apply the pending suggestion atomically, then re-predict immediately. */
  async applySuggestion(): Promise<void> {
    if (!this.view || !this.suggestion) return;
    const res = this.view.applySuggestion(this.suggestion);
    if (!res.ok) {
      this.editError = res.error ?? "suggestion failed";
      this.emit();
      return;
    }
    this.suggestion = { ...this.suggestion, applied: true };
    this.predictDebounce.cancel();
    await this.repredictNow();
  }

  async requestPrototypes(m = 5): Promise<void> {
    if (!this.view) return;
    const values = [...this.view.values];
    await this.panel("prototypes", async () => {
      const res = await this.panels.prototypes.run(
        () => this.api.prototypes(values, m),
      );
      if (res) this.prototypes = prototypeRows(res);
    });
  }

  async requestRules(): Promise<void> {
    if (!this.view) return;
    const values = [...this.view.values];
    await this.panel("rules", async () => {
      const run = await this.panels.rules.run(async () => {
        const [info, applied] = await Promise.all([
          this.api.rules(),
          this.api.rulesApply(values),
        ]);
        return ruleRows(info, applied);
      });
      if (run) this.rules = run;
    });
  }

  private async panel(name: string, fn: () => Promise<void>): Promise<void> {
    this.busy[name] = true;
    this.emit();
    try {
      await fn();
      this.error = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 503) {
        this.error = `${name}: compute budget exceeded; reduce options`;
      } else {
        this.error = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.busy[name] = false;
      this.emit();
    }
  }
}
