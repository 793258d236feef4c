/** Typed client for the intrusion-detection service.
 *
 * Every number the console displays comes through here; nothing is
 * computed locally. Responses get shallow schema checks so a drifted
 * or broken backend surfaces as a visible ApiError instead of a blank
 * panel.
 */

import type {
  Attribution,
  ContrastResult,
  InstancesPage,
  Meta,
  Prediction,
  PrototypesResult,
  RulesApplied,
  RulesInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, "network", `service unreachable: ${String(err)}`);
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      if (resp.ok) throw new ApiError(resp.status, "schema", "non-JSON response");
    }
    if (!resp.ok) {
      const err = body as { code?: string; message?: string } | null;
      throw new ApiError(resp.status, err?.code ?? "error",
        err?.message ?? `HTTP ${resp.status}`);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async meta(): Promise<Meta> {
    const m = await this.request<Meta>("/api/meta");
    if (!Array.isArray(m.encoded_columns) || m.encoded_columns.length === 0) {
      throw new ApiError(200, "schema", "meta: missing encoded_columns");
    }
    return m;
  }

  async instances(split: string, offset: number, limit: number): Promise<InstancesPage> {
    const page = await this.request<InstancesPage>(
      `/api/instances?split=${encodeURIComponent(split)}&offset=${offset}&limit=${limit}`,
    );
    if (!Array.isArray(page.rows)) {
      throw new ApiError(200, "schema", "instances: rows missing");
    }
    return page;
  }

  async predict(features: number[]): Promise<Prediction> {
    const p = await this.post<Prediction>("/api/predict", { features });
    if (!Array.isArray(p.probabilities) || p.probabilities.length !== 2) {
      throw new ApiError(200, "schema", "predict: expected two probabilities");
    }
    return p;
  }

  async explain(
    method: "shap" | "lime",
    features: number[],
    options?: Record<string, unknown>,
  ): Promise<Attribution> {
    const attr = await this.post<Attribution>("/api/explain", {
      method,
      features,
      options,
    });
    if (!Array.isArray(attr.phi) || attr.phi.length !== features.length) {
      throw new ApiError(200, "schema", "explain: phi length mismatch");
    }
    return attr;
  }

  async contrast(
    mode: "pn" | "pp",
    features: number[],
    options?: Record<string, unknown>,
  ): Promise<ContrastResult> {
    const res = await this.post<ContrastResult>("/api/contrast", {
      mode,
      features,
      options,
    });
    if (!Array.isArray(res.changed_features)) {
      throw new ApiError(200, "schema", "contrast: changed_features missing");
    }
    return res;
  }

  async prototypes(features: number[], m: number): Promise<PrototypesResult> {
    const res = await this.post<PrototypesResult>("/api/prototypes", { features, m });
    if (!Array.isArray(res.prototypes)) {
      throw new ApiError(200, "schema", "prototypes: table missing");
    }
    return res;
  }

  rules(): Promise<RulesInfo> {
    return this.request<RulesInfo>("/api/rules");
  }

  rulesApply(features: number[]): Promise<RulesApplied> {
    return this.post<RulesApplied>("/api/rules/apply", { features });
  }
}
