import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { mockService } from "./mock_service.js";

const BASE = "http://test";

describe("ApiClient", () => {
  it("fetches meta and validates its shape", async () => {
    const { fetchFn } = mockService();
    const api = new ApiClient(BASE, fetchFn);
    const meta = await api.meta();
    expect(meta.encoded_columns).toHaveLength(4);
    expect(meta.groups.protocol_type.categories).toEqual(["tcp", "icmp"]);
  });

  it("maps service errors onto ApiError with code and status", async () => {
    const { fetchFn } = mockService();
    const api = new ApiClient(BASE, fetchFn);
    const err = await api.predict([0.1, 0.2, 1, 0, 0.9]).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.code).toBe("malformed");
    expect(err.message).toContain("expected 4");
  });

  it("maps out-of-range values onto 422", async () => {
    const { fetchFn } = mockService();
    const api = new ApiClient(BASE, fetchFn);
    const err = await api.predict([1.5, 0.2, 1, 0]).catch((e) => e);
    expect(err.status).toBe(422);
    expect(err.code).toBe("out_of_range");
  });

  it("rejects schema-violating responses visibly", async () => {
    const { fetchFn } = mockService({
      "/api/explain": () => ({ method: "shap", phi: [0.1] }),
    });
    const api = new ApiClient(BASE, fetchFn);
    const err = await api.explain("shap", [0.1, 0.2, 1, 0]).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("schema");
  });

  it("turns network failures into ApiError", async () => {
    const api = new ApiClient(BASE, () => Promise.reject(new Error("down")));
    const err = await api.meta().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("network");
  });
});
