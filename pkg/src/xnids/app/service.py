"""JSON API serving predictions and explanations to the analyst console.

Model, schema, and dataset load once and stay immutable for the process
lifetime. Explanation options are clamped to fixed caps so a request
always fits the compute budget deterministically; 503 fires only when
even the floor settings cannot fit (estimated from a startup
calibration of model throughput).

Error contract: {code, message} bodies; 400 malformed, 422 values out
of range, 503 budget exceeded.
"""

import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import cem, nn
from ..brcg import RuleSet, evaluate_rules, parse_rules
from ..dataset import column_stats, load_dataset
from ..errors import DataError
from ..lime import LimeConfig, explain_lime
from ..protodash import explain_instance_by_prototypes
from ..shap import kernel_shap, sample_background
from . import reports

CAPS = {
    "shap_coalitions": 1000,
    "shap_background": 50,
    "lime_samples": 2000,
    "cem_iterations": 500,
    "cem_steps": 9,
    "prototypes_m": 10,
}


@dataclass
class ServiceState:
    model: object
    schema: object
    splits: dict
    stats: object
    rules: RuleSet
    rule_fire_counts: list
    seed: int
    budget_seconds: float
    eval_rate: float                 # model rows/second from calibration
    counter: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_seed(self, request_seed):
        if request_seed is not None:
            return int(request_seed)
        with self.lock:
            self.counter += 1
            return self.seed + self.counter


def build_state(model_path, data_path, rules_path=None, seed=0,
                budget_seconds=30.0) -> ServiceState:
    model = nn.load_model(model_path)
    schema, splits = load_dataset(data_path)
    if "train" not in splits:
        raise DataError("dataset artifact must contain a 'train' split")
    stats = column_stats(splits["train"], schema)
    if rules_path:
        with open(rules_path) as fh:
            rules = parse_rules(fh.read())
    else:
        rules = RuleSet(clauses=[])
    fire_counts = _fire_counts(rules, splits["train"], schema)

    t0 = time.perf_counter()
    probe = splits["train"].values[:512].astype(np.float64)
    nn.forward(model, probe)
    rate = max(probe.shape[0] / (time.perf_counter() - t0), 1.0)
    return ServiceState(model=model, schema=schema, splits=splits, stats=stats,
                        rules=rules, rule_fire_counts=fire_counts, seed=seed,
                        budget_seconds=budget_seconds, eval_rate=rate)


def _fire_counts(rules, matrix, schema):
    counts = []
    values = matrix.values.astype(np.float64)
    from ..brcg import eval_literal

    for clause in rules.clauses:
        cov = np.ones(values.shape[0], dtype=bool)
        for lit in clause.literals:
            j = schema.column_index.get(lit.column)
            if j is None:
                raise DataError(f"rule references unknown column '{lit.column}'")
            cov &= eval_literal(values[:, j], lit)
        counts.append(int(cov.sum()))
    return counts


# ---------------------------------------------------------------------------
# request models


class PredictRequest(BaseModel):
    features: list[float]


class ExplainRequest(BaseModel):
    method: str
    features: list[float]
    options: dict | None = None


class ContrastRequest(BaseModel):
    mode: str
    features: list[float]
    options: dict | None = None


class PrototypesRequest(BaseModel):
    features: list[float]
    m: int = 5


class RulesApplyRequest(BaseModel):
    features: list[float]


def _error(status, code, message):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="xnids", version="0.1.0", docs_url=None, redoc_url=None)
    d = state.schema.n_encoded

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "malformed", "message": str(exc.errors()[:1])})

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def check_features(features):
        if len(features) != d:
            _error(400, "malformed", f"expected {d} features, got {len(features)}")
        x = np.asarray(features, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            _error(422, "out_of_range", "features must be finite")
        if x.min() < 0.0 or x.max() > 1.0:
            _error(422, "out_of_range", "features must lie in [0, 1]")
        return x

    def model_fn(X):
        return nn.attack_probability(state.model, X)

    @app.get("/api/meta")
    def meta():
        schema = state.schema
        return {
            "encoded_columns": list(schema.encoded_columns),
            "features": [{"name": f.name, "kind": f.kind} for f in schema.features],
            "groups": {
                feat: {
                    "start": start,
                    "size": size,
                    "categories": list(schema.vocab[feat]),
                }
                for feat, (start, size) in schema.groups.items()
            },
            "col_min": [float(v) for v in schema.col_min],
            "col_max": [float(v) for v in schema.col_max],
            "splits": {name: m.n_rows for name, m in state.splits.items()},
            "model_fingerprint": state.model.fingerprint(),
            "schema_id": schema.schema_id(),
            "seed": state.seed,
        }

    @app.get("/api/instances")
    def instances(split: str = Query("test"), offset: int = Query(0, ge=0),
                  limit: int = Query(20, ge=1, le=200)):
        if split not in state.splits:
            _error(400, "malformed", f"unknown split {split!r}")
        matrix = state.splits[split]
        end = min(offset + limit, matrix.n_rows)
        rows = []
        if end > offset:
            block = matrix.values[offset:end].astype(np.float64)
            probs = nn.forward(state.model, block)
            for k in range(end - offset):
                i = offset + k
                rows.append({
                    "index": i,
                    "split": split,
                    "encoded": [float(v) for v in block[k]],
                    "raw": state.schema.decode_row(block[k]),
                    "label": int(matrix.labels[i]),
                    "raw_label": matrix.raw_labels[i],
                    "predicted_class": int(np.argmax(probs[k])),
                    "probabilities": [float(p) for p in probs[k]],
                })
        return {"split": split, "offset": offset, "total": matrix.n_rows,
                "rows": rows}

    @app.post("/api/predict")
    def predict(req: PredictRequest):
        x = check_features(req.features)
        probs = nn.forward(state.model, x)[0]
        return {
            "probabilities": [float(p) for p in probs],
            "class": int(np.argmax(probs)),
        }

    @app.post("/api/explain")
    def explain(req: ExplainRequest):
        x = check_features(req.features)
        opts = req.options or {}
        seed = state.next_seed(opts.get("seed"))
        if req.method == "shap":
            n_coal = min(int(opts.get("coalitions", 400)), CAPS["shap_coalitions"])
            n_coal = max(n_coal, d + 2)
            n_bg = min(int(opts.get("background", 25)), CAPS["shap_background"])
            _check_budget(state, n_coal * n_bg)
            bg = sample_background(state.splits["train"].values, size=n_bg,
                                   seed=state.seed)
            attr = kernel_shap(model_fn, x, bg, n_coalitions=n_coal, seed=seed,
                               feature_names=state.schema.encoded_columns)
        elif req.method == "lime":
            n_samples = min(int(opts.get("samples", 1000)), CAPS["lime_samples"])
            n_samples = max(n_samples, 10)
            _check_budget(state, n_samples)
            cfg = LimeConfig(n_samples=n_samples,
                             top_k=min(int(opts.get("top_k", 10)), d), seed=seed)
            attr = explain_lime(model_fn, x, state.schema, state.stats, cfg)
        else:
            _error(400, "malformed", f"unknown method {req.method!r}")
        return reports.jsonable(reports.attribution_payload(attr)) | {"seed": seed}

    @app.post("/api/contrast")
    def contrast(req: ContrastRequest):
        x = check_features(req.features)
        opts = req.options or {}
        mode = req.mode.upper()
        if mode not in (cem.PN, cem.PP):
            _error(400, "malformed", f"mode must be 'pn' or 'pp', got {req.mode!r}")
        iterations = min(int(opts.get("iterations", 300)), CAPS["cem_iterations"])
        steps = min(int(opts.get("steps", 5)), CAPS["cem_steps"])
        _check_budget(state, iterations * steps * 4)
        cfg = cem.CemConfig(mode=mode, kappa=float(opts.get("kappa", 0.0)),
                            beta=float(opts.get("beta", 0.1)),
                            max_iterations=iterations, c_search_steps=steps)
        fn = cem.pertinent_negative if mode == cem.PN else cem.pertinent_positive
        result = fn(state.model, x, cfg,
                    feature_names=state.schema.encoded_columns)
        return reports.jsonable(reports.contrast_payload(result))

    @app.post("/api/prototypes")
    def prototypes(req: PrototypesRequest):
        x = check_features(req.features)
        m = req.m
        if m < 1:
            _error(400, "malformed", "m must be >= 1")
        m = min(m, CAPS["prototypes_m"])
        table = explain_instance_by_prototypes(state.splits["train"], state.model,
                                               x, m)
        return reports.jsonable(table)

    @app.get("/api/rules")
    def rules():
        return {
            "text": state.rules.render(),
            "clauses": [
                {"index": i, "text": c.render(), "n_literals": len(c),
                 "train_fire_count": state.rule_fire_counts[i]}
                for i, c in enumerate(state.rules.clauses)
            ],
            "provenance": state.rules.provenance,
        }

    @app.post("/api/rules/apply")
    def rules_apply(req: RulesApplyRequest):
        x = check_features(req.features)
        from ..brcg import eval_literal

        fired = []
        for i, clause in enumerate(state.rules.clauses):
            ok = True
            for lit in clause.literals:
                j = state.schema.column_index.get(lit.column)
                if j is None or not bool(eval_literal(np.array([x[j]]), lit)[0]):
                    ok = False
                    break
            if ok:
                fired.append(i)
        return {"fired": fired, "prediction": 1 if fired else 0}

    return app


def _check_budget(state: ServiceState, n_evals):
    est = n_evals / state.eval_rate
    if est > state.budget_seconds:
        raise HTTPException(status_code=503, detail={
            "code": "budget",
            "message": (f"estimated {est:.1f}s exceeds the {state.budget_seconds:.0f}s "
                        "budget; reduce sample counts"),
        })
