"""Report bundles: canonical JSON documents for every pipeline stage.

Reports are byte-deterministic for a fixed seed/config/input set: keys
are sorted, floats use repr round-tripping, and the creation timestamp
honors SOURCE_DATE_EPOCH (reproducible-build convention) before falling
back to the wall clock.
"""

import datetime
import hashlib
import json
import os

import numpy as np

from .. import __version__


def _created_at():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        ts = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        ts = datetime.datetime.now(tz=datetime.timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def config_fingerprint(config: dict) -> str:
    blob = json.dumps(jsonable(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def make_report(kind: str, payload: dict, *, seed, config: dict) -> dict:
    return {
        "kind": kind,
        "metadata": {
            "tool": "xnids",
            "version": __version__,
            "seed": seed,
            "config": jsonable(config),
            "config_fingerprint": config_fingerprint(config),
            "created_at": _created_at(),
        },
        "payload": jsonable(payload),
    }


def write_report(path, report: dict):
    data = json.dumps(report, sort_keys=True, indent=1) + "\n"
    with open(path, "w") as fh:
        fh.write(data)
    return data


# ---------------------------------------------------------------------------
# payload builders


def metrics_payload(metrics):
    return metrics.as_dict()


def attribution_payload(attr):
    return {
        "method": attr.method,
        "feature_names": list(attr.feature_names),
        "phi": attr.phi,
        "base_value": attr.base_value,
        "model_output": attr.model_output,
        "target_class": attr.target_class,
        "instance": attr.instance,
    }


def summary_payload(summary, top=20):
    order = summary.ranking[:top]
    return {
        "ranking": [summary.feature_names[i] for i in summary.ranking],
        "mean_abs_phi": summary.mean_abs_phi,
        "top_features": [
            {
                "feature": summary.feature_names[i],
                "mean_abs_phi": float(summary.mean_abs_phi[i]),
                "phi": summary.phi_matrix[:, i],
                "values": summary.value_matrix[:, i],
            }
            for i in order
        ],
        "n_instances": int(summary.phi_matrix.shape[0]),
    }


def force_payload(force):
    def seg(s):
        return {"feature": s.feature, "value": s.value, "phi": s.phi}

    return {
        "base_value": force.base_value,
        "model_output": force.model_output,
        "positive": [seg(s) for s in force.positive],
        "negative": [seg(s) for s in force.negative],
    }


def stacked_payload(stacked):
    return {
        "feature_names": list(stacked.feature_names),
        "groups": [{"label": lab, "columns": cols} for lab, cols in stacked.groups],
        "model_outputs": stacked.model_outputs,
        "phi_columns": stacked.phi_columns,
        "base_value": stacked.base_value,
    }


def contrast_payload(result):
    return {
        "mode": result.mode,
        "delta": result.delta,
        "changed_features": [
            {"feature": n, "original": o, "new": v}
            for n, o, v in result.changed_features
        ],
        "prediction_before": result.prediction_before,
        "prediction_after": result.prediction_after,
        "converged": result.converged,
        "final_objective": result.final_objective,
        "l1": result.l1,
        "l2": result.l2,
    }


def prototypes_payload(table):
    return table


def ruleset_payload(rules, metrics=None):
    payload = {
        "text": rules.render(),
        "provenance": rules.provenance,
        "lambda0": rules.lambda0,
        "lambda1": rules.lambda1,
        "search_truncated": rules.search_truncated,
        "clauses": [
            {"index": i, "text": c.render(), "n_literals": len(c)}
            for i, c in enumerate(rules.clauses)
        ],
        "clause_stats": rules.clause_stats,
        "master_objective_trace": rules.master_objective_trace,
    }
    if metrics is not None:
        payload["metrics"] = metrics.as_dict()
    return payload


def dataset_summary_payload(summary):
    return summary.as_dict()
