"""Command-line pipeline: ingest, summarize, train, evaluate, explain, serve.

Each subcommand runs one pipeline stage, writes its declared outputs,
and prints a single machine-parsable RESULT line. Exit codes: 1 usage,
2 data error, 3 numerical failure.
"""

import os
import sys

import click

from ..errors import DataError, NumericalError


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Global RNG seed for every seeded stage.")
@click.option("--threads", type=int, default=None,
              help="BLAS thread budget (applied before numeric imports).")
@click.pass_context
def cli(ctx, seed, threads):
    """Explainable network intrusion detection toolkit."""
    if threads is not None:
        _set_threads(threads)
    ctx.obj = {"seed": seed}


def _result(cmd, **kv):
    parts = [f"cmd={cmd}"] + [f"{k}={v}" for k, v in kv.items()]
    click.echo("RESULT " + " ".join(parts))


def _load_artifact(path):
    from ..dataset import load_dataset

    if not os.path.exists(path):
        raise DataError(f"dataset artifact not found: {path}")
    return load_dataset(path)


def _load_model(path):
    from ..nn import load_model

    if not os.path.exists(path):
        raise DataError(f"model artifact not found: {path}")
    return load_model(path)


def _split(splits, name):
    if name not in splits:
        raise DataError(f"split {name!r} not in artifact (has {sorted(splits)})")
    return splits[name]


def _instance(matrix, index):
    if not 0 <= index < matrix.n_rows:
        raise DataError(f"index {index} out of range [0, {matrix.n_rows})")
    return matrix.values[index].astype("float64")


@cli.command()
@click.option("--train", "train_path", required=True, type=click.Path())
@click.option("--test", "test_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def ingest(train_path, test_path, out):
    """Parse raw flow records, fit the schema, write the dataset artifact."""
    from ..dataset import encode, fit_schema, parse_nslkdd, save_dataset

    for p in (train_path, test_path):
        if not os.path.exists(p):
            raise DataError(f"input file not found: {p}")
    with open(train_path) as fh:
        train_tbl = parse_nslkdd(fh, source_name=os.path.basename(train_path))
    with open(test_path) as fh:
        test_tbl = parse_nslkdd(fh, source_name=os.path.basename(test_path))
    schema = fit_schema(train_tbl)
    splits = {
        "train": encode(train_tbl, schema),
        "test": encode(test_tbl, schema),
    }
    save_dataset(out, schema, splits)
    _result("ingest", rows_train=splits["train"].n_rows,
            rows_test=splits["test"].n_rows,
            columns=schema.n_encoded, out=out)


@cli.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def summary(obj, data, out):
    """Side-by-side train/test statistics from a dataset artifact."""
    from ..dataset import RecordTable, summarize_compare
    from . import reports

    schema, splits = _load_artifact(data)
    tables = {name: _decode_table(schema, m) for name, m in splits.items()}
    names = list(tables)
    if len(names) == 1:
        names = names * 2
    s = summarize_compare(tables[names[0]], tables[names[1]], names=(names[0], names[1]))
    report = reports.make_report("dataset_summary",
                                 reports.dataset_summary_payload(s),
                                 seed=obj["seed"], config={"data": data})
    reports.write_report(out, report)
    sides = s.tables
    _result("summary", **{f"rows_{k}": v["rows"] for k, v in sides.items()}, out=out)


def _decode_table(schema, matrix):
    """Rebuild a RecordTable view by inverting the encoding (for statistics)."""
    import numpy as np

    from ..dataset import CATEGORICAL, RecordTable

    numeric = {}
    categorical = {}
    values = matrix.values.astype("float64")
    for feat in schema.features:
        if feat.kind == CATEGORICAL:
            start, size = schema.groups[feat.name]
            seg = values[:, start : start + size]
            cats = schema.vocab[feat.name]
            col = []
            for row in seg:
                j = int(np.argmax(row)) if size else 0
                col.append(cats[j] if size and row[j] > 0.5 else "(unseen)")
            categorical[feat.name] = col
        else:
            j = schema.column_index[feat.name]
            lo, hi = schema.col_min[j], schema.col_max[j]
            numeric[feat.name] = values[:, j] * (hi - lo) + lo
    return RecordTable(features=schema.features, numeric=numeric,
                       categorical=categorical, labels=list(matrix.raw_labels))


@cli.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--batch", type=int, default=512, show_default=True)
@click.option("--dropout", type=float, default=0.1, show_default=True)
@click.option("--seed", "seed_override", type=int, default=None)
@click.option("--layers", default="122,1024,768,512,2", show_default=True,
              help="Comma-separated layer sizes.")
@click.option("--sample", type=int, default=None,
              help="Train on a seeded subsample of this many rows.")
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def train(obj, data, epochs, lr, batch, dropout, seed_override, layers, sample, out):
    """Train the feed-forward classifier and write the model artifact."""
    import numpy as np

    from .. import nn

    seed = obj["seed"] if seed_override is None else seed_override
    schema, splits = _load_artifact(data)
    train_m = _split(splits, "train")
    if sample is not None and sample < train_m.n_rows:
        rng = np.random.default_rng(seed)
        idx = rng.choice(train_m.n_rows, size=sample, replace=False)
        idx.sort()
        from ..dataset import EncodedMatrix

        train_m = EncodedMatrix(values=train_m.values[idx],
                                labels=train_m.labels[idx],
                                raw_labels=[train_m.raw_labels[i] for i in idx],
                                schema_id=train_m.schema_id)
    sizes = tuple(int(s) for s in layers.split(","))
    if sizes[0] != schema.n_encoded:
        raise DataError(
            f"first layer must be {schema.n_encoded} (encoded columns), got {sizes[0]}")
    model = nn.init_model(sizes, dropout_rate=dropout, seed=seed)
    cfg = nn.TrainConfig(learning_rate=lr, epochs=epochs, batch_size=batch,
                         dropout_rate=dropout, rng_seed=seed)
    trained, history = nn.train(model, train_m, cfg)
    nn.save_model(out, trained)
    final_loss = history.loss[-1] if history.loss else float("nan")
    final_acc = history.accuracy[-1] if history.accuracy else float("nan")
    _result("train", epochs=epochs, rows=train_m.n_rows,
            final_loss=f"{final_loss:.6f}", final_accuracy=f"{final_acc:.4f}",
            out=out)


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", type=click.Choice(["train", "test"]),
              default="test", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def eval_cmd(obj, model_path, data, split_name, out):
    """Evaluate the classifier; write a metrics report."""
    from .. import nn
    from . import reports

    model = _load_model(model_path)
    _, splits = _load_artifact(data)
    metrics = nn.evaluate(model, _split(splits, split_name))
    report = reports.make_report(
        "metrics", reports.metrics_payload(metrics), seed=obj["seed"],
        config={"model": model.fingerprint(), "data": data, "split": split_name})
    reports.write_report(out, report)
    _result("eval", split=split_name, accuracy=f"{metrics.accuracy:.4f}",
            precision=f"{metrics.precision:.4f}", recall=f"{metrics.recall:.4f}",
            f1=f"{metrics.f1:.4f}", out=out)


@cli.group()
def explain():
    """Attribution explanations for single instances or samples."""


def _model_fn(model):
    from .. import nn

    return lambda X: nn.attack_probability(model, X)


@explain.command("shap")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--index", type=int, required=True)
@click.option("--background", type=int, default=100, show_default=True)
@click.option("--coalitions", type=int, default=None,
              help="Sampled coalitions (default: 2d+2048, exhaustive when d<=15).")
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def explain_shap(obj, model_path, data, split_name, index, background,
                 coalitions, svg_path, out):
    """Shapley-kernel attribution for one instance."""
    from ..shap import force_data, kernel_shap, sample_background
    from . import reports, svg

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    x = _instance(matrix, index)
    bg = sample_background(_split(splits, "train").values, size=background,
                           seed=obj["seed"])
    attr = kernel_shap(_model_fn(model), x, bg,
                       n_coalitions=coalitions if coalitions else "auto",
                       seed=obj["seed"], feature_names=schema.encoded_columns)
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "index": index, "background": background,
              "coalitions": coalitions or "auto"}
    report = reports.make_report("attribution_shap",
                                 reports.attribution_payload(attr),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    if svg_path:
        with open(svg_path, "w") as fh:
            fh.write(svg.render_force(force_data(attr)))
    top = attr.feature_names[int(max(range(len(attr.phi)),
                                     key=lambda i: abs(attr.phi[i])))]
    _result("explain_shap", index=index, output=f"{attr.model_output:.4f}",
            base=f"{attr.base_value:.4f}", top=top, out=out)


@explain.command("lime")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--index", type=int, required=True)
@click.option("--samples", type=int, default=5000, show_default=True)
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def explain_lime(obj, model_path, data, split_name, index, samples, top_k,
                 svg_path, out):
    """Local surrogate explanation for one instance."""
    from ..dataset import column_stats
    from ..lime import LimeConfig, explain_lime as lime_explain
    from . import reports, svg

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    x = _instance(matrix, index)
    stats = column_stats(_split(splits, "train"), schema)
    cfg = LimeConfig(n_samples=samples, top_k=top_k, seed=obj["seed"])
    attr = lime_explain(_model_fn(model), x, schema, stats, cfg)
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "index": index, "samples": samples, "top_k": top_k}
    report = reports.make_report("attribution_lime",
                                 reports.attribution_payload(attr),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    if svg_path:
        with open(svg_path, "w") as fh:
            fh.write(svg.render_lime_bars(attr))
    _result("explain_lime", index=index, output=f"{attr.model_output:.4f}",
            nonzero=int((attr.phi != 0).sum()), out=out)


@explain.command("summary")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--count", type=int, default=200, show_default=True)
@click.option("--background", type=int, default=50, show_default=True)
@click.option("--coalitions", type=int, default=500, show_default=True)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def explain_summary(obj, model_path, data, split_name, count, background,
                    coalitions, svg_path, out):
    """Global summary over a seeded sample of instances."""
    import numpy as np

    from ..shap import global_summary, kernel_shap, sample_background
    from . import reports, svg

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    rng = np.random.default_rng(obj["seed"])
    take = min(count, matrix.n_rows)
    idx = rng.choice(matrix.n_rows, size=take, replace=False)
    idx.sort()
    bg = sample_background(_split(splits, "train").values, size=background,
                           seed=obj["seed"])
    fn = _model_fn(model)
    attrs = [
        kernel_shap(fn, matrix.values[i].astype("float64"), bg,
                    n_coalitions=coalitions, seed=obj["seed"] + int(i),
                    feature_names=schema.encoded_columns)
        for i in idx
    ]
    s = global_summary(attrs)
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "count": count, "background": background, "coalitions": coalitions}
    report = reports.make_report("shap_summary", reports.summary_payload(s),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    if svg_path:
        with open(svg_path, "w") as fh:
            fh.write(svg.render_summary(s))
    _result("explain_summary", instances=take,
            top=s.feature_names[int(s.ranking[0])], out=out)


@explain.command("stacked")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--per-group", type=int, default=50, show_default=True)
@click.option("--groups", "n_groups", type=int, default=4, show_default=True)
@click.option("--background", type=int, default=50, show_default=True)
@click.option("--coalitions", type=int, default=500, show_default=True)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def explain_stacked(obj, model_path, data, split_name, per_group, n_groups,
                    background, coalitions, svg_path, out):
    """Stacked force columns for the most frequent raw labels."""
    import numpy as np

    from ..shap import kernel_shap, sample_background, stacked_force
    from . import reports, svg

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    counts = {}
    for lab in matrix.raw_labels:
        counts[lab] = counts.get(lab, 0) + 1
    top_labels = [lab for lab, _ in
                  sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n_groups]]
    rng = np.random.default_rng(obj["seed"])
    picks = []
    for lab in top_labels:
        rows = [i for i, l in enumerate(matrix.raw_labels) if l == lab]
        take = min(per_group, len(rows))
        chosen = rng.choice(len(rows), size=take, replace=False)
        picks.extend((rows[int(c)], lab) for c in sorted(chosen))
    bg = sample_background(_split(splits, "train").values, size=background,
                           seed=obj["seed"])
    fn = _model_fn(model)
    attrs = [
        kernel_shap(fn, matrix.values[i].astype("float64"), bg,
                    n_coalitions=coalitions, seed=obj["seed"] + int(i),
                    feature_names=schema.encoded_columns)
        for i, _ in picks
    ]
    stacked = stacked_force(attrs, [lab for _, lab in picks])
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "per_group": per_group, "groups": top_labels,
              "background": background, "coalitions": coalitions}
    report = reports.make_report("stacked_force", reports.stacked_payload(stacked),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    if svg_path:
        with open(svg_path, "w") as fh:
            fh.write(svg.render_stacked(stacked))
    _result("explain_stacked", instances=len(picks),
            groups=",".join(top_labels), out=out)


@cli.group()
def contrast():
    """Contrastive explanations: class flips and minimal cores."""


def _contrast_common(obj, model_path, data, split_name, index, mode, kappa,
                     beta, steps, iterations, out):
    from .. import cem
    from . import reports

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    x = _instance(matrix, index)
    cfg = cem.CemConfig(mode=mode, kappa=kappa, beta=beta,
                        c_search_steps=steps, max_iterations=iterations)
    fn = cem.pertinent_negative if mode == cem.PN else cem.pertinent_positive
    result = fn(model, x, cfg, feature_names=schema.encoded_columns)
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "index": index, "mode": mode, "kappa": kappa, "beta": beta,
              "steps": steps, "iterations": iterations}
    report = reports.make_report("contrast", reports.contrast_payload(result),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    _result("contrast", mode=mode.lower(), index=index,
            converged=str(result.converged).lower(),
            changed=len(result.changed_features),
            after_class=result.prediction_after["class"], out=out)


def _contrast_options(fn):
    for deco in reversed([
        click.option("--model", "model_path", required=True, type=click.Path()),
        click.option("--data", required=True, type=click.Path()),
        click.option("--split", "split_name", default="test", show_default=True),
        click.option("--index", type=int, required=True),
        click.option("--kappa", type=float, default=0.0, show_default=True),
        click.option("--beta", type=float, default=0.1, show_default=True),
        click.option("--steps", type=int, default=9, show_default=True),
        click.option("--iterations", type=int, default=1000, show_default=True),
        click.option("--out", required=True, type=click.Path()),
    ]):
        fn = deco(fn)
    return fn


@contrast.command("pn")
@_contrast_options
@click.pass_obj
def contrast_pn(obj, model_path, data, split_name, index, kappa, beta, steps,
                iterations, out):
    """Pertinent negative: minimal additions that flip the class."""
    from .. import cem

    _contrast_common(obj, model_path, data, split_name, index, cem.PN, kappa,
                     beta, steps, iterations, out)


@contrast.command("pp")
@_contrast_options
@click.pass_obj
def contrast_pp(obj, model_path, data, split_name, index, kappa, beta, steps,
                iterations, out):
    """Pertinent positive: minimal retained part that keeps the class."""
    from .. import cem

    _contrast_common(obj, model_path, data, split_name, index, cem.PP, kappa,
                     beta, steps, iterations, out)


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--index", type=int, required=True)
@click.option("--m", "m_protos", type=int, default=5, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def prototypes(obj, model_path, data, split_name, index, m_protos, out):
    """Weighted training prototypes that justify one prediction."""
    from ..protodash import explain_instance_by_prototypes
    from . import reports

    model = _load_model(model_path)
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    x = _instance(matrix, index)
    table = explain_instance_by_prototypes(_split(splits, "train"), model, x,
                                           m_protos)
    config = {"model": model.fingerprint(), "data": data, "split": split_name,
              "index": index, "m": m_protos}
    report = reports.make_report("prototypes", reports.prototypes_payload(table),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    top_w = table["prototypes"][0]["weight"] if table["prototypes"] else 0.0
    _result("prototypes", index=index, m=m_protos, top_weight=f"{top_w:.4f}",
            out=out)


@cli.group()
def rules():
    """Boolean DNF rule learning and evaluation."""


@rules.command("train")
@click.option("--data", required=True, type=click.Path())
@click.option("--degree", type=int, default=3, show_default=True)
@click.option("--lambda0", type=float, default=1e-3, show_default=True)
@click.option("--lambda1", type=float, default=1e-3, show_default=True)
@click.option("--sample", type=int, default=None,
              help="Learn on a seeded subsample of this many training rows.")
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def rules_train(obj, data, degree, lambda0, lambda1, sample, out):
    """Learn a DNF rule set from the training split."""
    import numpy as np

    from ..brcg import BrcgConfig, binarize, evaluate_rules, train_brcg
    from . import reports

    schema, splits = _load_artifact(data)
    train_m = _split(splits, "train")
    if sample is not None and sample < train_m.n_rows:
        rng = np.random.default_rng(obj["seed"])
        idx = rng.choice(train_m.n_rows, size=sample, replace=False)
        idx.sort()
        from ..dataset import EncodedMatrix

        train_m = EncodedMatrix(values=train_m.values[idx],
                                labels=train_m.labels[idx],
                                raw_labels=[train_m.raw_labels[i] for i in idx],
                                schema_id=train_m.schema_id)
    cfg = BrcgConfig(max_degree=degree, lambda0=lambda0, lambda1=lambda1)
    bin_matrix = binarize(train_m, schema, cfg)
    ruleset = train_brcg(bin_matrix, train_m.labels, cfg)
    _, metrics = evaluate_rules(ruleset, train_m, schema)

    with open(out, "w") as fh:
        fh.write(ruleset.render())
    config = {"data": data, "degree": degree, "lambda0": lambda0,
              "lambda1": lambda1, "sample": sample}
    report = reports.make_report("ruleset", reports.ruleset_payload(ruleset, metrics),
                                 seed=obj["seed"], config=config)
    reports.write_report(out + ".json", report)
    _result("rules_train", clauses=len(ruleset.clauses),
            train_accuracy=f"{metrics.accuracy:.4f}", out=out)


@rules.command("eval")
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--split", "split_name", type=click.Choice(["train", "test"]),
              default="test", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def rules_eval(obj, rules_path, data, split_name, out):
    """Apply a rule file to a split; write the metrics report."""
    from ..brcg import evaluate_rules, parse_rules
    from . import reports

    if not os.path.exists(rules_path):
        raise DataError(f"rules file not found: {rules_path}")
    with open(rules_path) as fh:
        ruleset = parse_rules(fh.read())
    schema, splits = _load_artifact(data)
    matrix = _split(splits, split_name)
    _, metrics = evaluate_rules(ruleset, matrix, schema)
    config = {"rules": rules_path, "data": data, "split": split_name}
    report = reports.make_report("ruleset", reports.ruleset_payload(ruleset, metrics),
                                 seed=obj["seed"], config=config)
    reports.write_report(out, report)
    _result("rules_eval", split=split_name, clauses=len(ruleset.clauses),
            accuracy=f"{metrics.accuracy:.4f}", out=out)


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--rules", "rules_path", type=click.Path(), default=None)
@click.option("--budget", type=float, default=30.0, show_default=True,
              help="Per-request compute budget in seconds.")
@click.pass_obj
def serve(obj, model_path, data, port, host, rules_path, budget):
    """Serve the JSON API for the analyst console."""
    import uvicorn

    from .service import build_state, create_app

    state = build_state(model_path, data, rules_path=rules_path,
                        seed=obj["seed"], budget_seconds=budget)
    app = create_app(state)
    click.echo(f"serving on http://{host}:{port} "
               f"(model {state.model.fingerprint()}, seed {obj['seed']})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
