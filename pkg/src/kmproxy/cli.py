"""Command-line front end.

Exit codes: 0 on success, 2 for flag/usage problems, 3 for bad data,
format violations, or missing input files.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import distances, evaluate, overlap as overlap_mod, proxy, store
from .errors import DataError

_METRIC = click.Choice(list(distances.METRICS))
_POLICY = click.Choice(list(evaluate.POLICIES))


def _handling_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _set_threads(threads: int | None) -> None:
    if threads is None:
        return
    import numba

    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def _write_json(obj, path: str) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
@click.version_option(package_name="kmproxy")
def main():
    """Proxy-based reject-option classification and dataset overlap scoring."""


@main.command()
@click.option("--out", required=True, help="Output dataset path (.jsonl or binary).")
@click.option("--dim", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--classes", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--per-class", type=click.IntRange(min=1), default=500, show_default=True,
              help="Samples per class.")
@click.option("--clusters-per-class", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--spread", type=click.FloatRange(min=0, min_open=True), default=1.0,
              show_default=True, help="Gaussian standard deviation per cluster.")
@click.option("--separation", type=float, default=10.0, show_default=True,
              help="Minimum distance between cluster centers.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--name", default=None, help="Dataset name (default: output file stem).")
@_handling_errors
def gen(out, dim, classes, per_class, clusters_per_class, spread, separation, seed, name):
    """Generate a Gaussian-blob dataset on a deterministic center grid.

    Cluster j is placed by the grid and labeled j modulo the class count,
    so consecutive grid positions interleave classes.
    """
    m = classes * clusters_per_class
    centers = evaluate.grid_centers(m, dim, separation)
    cluster_classes = [j % classes for j in range(m)]
    base, extra = divmod(per_class, clusters_per_class)
    sizes = [base + (1 if (j // classes) < extra else 0) for j in range(m)]
    ds = evaluate.gen_blobs(
        name or Path(out).stem, dim, classes, centers, cluster_classes, sizes, spread, seed
    )
    store.save_dataset(ds, out)
    click.echo(f"wrote {len(ds)} records ({classes} classes, dim {dim}) to {out}")


@main.command()
@click.argument("src")
@click.argument("dst")
@_handling_errors
def convert(src, dst):
    """Convert a dataset between JSONL and the binary format (by extension)."""
    ds = store.load_dataset(src)
    store.save_dataset(ds, dst)
    click.echo(f"wrote {len(ds)} records to {dst}")


@main.command()
@click.option("--in", "src", required=True, help="Input dataset.")
@click.option("--train-fraction", type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=0.7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-train", required=True)
@click.option("--out-test", required=True)
@_handling_errors
def split(src, train_fraction, seed, out_train, out_test):
    """Class-balanced random split into train and test files."""
    ds = store.load_dataset(src)
    train, test = store.class_balanced_split(ds, train_fraction, seed)
    store.save_dataset(train, out_train)
    store.save_dataset(test, out_test)
    click.echo(f"train: {len(train)} records -> {out_train}")
    click.echo(f"test:  {len(test)} records -> {out_test}")


@main.command()
@click.option("--in", "src", required=True, help="Training dataset.")
@click.option("--k", type=click.IntRange(min=1), default=4, show_default=True,
              help="Proxies per class.")
@click.option("--metric", type=_METRIC, default=distances.L2, show_default=True)
@click.option("--classes", type=click.IntRange(min=1), default=None,
              help="Override the inferred class count.")
@click.option("--out", required=True, help="Model output path.")
@_handling_errors
def fit(src, k, metric, classes, out):
    """Fit proxy centers on a dataset and freeze coverage radii."""
    kwargs = {"num_classes": classes} if classes is not None else {}
    ds = store.load_dataset(src, **kwargs)
    model = proxy.fit_model(ds, k, metric)
    click.echo(f"model: k={k} metric={metric} dim={model.dim} classes={model.num_classes}")
    for cls in range(model.num_classes):
        sel = model.proxy_labels == cls
        act = model.active & sel
        radii = model.radii[act]
        out_r = f"radii {radii.min():.4f}..{radii.max():.4f}" if radii.size else "no radii"
        click.echo(f"class {cls}: {int(act.sum())}/{int(sel.sum())} active proxies, {out_r}")
    proxy.save_model(model, out)
    click.echo(f"wrote model to {out}")


@main.command()
@click.option("--train", required=True, help="Training dataset (defines centroids).")
@click.option("--data", required=True, help="Dataset to classify.")
@click.option("--metric", type=_METRIC, default=distances.L2, show_default=True)
@click.option("--out", required=True, help="Predictions JSONL output.")
@click.option("--threads", type=click.IntRange(min=1), default=None)
@_handling_errors
def predict(train, data, metric, out, threads):
    """Nearest class-centroid baseline predictions."""
    _set_threads(threads)
    train_ds = store.load_dataset(train)
    ds = store.load_dataset(data)
    preds = evaluate.nearest_center_classify(train_ds, ds, metric)
    evaluate.save_predictions(preds, out)
    click.echo(f"wrote {len(preds)} predictions to {out}")


@main.command()
@click.option("--model", "model_path", required=True)
@click.option("--data", required=True, help="Evaluation dataset with true labels.")
@click.option("--preds", required=True, help="Predictions JSONL.")
@click.option("--policy", type=_POLICY, default="either", show_default=True)
@click.option("--out-decisions", default=None, help="Per-sample decisions JSONL.")
@click.option("--out-report", default=None, help="Selective metrics JSON.")
@click.option("--figures", default=None, help="Directory for rendered figures.")
@click.option("--threads", type=click.IntRange(min=1), default=None)
@_handling_errors
def score(model_path, data, preds, policy, out_decisions, out_report, figures, threads):
    """Apply the reject option to predictions and report metrics over the kept slice."""
    _set_threads(threads)
    model = proxy.load_model(model_path)
    ds = store.load_dataset(data)
    predictions = evaluate.load_predictions(preds)
    decisions = evaluate.decide(model, ds, predictions, policy)
    report = evaluate.selective_metrics(ds, predictions, decisions)
    if out_decisions:
        evaluate.save_decisions(decisions, out_decisions)
    if out_report:
        _write_json(evaluate.report_to_dict(report), out_report)
    if figures:
        from . import figures as figmod

        path = figmod.decision_summary(report, decisions, figures)
        click.echo(f"figure: {path}")
    if report.nothing_accepted:
        click.echo("warning: no samples accepted; metrics are all zero", err=True)
    click.echo(
        f"macro_f1={report.macro_f1:.4f} coverage={report.coverage:.4f} "
        f"accepted={report.accepted}/{report.total}"
    )


@main.command("overlap")
@click.argument("a")
@click.argument("b")
@click.option("--metric", type=_METRIC, default=distances.COSINE, show_default=True)
@click.option("--out", default=None, help="Report JSON path.")
@click.option("--per-point", "per_point_tsv", default=None,
              help="Per-point ratio TSV path (points of A).")
@click.option("--include-per-point", is_flag=True,
              help="Also embed per-point rows in the JSON report.")
@click.option("--exact", is_flag=True, help="Force the sequential exact kernels.")
@click.option("--figures", default=None, help="Directory for rendered figures.")
@click.option("--threads", type=click.IntRange(min=1), default=None)
@_handling_errors
def overlap_cmd(a, b, metric, out, per_point_tsv, include_per_point, exact, figures, threads):
    """Nearest-neighbor overlap between datasets A and B (A = training side)."""
    _set_threads(threads)
    ds_a = store.load_dataset(a)
    ds_b = store.load_dataset(b)
    want_rows = bool(per_point_tsv or include_per_point or figures)
    report = overlap_mod.directional_overlap(
        ds_a, ds_b, metric, exact=True if exact else None, include_per_point=want_rows
    )
    if per_point_tsv:
        overlap_mod.write_per_point_tsv(report.per_point, per_point_tsv)
    if figures:
        from . import figures as figmod

        path = figmod.ratio_histogram(report, figures)
        click.echo(f"figure: {path}")
    if out:
        if not include_per_point:
            report.per_point = []
        overlap_mod.write_overlap_json(report, out)
    click.echo(
        f"p_a={report.p_a:.4f} p_b={report.p_b:.4f} "
        f"O={report.o_bidirectional:.4f} O_directional={report.o_directional:.4f}"
    )


def _load_manifest(path: str):
    mpath = Path(path)
    if not mpath.exists():
        raise FileNotFoundError(f"no such manifest: {mpath}")
    try:
        spec = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{mpath.name}: malformed JSON ({exc.msg})") from None
    for key in ("models", "evals", "predictions"):
        if key not in spec:
            raise DataError(f"{mpath.name}: missing {key!r} section")
    root = mpath.parent

    def resolve(rel: str) -> Path:
        p = root / rel
        if not p.exists():
            raise FileNotFoundError(f"manifest references missing file: {p}")
        return p

    models, train_sets, eval_sets = {}, {}, {}
    for entry in spec["models"]:
        name = entry["name"]
        models[name] = proxy.load_model(resolve(entry["model"]))
        train_sets[name] = store.load_dataset(resolve(entry["train"]))
    for entry in spec["evals"]:
        eval_sets[entry["name"]] = store.load_dataset(resolve(entry["data"]))
    predictions = {}
    for mname, per_eval in spec["predictions"].items():
        for ename, rel in per_eval.items():
            predictions[(mname, ename)] = evaluate.load_predictions(resolve(rel))
    return models, train_sets, eval_sets, predictions


@main.command("eval")
@click.option("--manifest", required=True,
              help="JSON manifest: models, evals, predictions per (model, eval) pair.")
@click.option("--policy", type=_POLICY, default="either", show_default=True)
@click.option("--metric", type=_METRIC, default=distances.COSINE, show_default=True,
              help="Metric for the per-cell train/eval overlap.")
@click.option("--out-json", default=None)
@click.option("--out-table", default=None, help="Plain-text grid output path.")
@click.option("--figures", default=None, help="Directory for rendered figures.")
@click.option("--threads", type=click.IntRange(min=1), default=None)
@_handling_errors
def eval_cmd(manifest, policy, metric, out_json, out_table, figures, threads):
    """Cross matrix: every model scored against every eval set."""
    _set_threads(threads)
    models, train_sets, eval_sets, predictions = _load_manifest(manifest)
    matrix = evaluate.cross_matrix(models, train_sets, eval_sets, predictions, policy, metric)
    table = evaluate.render_matrix_table(matrix)
    if out_json:
        _write_json(evaluate.matrix_to_dict(matrix), out_json)
    if out_table:
        Path(out_table).write_text(table, encoding="utf-8")
    if figures:
        from . import figures as figmod

        for path in (figmod.matrix_heatmap(matrix, figures),
                     figmod.overlap_vs_f1(matrix, figures)):
            click.echo(f"figure: {path}")
    click.echo(table, nl=False)


if __name__ == "__main__":
    main()
