"""Command-line entry point: train, gridsearch, evaluate, predict.

Artifacts are written atomically; a (config, seed) pair reproduces every
emitted number byte-for-byte.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import re
import sys

import numpy as np

from . import hybrid, metrics, pipeline as pl, serialize
from .config import RunConfig, load_config
from .errors import AugmentationError, SchemaError, ShapeError, SplitError
from .hybrid import TrainConfig
from .qsim import CircuitSpec

log = logging.getLogger("hyquc")

LOSS_CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc"


def _row_type_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _safe_name(row_type: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", row_type) or "default"


def _subset(data: pl.TabularDataset, idx) -> pl.TabularDataset:
    return pl.TabularDataset(list(data.column_names),
                             [data.rows[i] for i in idx],
                             data.label_column, data.row_type_column)


def _merged_labels(data: pl.TabularDataset, merges) -> list:
    merge_map = dict(merges)
    out = []
    for v in data.column(data.label_column):
        if pl._is_missing(v):
            raise SchemaError("missing value in the label column")
        s = str(v).strip()
        out.append(merge_map.get(s, s))
    return out


def _preprocess_row_type(raw: pl.TabularDataset, row_type: str, cfg: RunConfig,
                         seed: int, width: int, requested: int = None):
    """Shared front half of train/gridsearch: drops, split, encode, PCA at the
    requested circuit width, scaling, fitted pipeline and audit report."""
    requested = cfg.pca_components if requested is None else requested
    opts = cfg.options_for(row_type)
    report = pl.PreprocessReport(row_type)
    data = pl.drop_inapplicable_columns(raw, opts.exclude_columns)
    data, dropped = pl.drop_high_missing(data, cfg.missing_threshold)
    report.dropped_columns = {name: frac for name, frac in dropped}
    report.merged_classes = list(opts.merges)

    y_all, class_names = pl.encode_labels(_merged_labels(data, opts.merges))
    tr, va, te = pl.stratified_split_indices(y_all, cfg.split_fractions, seed)
    train_tab, val_tab, test_tab = (_subset(data, i) for i in (tr, va, te))

    encoder = pl.ColumnEncoder(cfg.date_format).fit(train_tab)
    Xtr = encoder.transform(train_tab)
    n, d = Xtr.shape
    k_fit = min(max(requested, width), n - 1, d)
    pca = pl.pca_fit(Xtr, k_fit)
    report.requested_components = requested
    applied = pl.select_components(pca, requested, cap=width)
    report.applied_components = applied
    Ztr, bounds = pl.scale_to_angle_range(pl.pca_transform(pca, Xtr)[:, :applied])

    pipe = pl.RowTypePipeline(
        row_type=row_type,
        exclude_columns=list(opts.exclude_columns),
        dropped_missing=[name for name, _ in dropped],
        merges=list(opts.merges),
        class_names=class_names,
        encoder=encoder,
        pca=pca,
        n_components=applied,
        bounds=bounds,
        label_column=cfg.label_column,
        row_type_column=cfg.row_type_column,
    )
    train_ds = pl.RowTypeDataset(row_type, Ztr, y_all[tr], class_names)
    return pipe, report, train_ds, pipe.transform(val_tab), pipe.transform(test_tab)


def fit_row_type(raw: pl.TabularDataset, row_type: str, cfg: RunConfig, seed: int):
    """Full per-row-type training: preprocess, SMOTE the training split, fit,
    evaluate on validation and test."""
    pipe, report, train_ds, val_ds, test_ds = _preprocess_row_type(
        raw, row_type, cfg, seed, width=cfg.n_qubits
    )
    report.counts_before_smote = train_ds.class_counts()
    train_aug = pl.smote_oversample(train_ds, cfg.smote_k, seed)
    report.counts_after_smote = train_aug.class_counts()

    applied = pipe.n_components
    spec = CircuitSpec(applied, cfg.n_layers, cfg.embedding_axis,
                       min(cfg.entangler_range, max(applied - 1, 1)))
    model = hybrid.init_model(
        spec, len(pipe.class_names), np.random.default_rng(seed), row_type,
        hidden=cfg.hidden, hidden_activation=cfg.hidden_activation,
        single_layer_head=cfg.single_layer_head,
    )
    tconf = TrainConfig(cfg.epochs, cfg.learning_rate, cfg.batch_size, rng_seed=seed)
    model, history = hybrid.fit(model, train_aug, val_ds, tconf)

    train_loss, train_acc, _ = hybrid.evaluate(model, train_ds.X, train_ds.y)
    val_loss, val_acc, _ = hybrid.evaluate(model, val_ds.X, val_ds.y)
    test_loss, test_acc, probs = hybrid.evaluate(model, test_ds.X, test_ds.y)
    preds = np.argmax(probs, axis=1)
    cm = metrics.confusion_matrix(test_ds.y, preds, len(pipe.class_names),
                                  pipe.class_names)
    rep = metrics.build_report(cm, probs, test_ds.y, extra={
        "train_accuracy": train_acc,
        "val_accuracy": val_acc,
        "test_accuracy": test_acc,
        "train_loss": train_loss,
        "val_loss": val_loss,
        "test_loss": test_loss,
        "seed": seed,
        "split_fractions": list(cfg.split_fractions),
    })
    return model, pipe, history, rep, report


def _loss_csv(history) -> str:
    lines = [LOSS_CSV_HEADER]
    for i, rec in enumerate(history, 1):
        lines.append(f"{i},{rec.train_loss!r},{rec.train_accuracy!r},"
                     f"{rec.val_loss!r},{rec.val_accuracy!r}")
    return "\n".join(lines) + "\n"


def _load_partitions(cfg: RunConfig):
    data = pl.load_csv(cfg.csv_path, cfg.label_column, cfg.row_type_column)
    if not data.rows:
        raise SchemaError(f"{cfg.csv_path}: no data rows")
    if cfg.row_type_column is None:
        return {"default": data}
    code_map = (pl.load_row_type_map(cfg.row_type_map_path)
                if cfg.row_type_map_path else None)
    return pl.partition_by_row_type(data, code_map)


def cmd_train(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    partitions = _load_partitions(cfg)
    for i, row_type in enumerate(sorted(partitions)):
        seed = _row_type_seed(cfg.seed, i)
        try:
            model, pipe, history, rep, report = fit_row_type(
                partitions[row_type], row_type, cfg, seed
            )
        except (SchemaError, ShapeError, SplitError, AugmentationError) as exc:
            raise type(exc)(f"row type {row_type!r}: {exc}") from None
        tag = _safe_name(row_type)
        serialize.save_model(os.path.join(cfg.out_dir, f"model_{tag}.json"),
                             model, pipe)
        serialize.atomic_write_text(
            os.path.join(cfg.out_dir, f"metrics_{tag}.json"), rep.to_json())
        serialize.atomic_write_text(
            os.path.join(cfg.out_dir, f"loss_history_{tag}.csv"), _loss_csv(history))
        serialize.atomic_write_text(
            os.path.join(cfg.out_dir, f"preprocess_{tag}.json"),
            json.dumps(report.to_dict(), indent=2))
        print(f"[{row_type}] test accuracy {rep.accuracy:.4f}, "
              f"val accuracy {rep.extra['val_accuracy']:.4f}")
    return 0


def cmd_gridsearch(cfg: RunConfig) -> int:
    if cfg.grid is None:
        raise SchemaError("config has no [grid] section")
    os.makedirs(cfg.out_dir, exist_ok=True)
    partitions = _load_partitions(cfg)
    width = max(cfg.grid.n_qubits_choices)
    for i, row_type in enumerate(sorted(partitions)):
        seed = _row_type_seed(cfg.seed, i)
        try:
            pipe, _, train_ds, _, _ = _preprocess_row_type(
                partitions[row_type], row_type, cfg, seed, width=width,
                requested=width,
            )
            if train_ds.X.shape[1] < width:
                raise ShapeError(
                    f"only {train_ds.X.shape[1]} components available for a "
                    f"{width}-qubit grid choice"
                )

            def augment(X, y, s, _names=pipe.class_names, _rt=row_type):
                ds = pl.RowTypeDataset(_rt, X, y, _names)
                out = pl.smote_oversample(ds, cfg.smote_k, s)
                return out.X, out.y

            best, leaderboard = hybrid.grid_search(
                cfg.grid, train_ds, cfg.cv_folds, seed, augment=augment,
                hidden=cfg.hidden, hidden_activation=cfg.hidden_activation,
                single_layer_head=cfg.single_layer_head,
                entangler_range=cfg.entangler_range,
            )
        except (SchemaError, ShapeError, SplitError, AugmentationError,
                ValueError) as exc:
            raise SchemaError(f"row type {row_type!r}: {exc}") from None
        tag = _safe_name(row_type)
        lines = ["rank,n_layers,n_qubits,learning_rate,batch_size,epochs,"
                 "mean_val_macro_f1,mean_val_accuracy"]
        for rank, res in enumerate(leaderboard, 1):
            p = res.params
            lines.append(f"{rank},{p['n_layers']},{p['n_qubits']},"
                         f"{p['learning_rate']!r},{p['batch_size']},{p['epochs']},"
                         f"{res.mean_val_macro_f1!r},{res.mean_val_accuracy!r}")
        serialize.atomic_write_text(
            os.path.join(cfg.out_dir, f"leaderboard_{tag}.csv"),
            "\n".join(lines) + "\n")
        winner = ("[model]\n"
                  f"n_qubits = {best['n_qubits']}\n"
                  f"n_layers = {best['n_layers']}\n\n"
                  "[train]\n"
                  f"epochs = {best['epochs']}\n"
                  f"learning_rate = {best['learning_rate']!r}\n"
                  f"batch_size = {best['batch_size']}\n")
        serialize.atomic_write_text(
            os.path.join(cfg.out_dir, f"winner_{tag}.cfg"), winner)
        print(f"[{row_type}] best: {best}")
    return 0


def cmd_evaluate(model_path: str, data_path: str, out_path: str = None) -> int:
    model, pipe = serialize.load_model(model_path)
    if pipe is None:
        raise SchemaError(f"{model_path}: model carries no preprocessing pipeline")
    data = pl.load_csv(data_path, pipe.label_column)
    if not data.rows:
        raise SchemaError(f"{data_path}: no data rows")
    ds = pipe.transform(data)
    _, acc, probs = hybrid.evaluate(model, ds.X, ds.y)
    preds = np.argmax(probs, axis=1)
    cm = metrics.confusion_matrix(ds.y, preds, len(pipe.class_names),
                                  pipe.class_names)
    rep = metrics.build_report(cm, probs, ds.y, extra={"test_accuracy": acc})
    text = rep.to_json()
    if out_path:
        serialize.atomic_write_text(out_path, text)
    print(text)
    return 0


def _load_models(model_path: str) -> dict:
    if os.path.isdir(model_path):
        paths = sorted(glob.glob(os.path.join(model_path, "model_*.json")))
        if not paths:
            raise SchemaError(f"no model_*.json files in {model_path!r}")
    else:
        paths = [model_path]
    models = {}
    for path in paths:
        model, pipe = serialize.load_model(path)
        if pipe is None:
            raise SchemaError(f"{path}: model carries no preprocessing pipeline")
        models[pipe.row_type] = (model, pipe)
    return models


def cmd_predict(model_path: str, input_path: str, out_path: str = None,
                row_type_map_path: str = None) -> int:
    models = _load_models(model_path)
    any_pipe = next(iter(models.values()))[1]
    rt_col = any_pipe.row_type_column
    with open(input_path, newline="") as fh:
        header = fh.readline()
    has_rt = rt_col is not None and rt_col in [c.strip() for c in header.split(",")]
    data = pl.load_csv(input_path, None, rt_col if has_rt else None)
    if not data.rows:
        raise SchemaError(f"{input_path}: no data rows")
    code_map = (pl.load_row_type_map(row_type_map_path)
                if row_type_map_path else None)

    if has_rt:
        idx = data.col_index(rt_col)
        row_types = []
        for row in data.rows:
            code = "" if pl._is_missing(row[idx]) else str(row[idx]).strip()
            if code_map is not None:
                row_types.append(code_map.get(code, code))
            else:
                row_types.append(code)
    elif len(models) == 1:
        row_types = [next(iter(models))] * len(data.rows)
    else:
        raise SchemaError(
            f"input has no {rt_col!r} column and multiple models are loaded"
        )

    results = [None] * len(data.rows)
    flagged = 0
    by_type = {}
    for i, rt in enumerate(row_types):
        by_type.setdefault(rt, []).append(i)
    for rt in sorted(by_type):
        idxs = by_type[rt]
        if rt not in models:
            for i in idxs:
                results[i] = (rt, "no_model", "", "")
            flagged += len(idxs)
            continue
        model, pipe = models[rt]
        sub = _subset(data, idxs)
        Z = pipe.transform_features(sub)
        for j, i in enumerate(idxs):
            cls, probs = hybrid.predict(model, Z[j])
            prob_text = ";".join(
                f"{name}={float(p)!r}" for name, p in zip(pipe.class_names, probs)
            )
            results[i] = (rt, "ok", pipe.class_names[cls], prob_text)

    lines = ["row,row_type,status,predicted_class,probabilities"]
    for i, (rt, status, cls, probs) in enumerate(results):
        lines.append(f"{i},{rt},{status},{cls},{probs}")
    text = "\n".join(lines) + "\n"
    if out_path:
        serialize.atomic_write_text(out_path, text)
    else:
        print(text, end="")
    return 2 if flagged else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyquc",
        description="Per-row-type hybrid quantum-classical tabular classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("train", "gridsearch"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("evaluate")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict")
    p.add_argument("--model", required=True,
                   help="model file or a directory of model_*.json files")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--row-type-map", default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("train", "gridsearch"):
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            if args.out is not None:
                cfg.out_dir = args.out
            return cmd_train(cfg) if args.command == "train" else cmd_gridsearch(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(args.model, args.data, args.out)
        return cmd_predict(args.model, args.input, args.out, args.row_type_map)
    except (SchemaError, ShapeError, SplitError, AugmentationError,
            ValueError, OSError) as exc:
        print(f"hyquc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
