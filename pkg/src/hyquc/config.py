"""Run configuration: an INI-style file with one section per concern and one
``[row_type:NAME]`` section per row type for exclusions and class merges."""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import SchemaError
from .hybrid import HyperGrid


@dataclass
class RowTypeOptions:
    exclude_columns: list = field(default_factory=list)
    merges: list = field(default_factory=list)  # [(from_class, into_class), ...]


@dataclass
class RunConfig:
    csv_path: str
    label_column: str = "IRAC"
    row_type_column: str = None
    row_type_map_path: str = None
    missing_threshold: float = 0.70
    date_format: str = None
    split_fractions: tuple = (0.70, 0.15, 0.15)
    n_qubits: int = 5
    n_layers: int = 2
    embedding_axis: str = "Y"
    entangler_range: int = 1
    pca_components: int = 5
    hidden: tuple = (8, 8)
    hidden_activation: str = "sigmoid"
    single_layer_head: bool = False
    epochs: int = 50
    learning_rate: float = 0.01
    batch_size: int = 16
    seed: int = 0
    smote_k: int = 5
    grid: HyperGrid = None
    cv_folds: int = 3
    out_dir: str = "hyquc-out"
    row_types: dict = field(default_factory=dict)  # name -> RowTypeOptions

    def options_for(self, row_type: str) -> RowTypeOptions:
        return self.row_types.get(row_type, RowTypeOptions())


def _split_list(raw: str) -> list:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _parse_merges(raw: str) -> list:
    merges = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        if "->" not in part:
            raise SchemaError(f"merge {part!r} must look like FROM->INTO")
        src, dst = (s.strip() for s in part.split("->", 1))
        merges.append((src, dst))
    return merges


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SchemaError(f"cannot read config file {path!r}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(base, p)

    if "data" not in parser or "csv" not in parser["data"]:
        raise SchemaError("config needs [data] csv = <path>")
    data = parser["data"]
    cfg = RunConfig(csv_path=resolve(data.get("csv")))
    cfg.label_column = data.get("label_column", cfg.label_column)
    cfg.row_type_column = data.get("row_type_column", None)
    cfg.row_type_map_path = resolve(data.get("row_type_map", None))
    cfg.missing_threshold = data.getfloat("missing_threshold", cfg.missing_threshold)
    cfg.date_format = data.get("date_format", None) or None

    if "split" in parser:
        split = parser["split"]
        cfg.split_fractions = (split.getfloat("train", 0.70),
                               split.getfloat("val", 0.15),
                               split.getfloat("test", 0.15))

    if "model" in parser:
        model = parser["model"]
        cfg.n_qubits = model.getint("n_qubits", cfg.n_qubits)
        cfg.n_layers = model.getint("n_layers", cfg.n_layers)
        cfg.embedding_axis = model.get("embedding_axis", cfg.embedding_axis)
        cfg.entangler_range = model.getint("entangler_range", cfg.entangler_range)
        cfg.pca_components = model.getint("pca_components", cfg.pca_components)
        if model.get("hidden", None) is not None:
            cfg.hidden = tuple(int(v) for v in _split_list(model.get("hidden")))
        cfg.hidden_activation = model.get("hidden_activation", cfg.hidden_activation)
        cfg.single_layer_head = model.getboolean("single_layer_head",
                                                 cfg.single_layer_head)

    if "train" in parser:
        train = parser["train"]
        cfg.epochs = train.getint("epochs", cfg.epochs)
        cfg.learning_rate = train.getfloat("learning_rate", cfg.learning_rate)
        cfg.batch_size = train.getint("batch_size", cfg.batch_size)
        cfg.seed = train.getint("seed", cfg.seed)
        cfg.smote_k = train.getint("smote_k", cfg.smote_k)

    if "grid" in parser:
        grid = parser["grid"]
        cfg.grid = HyperGrid(
            tuple(int(v) for v in _split_list(grid.get("n_layers", "1"))),
            tuple(int(v) for v in _split_list(grid.get("n_qubits", "2"))),
            tuple(float(v) for v in _split_list(grid.get("learning_rates", "0.01"))),
            tuple(int(v) for v in _split_list(grid.get("batch_sizes", "16"))),
            tuple(int(v) for v in _split_list(grid.get("epochs", "50"))),
        )
        cfg.cv_folds = grid.getint("folds", cfg.cv_folds)

    if "output" in parser:
        cfg.out_dir = resolve(parser["output"].get("dir", cfg.out_dir))

    for section in parser.sections():
        if not section.startswith("row_type:"):
            continue
        name = section.split(":", 1)[1].strip()
        opts = RowTypeOptions()
        opts.exclude_columns = _split_list(parser[section].get("exclude_columns", ""))
        opts.merges = _parse_merges(parser[section].get("merge_classes", ""))
        cfg.row_types[name] = opts

    return cfg
