"""Command-line interface.

Subcommands: train, pho, decompose, importance, experiment <name>. Settings
come from a flat INI-style config file (sections [data], [terms], [network],
[train], [pho], [experiment]; "key = value", comma-separated lists). Unknown
sections or keys are rejected. Exit codes: 0 success, 2 usage or config
error, 3 data or shape error, 4 numerical failure. All outputs are
deterministic: the same command on the same inputs writes byte-identical
files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import os
import sys

import numpy as np

from . import basis, experiments
from .errors import (
    DataError,
    DegenerateError,
    DimensionError,
    PreconditionError,
    SchemaError,
    SemistructError,
    SingularSystemError,
    SpecError,
)
from .network import MLPConfig, TrainConfig, init_ssn, train_ssn
from .pho import (
    decompose_out_of_sample,
    importance_report,
    pho_full,
    pho_minibatch,
    phogam_adjust,
)
from .serialize import (
    fmt_float,
    load_model,
    load_pho,
    read_csv_columns,
    save_model,
    save_pho,
    write_history_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

CONFIG_SCHEMA: dict[str, set[str]] = {
    "data": {"csv", "target", "unstructured"},
    "terms": {"intercept", "linear", "spline", "factor"},
    "network": {"hidden", "activation", "dropout", "bias", "activate_latent"},
    "train": {
        "mode",
        "batch_size",
        "max_epochs",
        "learning_rate",
        "validation_fraction",
        "patience",
        "seed",
    },
    "pho": {"method", "lambda", "minibatch_rows", "minibatch_size"},
    "experiment": {
        "seed",
        "replicates",
        "threads",
        "n",
        "p",
        "q",
        "overlap",
        "noise_sd",
        "num_basis",
        "lambda",
        "grid_points",
        "batch_sizes",
        "train_batch_size",
        "validation_fraction",
        "splits",
        "test_fraction",
        "methods",
        "hidden",
        "dropout",
        "batch_size",
        "max_epochs",
        "patience",
        "learning_rate",
    },
}

EXPERIMENT_NAMES = ("linear", "nonlinear", "error-rate", "convergence", "benchmark")


class Config:
    """Strictly validated view over the INI file."""

    def __init__(self, path: str | None):
        self.parser = configparser.ConfigParser(interpolation=None)
        if path is not None:
            if not os.path.exists(path):
                raise SpecError(f"config file not found: {path}")
            read = self.parser.read(path, encoding="utf-8")
            if not read:
                raise SpecError(f"could not read config file: {path}")
        for section in self.parser.sections():
            if section not in CONFIG_SCHEMA:
                raise SpecError(f"unknown config section [{section}]")
            for key in self.parser[section]:
                if key not in CONFIG_SCHEMA[section]:
                    raise SpecError(
                        f"unknown key {key!r} in config section [{section}]"
                    )

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, default: str | None = None) -> str:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if default is None:
            raise SpecError(f"missing key {key!r} in config section [{section}]")
        return default

    def get_int(self, section: str, key: str, default: int | None = None) -> int:
        raw = self.get(
            section, key, None if default is None else str(default)
        )
        try:
            return int(raw)
        except ValueError as exc:
            raise SpecError(
                f"key {key!r} in [{section}] must be an integer, got {raw!r}"
            ) from exc

    def get_float(
        self, section: str, key: str, default: float | None = None
    ) -> float:
        raw = self.get(
            section, key, None if default is None else repr(default)
        )
        try:
            return float(raw)
        except ValueError as exc:
            raise SpecError(
                f"key {key!r} in [{section}] must be a number, got {raw!r}"
            ) from exc

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        raw = self.get(section, key, "true" if default else "false").lower()
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise SpecError(
            f"key {key!r} in [{section}] must be a boolean, got {raw!r}"
        )

    def get_list(self, section: str, key: str, default: str = "") -> list[str]:
        raw = self.get(section, key, default)
        return [item.strip() for item in raw.split(",") if item.strip()]

    def get_int_list(
        self, section: str, key: str, default: str
    ) -> tuple[int, ...]:
        items = self.get_list(section, key, default)
        try:
            return tuple(int(x) for x in items)
        except ValueError as exc:
            raise SpecError(
                f"key {key!r} in [{section}] must be a comma list of integers"
            ) from exc


def _parse_terms(cfg: Config) -> list[basis.TermSpec]:
    terms: list[basis.TermSpec] = []
    if cfg.get_bool("terms", "intercept", True):
        terms.append(basis.intercept())
    for col in cfg.get_list("terms", "linear"):
        terms.append(basis.linear(col))
    for entry in cfg.get_list("terms", "spline"):
        parts = entry.split(":")
        col = parts[0]
        try:
            num_basis = int(parts[1]) if len(parts) > 1 else basis.DEFAULT_NUM_BASIS
            degree = int(parts[2]) if len(parts) > 2 else basis.DEFAULT_DEGREE
            order = int(parts[3]) if len(parts) > 3 else basis.DEFAULT_PENALTY_ORDER
        except ValueError as exc:
            raise SpecError(
                f"malformed spline entry {entry!r}; expected "
                "column[:num_basis[:degree[:penalty_order]]]"
            ) from exc
        if len(parts) > 4:
            raise SpecError(f"malformed spline entry {entry!r}")
        terms.append(
            basis.bspline(col, num_basis=num_basis, degree=degree, penalty_order=order)
        )
    for col in cfg.get_list("terms", "factor"):
        terms.append(basis.factor(col))
    if not terms:
        raise SpecError("config section [terms] declares no terms")
    return terms


def _z_columns(cfg: Config, terms: list[basis.TermSpec]) -> list[str]:
    explicit = cfg.get_list("data", "unstructured")
    if explicit:
        return explicit
    cols: list[str] = []
    for spec in terms:
        if spec.kind in ("linear", "bspline") and spec.column not in cols:
            cols.append(spec.column)
    if not cols:
        raise SpecError(
            "no unstructured columns: set 'unstructured' in [data] or "
            "declare numeric terms"
        )
    return cols


def _load_table(cfg: Config) -> dict:
    path = cfg.get("data", "csv")
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    return read_csv_columns(path)


def _numeric_matrix(data: dict, columns: list[str]) -> np.ndarray:
    cols = []
    for name in columns:
        if name not in data:
            raise SchemaError(f"column {name!r} not present in data")
        col = np.asarray(data[name], dtype=float)
        if not np.all(np.isfinite(col)):
            raise DataError(f"column {name!r} contains non-finite values")
        cols.append(col)
    return np.column_stack(cols)


def _target_vector(cfg: Config, data: dict) -> np.ndarray:
    target = cfg.get("data", "target")
    if target not in data:
        raise SchemaError(f"target column {target!r} not present in data")
    y = np.asarray(data[target], dtype=float)
    if not np.all(np.isfinite(y)):
        raise DataError(f"target column {target!r} contains non-finite values")
    return y


def _network_config(cfg: Config, input_dim: int) -> MLPConfig:
    hidden = cfg.get_int_list("network", "hidden", "100,50")
    if not hidden:
        raise SpecError("key 'hidden' in [network] must list at least one width")
    use_bias = (cfg.get_bool("network", "bias", True),) * len(hidden)
    return MLPConfig(
        layer_sizes=(input_dim, *hidden),
        activation=cfg.get("network", "activation", "relu"),
        dropout_rate=cfg.get_float("network", "dropout", 0.1),
        use_bias=use_bias,
        activate_latent=cfg.get_bool("network", "activate_latent", False),
    )


def _train_config(cfg: Config, seed_override: int | None) -> TrainConfig:
    seed = cfg.get_int("train", "seed", 0)
    if seed_override is not None:
        seed = seed_override
    return TrainConfig(
        batch_size=cfg.get_int("train", "batch_size", 32),
        max_epochs=cfg.get_int("train", "max_epochs", 500),
        learning_rate=cfg.get_float("train", "learning_rate", 1e-3),
        validation_fraction=cfg.get_float("train", "validation_fraction", 0.1),
        patience=cfg.get_int("train", "patience", 50),
        seed=seed,
    )


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


# ---- Commands ----


def cmd_train(args) -> int:
    cfg = Config(args.config)
    data = _load_table(cfg)
    terms = _parse_terms(cfg)
    design = basis.build_design(data, terms)
    y = _target_vector(cfg, data)
    z_cols = _z_columns(cfg, terms)
    Z = _numeric_matrix(data, z_cols)
    mlp_cfg = _network_config(cfg, Z.shape[1])
    train_cfg = _train_config(cfg, args.seed)
    mode = cfg.get("train", "mode", "unconstrained")
    model = init_ssn(
        design, mlp_cfg, mode=mode, seed=train_cfg.seed, z_columns=tuple(z_cols)
    )
    result = train_ssn(model, design.X, Z, y, train_cfg)
    model_path = _out_path(args.out, "model.txt")
    history_path = _out_path(args.out, "history.csv")
    save_model(model, model_path)
    write_history_csv(result.history, history_path)
    print(f"rows = {design.X.shape[0]}")
    print(f"design_columns = {design.X.shape[1]}")
    print(f"epochs_run = {result.epochs_run}")
    print(f"best_epoch = {result.best_epoch}")
    print(f"best_val_loss = {fmt_float(result.best_val_loss)}")
    print(f"wrote {model_path}")
    print(f"wrote {history_path}")
    return EXIT_OK


def _chunk_batches(X: np.ndarray, Z: np.ndarray, size: int):
    def source():
        for start in range(0, X.shape[0], size):
            sl = slice(start, start + size)
            yield X[sl], Z[sl]

    return source


def cmd_pho(args) -> int:
    cfg = Config(args.config)
    model = load_model(args.model)
    data = _load_table(cfg)
    X, clamped = model.design.transform(data)
    if not model.z_columns:
        raise SchemaError(
            "model file does not record unstructured columns; cannot "
            "evaluate new data"
        )
    Z = _numeric_matrix(data, list(model.z_columns))
    method = cfg.get("pho", "method", "pho")
    lam = args.lam if args.lam is not None else cfg.get("pho", "lambda", "auto")
    if method == "pho":
        threshold = cfg.get_int("pho", "minibatch_rows", 100000)
        if X.shape[0] > threshold:
            size = cfg.get_int("pho", "minibatch_size", 4096)
            result = pho_minibatch(model, _chunk_batches(X, Z, size))
        else:
            result = pho_full(model, X, Z)
    elif method == "phogam":
        design = dataclasses.replace(model.design, X=X)
        lam_arg = lam if lam == "auto" else _parse_lambda(lam)
        result = phogam_adjust(model, design, Z, lam=lam_arg)
    else:
        raise SpecError(
            f"key 'method' in [pho] must be 'pho' or 'phogam', got {method!r}"
        )
    pho_path = _out_path(args.out, "pho.txt")
    contrib_path = _out_path(args.out, "pho_contributions.csv")
    save_pho(result, pho_path, contrib_path)
    print(f"method = {result.method}")
    print(f"rows = {X.shape[0]}")
    for name, count in sorted(clamped.items()):
        print(f"clamped[{name}] = {count}")
    if result.lambda_used is not None:
        print(f"lambda_used = {fmt_float(result.lambda_used)}")
    print(f"ortho_residual = {fmt_float(result.ortho_residual)}")
    if result.has_intercept:
        from .pho import ev_structured

        print(f"ev_structured = {fmt_float(ev_structured(result))}")
    else:
        print("ev_structured = n/a (no intercept in design)")
    print(f"wrote {pho_path}")
    print(f"wrote {contrib_path}")
    return EXIT_OK


def _parse_lambda(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise SpecError(f"lambda must be a number or 'auto', got {raw!r}") from exc
    if value < 0:
        raise SpecError(f"lambda must be >= 0, got {value}")
    return value


def _pho_paths(pho_arg: str) -> tuple[str, str]:
    if pho_arg.endswith(".txt"):
        return pho_arg, pho_arg[: -len(".txt")] + "_contributions.csv"
    return pho_arg, pho_arg + "_contributions.csv"


def cmd_decompose(args) -> int:
    cfg = Config(args.config)
    model = load_model(args.model)
    pho_path, contrib_path = _pho_paths(args.pho)
    result = load_pho(pho_path, contrib_path)
    data = _load_table(cfg)
    X, clamped = model.design.transform(data)
    Z = _numeric_matrix(data, list(model.z_columns))
    eta_str, eta_unstr = decompose_out_of_sample(model, result, X, Z)
    out_csv = _out_path(args.out, "decomposition.csv")
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eta_str", "eta_unstr"])
        for s, u in zip(eta_str, eta_unstr):
            writer.writerow([fmt_float(s), fmt_float(u)])
    print(f"rows = {X.shape[0]}")
    for name, count in sorted(clamped.items()):
        print(f"clamped[{name}] = {count}")
    print(f"wrote {out_csv}")
    return EXIT_OK


def cmd_importance(args) -> int:
    cfg = Config(args.config)
    model = load_model(args.model)
    pho_path, contrib_path = _pho_paths(args.pho)
    result = load_pho(pho_path, contrib_path)
    data = _load_table(cfg)
    X, _ = model.design.transform(data)
    y = _target_vector(cfg, data)
    if result.eta_str.shape[0] != X.shape[0]:
        raise DataError(
            f"decomposition has {result.eta_str.shape[0]} rows, data has "
            f"{X.shape[0]}; importance needs the data the orthogonalization "
            "was computed on"
        )
    report = importance_report(model, result, X, y)
    out_csv = _out_path(args.out, "importance.csv")
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["measure", "term", "value"])
        writer.writerow(["ev_structured", "", fmt_float(report.ev_structured)])
        writer.writerow(
            ["ev_unstructured", "", fmt_float(report.ev_unstructured)]
        )
        for spec in model.design.terms:
            writer.writerow(
                ["mcfadden_r2", spec.name, fmt_float(report.r2[spec.name])]
            )
    print(f"ev_structured = {fmt_float(report.ev_structured)}")
    print(f"ev_unstructured = {fmt_float(report.ev_unstructured)}")
    for spec in model.design.terms:
        print(f"r2[{spec.name}] = {fmt_float(report.r2[spec.name])}")
    print(f"wrote {out_csv}")
    return EXIT_OK


def _experiment_linear(cfg: Config, seed: int, threads: int):
    driver_cfg = experiments.LinearRecoveryConfig(
        n_values=cfg.get_int_list("experiment", "n", "100,1000"),
        p_values=cfg.get_int_list("experiment", "p", "1,3,10"),
        q=cfg.get_int("experiment", "q", 20),
        overlap=cfg.get_bool("experiment", "overlap", True),
        noise_sd=cfg.get_float("experiment", "noise_sd", 1.0),
        replicates=cfg.get_int("experiment", "replicates", 5),
        seed=seed,
        hidden=cfg.get_int_list("experiment", "hidden", "100,50"),
        dropout=cfg.get_float("experiment", "dropout", 0.2),
        batch_size=cfg.get_int("experiment", "batch_size", 32),
        max_epochs=cfg.get_int("experiment", "max_epochs", 1000),
        patience=cfg.get_int("experiment", "patience", 50),
        learning_rate=cfg.get_float("experiment", "learning_rate", 1e-3),
        threads=threads,
    )
    return experiments.run_linear_recovery(driver_cfg)


def _experiment_nonlinear(cfg: Config, seed: int, threads: int, lam_override):
    lam = lam_override if lam_override is not None else cfg.get(
        "experiment", "lambda", "auto"
    )
    lam_arg = lam if lam == "auto" else _parse_lambda(lam)
    driver_cfg = experiments.NonlinearRecoveryConfig(
        n=cfg.get_int("experiment", "n", 1000),
        p=cfg.get_int("experiment", "p", 10),
        noise_sd=cfg.get_float("experiment", "noise_sd", 1.0),
        replicates=cfg.get_int("experiment", "replicates", 1),
        seed=seed,
        num_basis=cfg.get_int("experiment", "num_basis", basis.DEFAULT_NUM_BASIS),
        lam=lam_arg,
        grid_points=cfg.get_int("experiment", "grid_points", 200),
        hidden=cfg.get_int_list("experiment", "hidden", "100,50"),
        dropout=cfg.get_float("experiment", "dropout", 0.2),
        batch_size=cfg.get_int("experiment", "batch_size", 32),
        max_epochs=cfg.get_int("experiment", "max_epochs", 1000),
        patience=cfg.get_int("experiment", "patience", 50),
        learning_rate=cfg.get_float("experiment", "learning_rate", 1e-3),
        threads=threads,
    )
    return experiments.run_nonlinear_recovery(driver_cfg)


def _experiment_error_rate(cfg: Config, seed: int, threads: int):
    driver_cfg = experiments.PredictionErrorConfig(
        n=cfg.get_int("experiment", "n", 100000),
        batch_sizes=cfg.get_int_list(
            "experiment", "batch_sizes", "1,10,100,1000,10000"
        ),
        noise_sd=cfg.get_float("experiment", "noise_sd", 1.0),
        replicates=cfg.get_int("experiment", "replicates", 1),
        seed=seed,
        train_batch_size=cfg.get_int("experiment", "train_batch_size", 512),
        max_epochs=cfg.get_int("experiment", "max_epochs", 500),
        patience=cfg.get_int("experiment", "patience", 50),
        learning_rate=cfg.get_float("experiment", "learning_rate", 1e-3),
        validation_fraction=cfg.get_float(
            "experiment", "validation_fraction", 0.2
        ),
        threads=threads,
    )
    return experiments.run_prediction_error(driver_cfg)


def _experiment_convergence(cfg: Config, seed: int, threads: int):
    driver_cfg = experiments.ConvergenceConfig(
        n=cfg.get_int("experiment", "n", 1000),
        p=cfg.get_int("experiment", "p", 1),
        q=cfg.get_int("experiment", "q", 20),
        overlap=cfg.get_bool("experiment", "overlap", False),
        noise_sd=cfg.get_float("experiment", "noise_sd", 1.0),
        replicates=cfg.get_int("experiment", "replicates", 5),
        seed=seed,
        hidden=cfg.get_int_list("experiment", "hidden", "100,50"),
        dropout=cfg.get_float("experiment", "dropout", 0.2),
        batch_size=cfg.get_int("experiment", "batch_size", 32),
        max_epochs=cfg.get_int("experiment", "max_epochs", 1000),
        patience=cfg.get_int("experiment", "patience", 50),
        learning_rate=cfg.get_float("experiment", "learning_rate", 1e-3),
        threads=threads,
    )
    return experiments.run_convergence(driver_cfg)


def _experiment_benchmark(cfg: Config, seed: int, threads: int, lam_override):
    data = _load_table(cfg)
    target = cfg.get("data", "target")
    terms = _parse_terms(cfg)
    z_cols = _z_columns(cfg, terms)
    lam = lam_override if lam_override is not None else cfg.get(
        "experiment", "lambda", "auto"
    )
    lam_arg = lam if lam == "auto" else _parse_lambda(lam)
    methods_raw = cfg.get_list(
        "experiment", "methods", "GAM,DNNOnly,Unconstrained,ONO,PHO,PHOGAM"
    )
    driver_cfg = experiments.BenchmarkConfig(
        splits=cfg.get_int("experiment", "splits", 10),
        test_fraction=cfg.get_float("experiment", "test_fraction", 0.1),
        seed=seed,
        methods=tuple(methods_raw),
        lam=lam_arg,
        hidden=cfg.get_int_list("experiment", "hidden", "100,50"),
        dropout=cfg.get_float("experiment", "dropout", 0.1),
        batch_size=cfg.get_int("experiment", "batch_size", 32),
        max_epochs=cfg.get_int("experiment", "max_epochs", 500),
        patience=cfg.get_int("experiment", "patience", 50),
        learning_rate=cfg.get_float("experiment", "learning_rate", 1e-3),
        threads=threads,
    )
    return experiments.run_benchmark(data, target, terms, z_cols, driver_cfg)


def cmd_experiment(args) -> int:
    cfg = Config(args.config)
    seed = args.seed if args.seed is not None else cfg.get_int(
        "experiment", "seed", 0
    )
    threads = args.threads if args.threads is not None else cfg.get_int(
        "experiment", "threads", 1
    )
    name = args.name
    if name == "linear":
        reports = _experiment_linear(cfg, seed, threads)
    elif name == "nonlinear":
        reports = _experiment_nonlinear(cfg, seed, threads, args.lam)
    elif name == "error-rate":
        reports = _experiment_error_rate(cfg, seed, threads)
    elif name == "convergence":
        reports = _experiment_convergence(cfg, seed, threads)
    else:
        reports = _experiment_benchmark(cfg, seed, threads, args.lam)
    out_csv = _out_path(args.out, f"{name.replace('-', '_')}_report.csv")
    experiments.write_reports_csv(reports, out_csv)
    print(f"reports = {len(reports)}")
    print(f"wrote {out_csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semistruct",
        description=(
            "Semi-structured regression networks with post-hoc "
            "orthogonalization"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, model: bool = False, pho: bool = False):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument(
            "--lambda",
            dest="lam",
            default=None,
            help="penalty weight or 'auto'",
        )
        p.add_argument(
            "--threads", type=int, default=None, help="worker threads"
        )
        if model:
            p.add_argument("--model", required=True, help="model file")
        if pho:
            p.add_argument(
                "--pho", required=True, help="orthogonalization result file"
            )

    p_train = sub.add_parser("train", help="fit a model on CSV data")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_pho = sub.add_parser("pho", help="orthogonalize a trained model")
    common(p_pho, model=True)
    p_pho.set_defaults(func=cmd_pho)

    p_dec = sub.add_parser("decompose", help="split predictions on new data")
    common(p_dec, model=True, pho=True)
    p_dec.set_defaults(func=cmd_decompose)

    p_imp = sub.add_parser("importance", help="term importance measures")
    common(p_imp, model=True, pho=True)
    p_imp.set_defaults(func=cmd_importance)

    p_exp = sub.add_parser("experiment", help="run a simulation study")
    p_exp.add_argument("name", choices=EXPERIMENT_NAMES)
    common(p_exp)
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SchemaError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularSystemError, DegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SemistructError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
