"""Text formats for models and orthogonalization results.

Both formats are versioned flat key-value files, one "key = value" pair per
line. Numeric values are written with 17 significant digits, which decodes
back to the identical float64 bit pattern, so save/load round-trips are
value-exact. Arrays are comma-joined in row-major order; their shapes are
implied by the stored term specs and layer sizes.

An orthogonalization result is stored as the key-value file plus a
two-column CSV of the per-observation (eta_str, eta_unstr) decomposition.
"""

from __future__ import annotations

import csv
from typing import Iterable

import numpy as np

from .basis import (
    StructuredDesign,
    TermSpec,
    difference_penalty,
)
from .errors import DataError, SchemaError
from .network import MLPConfig, MLPParams, SSNModel
from .pho import PHOResult

MODEL_FORMAT_VERSION = 1
PHO_FORMAT_VERSION = 1


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def fmt_array(a: np.ndarray) -> str:
    return ",".join(fmt_float(x) for x in np.asarray(a, dtype=float).ravel())


def parse_array(s: str) -> np.ndarray:
    s = s.strip()
    if not s:
        return np.zeros(0)
    return np.array([float(x) for x in s.split(",")])


def _check_name(value: str, what: str) -> str:
    if any(c in value for c in (",", "\n", "=")):
        raise SchemaError(
            f"{what} {value!r} contains a character reserved by the file "
            "format (comma, newline, or equals sign)"
        )
    return value


def _write_kv(lines: list[str], key: str, value: str) -> None:
    lines.append(f"{key} = {value}")


def _parse_kv_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in out:
                raise SchemaError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


class _KV:
    """Strict reader over a parsed key-value mapping."""

    def __init__(self, data: dict[str, str], path: str):
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def get(self, key: str) -> str:
        if key not in self.data:
            raise SchemaError(f"{self.path}: missing key {key!r}")
        self.seen.add(key)
        return self.data[key]

    def get_optional(self, key: str, default: str) -> str:
        if key not in self.data:
            return default
        self.seen.add(key)
        return self.data[key]

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise SchemaError(f"{self.path}: unknown key(s) {unknown}")


# ---- Model format ----


def _term_lines(lines: list[str], i: int, spec: TermSpec) -> None:
    prefix = f"term_{i}"
    _write_kv(lines, f"{prefix}_kind", spec.kind)
    if spec.column is not None:
        _write_kv(lines, f"{prefix}_column", _check_name(spec.column, "column"))
    if spec.kind == "bspline":
        _write_kv(lines, f"{prefix}_num_basis", str(spec.num_basis))
        _write_kv(lines, f"{prefix}_degree", str(spec.degree))
        _write_kv(lines, f"{prefix}_penalty_order", str(spec.penalty_order))
    if spec.kind == "factor":
        levels = spec.levels or ()
        _write_kv(
            lines,
            f"{prefix}_levels",
            ",".join(_check_name(lv, "factor level") for lv in levels),
        )


def save_model(model: SSNModel, path: str) -> None:
    """Write the model (design metadata plus all parameters) to path."""
    lines: list[str] = []
    _write_kv(lines, "model_format_version", str(MODEL_FORMAT_VERSION))
    _write_kv(lines, "mode", model.mode)
    _write_kv(lines, "rng_seed", str(model.rng_seed))
    _write_kv(
        lines,
        "z_columns",
        ",".join(_check_name(c, "column") for c in model.z_columns),
    )
    design = model.design
    _write_kv(lines, "term_count", str(len(design.terms)))
    for i, spec in enumerate(design.terms):
        # Persist observed factor levels so transform() reproduces training
        # encoding even when the spec left levels implicit.
        if spec.kind == "factor" and spec.levels is None:
            spec = TermSpec(
                kind="factor",
                column=spec.column,
                levels=design.factor_levels[spec.name],
            )
        _term_lines(lines, i, spec)
        if spec.kind == "bspline":
            _write_kv(lines, f"term_{i}_knots", fmt_array(design.knots[spec.name]))
    cfg = model.mlp_config
    _write_kv(lines, "mlp_layer_sizes", ",".join(str(s) for s in cfg.layer_sizes))
    _write_kv(lines, "mlp_activation", cfg.activation)
    _write_kv(lines, "mlp_dropout_rate", fmt_float(cfg.dropout_rate))
    _write_kv(
        lines,
        "mlp_use_bias",
        ",".join("1" if b else "0" for b in cfg.bias_flags()),
    )
    _write_kv(lines, "mlp_activate_latent", "1" if cfg.activate_latent else "0")
    _write_kv(lines, "beta", fmt_array(model.beta))
    _write_kv(lines, "gamma", fmt_array(model.gamma))
    for i, w in enumerate(model.mlp.weights):
        _write_kv(lines, f"weight_{i}", fmt_array(w))
    for i, (flag, b) in enumerate(zip(cfg.bias_flags(), model.mlp.biases)):
        if flag:
            _write_kv(lines, f"bias_{i}", fmt_array(b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _term_from_kv(kv: _KV, i: int) -> tuple[TermSpec, np.ndarray | None]:
    prefix = f"term_{i}"
    kind = kv.get(f"{prefix}_kind")
    knots = None
    if kind == "intercept":
        spec = TermSpec(kind="intercept")
    elif kind == "linear":
        spec = TermSpec(kind="linear", column=kv.get(f"{prefix}_column"))
    elif kind == "bspline":
        spec = TermSpec(
            kind="bspline",
            column=kv.get(f"{prefix}_column"),
            num_basis=int(kv.get(f"{prefix}_num_basis")),
            degree=int(kv.get(f"{prefix}_degree")),
            penalty_order=int(kv.get(f"{prefix}_penalty_order")),
        )
        knots = parse_array(kv.get(f"{prefix}_knots"))
        if knots.shape[0] != spec.num_basis + spec.degree + 1:
            raise SchemaError(
                f"term {spec.name}: knot vector has {knots.shape[0]} entries, "
                f"expected {spec.num_basis + spec.degree + 1}"
            )
    elif kind == "factor":
        levels = tuple(
            lv for lv in kv.get(f"{prefix}_levels").split(",") if lv
        )
        spec = TermSpec(
            kind="factor", column=kv.get(f"{prefix}_column"), levels=levels
        )
    else:
        raise SchemaError(f"unknown term kind {kind!r}")
    return spec, knots


def _rebuild_design(
    terms: list[TermSpec], knot_vectors: dict[str, np.ndarray]
) -> StructuredDesign:
    has_intercept = any(t.kind == "intercept" for t in terms)
    column_map: dict[str, slice] = {}
    start = 0
    blocks: list[tuple[TermSpec, int]] = []
    for spec in terms:
        if spec.kind in ("intercept", "linear"):
            width = 1
        elif spec.kind == "bspline":
            width = spec.num_basis
        else:
            width = len(spec.levels) - (1 if has_intercept else 0)
        column_map[spec.name] = slice(start, start + width)
        blocks.append((spec, width))
        start += width
    p = start
    K = np.zeros((p, p))
    for spec, width in blocks:
        if spec.kind == "bspline":
            sl = column_map[spec.name]
            K[sl, sl] = difference_penalty(spec.num_basis, spec.penalty_order)
    return StructuredDesign(
        X=np.zeros((0, p)),
        K=K,
        terms=tuple(terms),
        column_map=column_map,
        has_intercept=has_intercept,
        knots=dict(knot_vectors),
        factor_levels={
            t.name: t.levels for t in terms if t.kind == "factor"
        },
    )


def load_model(path: str) -> SSNModel:
    """Read a model file back; inverse of save_model up to design.X.

    The returned design carries an empty (0, p) matrix: the file stores
    what is needed to evaluate new data (term specs, knots, levels), not
    the training matrix.
    """
    kv = _KV(_parse_kv_file(path), path)
    version = int(kv.get("model_format_version"))
    if version != MODEL_FORMAT_VERSION:
        raise SchemaError(
            f"{path}: unsupported model format version {version}"
        )
    mode = kv.get("mode")
    rng_seed = int(kv.get("rng_seed"))
    z_raw = kv.get("z_columns")
    z_columns = tuple(c for c in z_raw.split(",") if c)
    term_count = int(kv.get("term_count"))
    terms: list[TermSpec] = []
    knot_vectors: dict[str, np.ndarray] = {}
    for i in range(term_count):
        spec, knots = _term_from_kv(kv, i)
        terms.append(spec)
        if knots is not None:
            knot_vectors[spec.name] = knots
    design = _rebuild_design(terms, knot_vectors)
    layer_sizes = tuple(int(s) for s in kv.get("mlp_layer_sizes").split(","))
    use_bias = tuple(s == "1" for s in kv.get("mlp_use_bias").split(","))
    cfg = MLPConfig(
        layer_sizes=layer_sizes,
        activation=kv.get("mlp_activation"),
        dropout_rate=float(kv.get("mlp_dropout_rate")),
        use_bias=use_bias,
        activate_latent=kv.get("mlp_activate_latent") == "1",
    )
    beta = parse_array(kv.get("beta"))
    if beta.shape[0] != design.n_columns:
        raise SchemaError(
            f"{path}: beta has {beta.shape[0]} entries, design implies "
            f"{design.n_columns}"
        )
    gamma = parse_array(kv.get("gamma"))
    if gamma.shape[0] != cfg.latent_dim:
        raise SchemaError(
            f"{path}: gamma has {gamma.shape[0]} entries, network implies "
            f"{cfg.latent_dim}"
        )
    weights, biases = [], []
    for i, (d_in, d_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        flat = parse_array(kv.get(f"weight_{i}"))
        if flat.shape[0] != d_in * d_out:
            raise SchemaError(
                f"{path}: weight_{i} has {flat.shape[0]} entries, expected "
                f"{d_in * d_out}"
            )
        weights.append(flat.reshape(d_in, d_out))
        if cfg.bias_flags()[i]:
            b = parse_array(kv.get(f"bias_{i}"))
            if b.shape[0] != d_out:
                raise SchemaError(
                    f"{path}: bias_{i} has {b.shape[0]} entries, expected "
                    f"{d_out}"
                )
        else:
            b = np.zeros(d_out)
        biases.append(b)
    kv.finish()
    return SSNModel(
        design=design,
        beta=beta,
        mlp=MLPParams(weights=weights, biases=biases),
        mlp_config=cfg,
        gamma=gamma,
        mode=mode,
        rng_seed=rng_seed,
        z_columns=z_columns,
    )


# ---- Orthogonalization-result format ----


def save_pho(result: PHOResult, path: str, contributions_path: str) -> None:
    """Write the result: key-value file plus per-observation CSV."""
    lines: list[str] = []
    _write_kv(lines, "pho_format_version", str(PHO_FORMAT_VERSION))
    _write_kv(lines, "method", result.method)
    _write_kv(
        lines,
        "lambda_used",
        "none" if result.lambda_used is None else fmt_float(result.lambda_used),
    )
    _write_kv(lines, "ortho_residual", fmt_float(result.ortho_residual))
    _write_kv(lines, "has_intercept", "1" if result.has_intercept else "0")
    _write_kv(lines, "beta_tilde", fmt_array(result.beta_tilde))
    _write_kv(lines, "alpha", fmt_array(result.alpha))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(contributions_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eta_str", "eta_unstr"])
        for s, u in zip(result.eta_str, result.eta_unstr):
            writer.writerow([fmt_float(s), fmt_float(u)])


def load_pho(path: str, contributions_path: str) -> PHOResult:
    """Inverse of save_pho."""
    kv = _KV(_parse_kv_file(path), path)
    version = int(kv.get("pho_format_version"))
    if version != PHO_FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format version {version}")
    method = kv.get("method")
    lam_raw = kv.get("lambda_used")
    lam = None if lam_raw == "none" else float(lam_raw)
    resid = float(kv.get("ortho_residual"))
    has_intercept = kv.get("has_intercept") == "1"
    beta_tilde = parse_array(kv.get("beta_tilde"))
    alpha = parse_array(kv.get("alpha"))
    kv.finish()
    if beta_tilde.shape != alpha.shape:
        raise SchemaError(f"{path}: beta_tilde and alpha lengths differ")
    eta_str_vals: list[float] = []
    eta_unstr_vals: list[float] = []
    with open(contributions_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["eta_str", "eta_unstr"]:
            raise SchemaError(
                f"{contributions_path}: expected header eta_str,eta_unstr"
            )
        for row in reader:
            if len(row) != 2:
                raise SchemaError(
                    f"{contributions_path}: malformed row {row!r}"
                )
            eta_str_vals.append(float(row[0]))
            eta_unstr_vals.append(float(row[1]))
    return PHOResult(
        beta_tilde=beta_tilde,
        alpha=alpha,
        eta_str=np.array(eta_str_vals),
        eta_unstr=np.array(eta_unstr_vals),
        ortho_residual=resid,
        lambda_used=lam,
        has_intercept=has_intercept,
        method=method,
    )


def write_history_csv(
    history: Iterable[tuple[int, float, float]], path: str
) -> None:
    """Per-epoch (train, validation) loss curve as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in history:
            writer.writerow([epoch, fmt_float(tr), fmt_float(va)])


def read_csv_columns(path: str) -> dict[str, object]:
    """Read a CSV file into named columns.

    Columns where every entry parses as a number become float arrays;
    anything else stays a list of strings (e.g. factor levels). The header
    row is required and names must be unique and non-empty.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]
        if any(not name for name in header):
            raise SchemaError(f"{path}: header has an empty column name")
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        raw: list[list[str]] = [[] for _ in header]
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {i + 2} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            for col, value in zip(raw, row):
                col.append(value.strip())
    if raw and not raw[0]:
        raise DataError(f"{path}: no data rows")
    table: dict[str, object] = {}
    for name, values in zip(header, raw):
        try:
            table[name] = np.array([float(v) for v in values])
        except ValueError:
            table[name] = list(values)
    return table
