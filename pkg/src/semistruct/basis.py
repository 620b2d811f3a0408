"""Structured design construction: linear terms, B-splines, factors.

A design is declared as an ordered list of term specifications and built
against a column table (mapping of column name to values). Spline terms use
equidistant knots over the observed range with degree-fold boundary
repetition; the knot vectors are stored so new data is evaluated against the
training basis (points outside the range are clamped and counted).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DimensionError, SchemaError, SpecError

DEFAULT_NUM_BASIS = 9
DEFAULT_DEGREE = 3
DEFAULT_PENALTY_ORDER = 2


@dataclass(frozen=True)
class TermSpec:
    """Specification of one structured model term.

    kind is one of "intercept", "linear", "bspline", "factor". Non-intercept
    terms name the source column. Spline sizes follow the module defaults
    (9 basis functions, cubic, second-order difference penalty) unless
    overridden. Factor levels may be pinned explicitly; otherwise they are
    the sorted unique values observed when the design is built.
    """

    kind: str
    column: str | None = None
    num_basis: int = DEFAULT_NUM_BASIS
    degree: int = DEFAULT_DEGREE
    penalty_order: int = DEFAULT_PENALTY_ORDER
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("intercept", "linear", "bspline", "factor"):
            raise SpecError(f"unknown term kind {self.kind!r}")
        if self.kind == "intercept":
            if self.column is not None:
                raise SpecError("intercept term takes no column")
        elif self.column is None:
            raise SpecError(f"{self.kind} term requires a column name")
        if self.kind == "bspline":
            if self.degree < 0:
                raise SpecError(f"degree must be >= 0, got {self.degree}")
            if self.num_basis < self.degree + 1:
                raise SpecError(
                    f"num_basis must be >= degree + 1, got "
                    f"{self.num_basis} < {self.degree + 1}"
                )
            if not 1 <= self.penalty_order < self.num_basis:
                raise SpecError(
                    f"penalty_order must be in [1, num_basis), got "
                    f"{self.penalty_order}"
                )
        if self.kind == "factor" and self.levels is not None:
            if len(self.levels) < 2:
                raise SpecError("factor terms need at least 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise SpecError("factor levels must be distinct")

    @property
    def name(self) -> str:
        if self.kind == "intercept":
            return "intercept"
        if self.kind == "bspline":
            return f"s({self.column})"
        return str(self.column)


def intercept() -> TermSpec:
    return TermSpec(kind="intercept")


def linear(column: str) -> TermSpec:
    return TermSpec(kind="linear", column=column)


def bspline(
    column: str,
    num_basis: int = DEFAULT_NUM_BASIS,
    degree: int = DEFAULT_DEGREE,
    penalty_order: int = DEFAULT_PENALTY_ORDER,
) -> TermSpec:
    return TermSpec(
        kind="bspline",
        column=column,
        num_basis=num_basis,
        degree=degree,
        penalty_order=penalty_order,
    )


def factor(column: str, levels: Sequence[str] | None = None) -> TermSpec:
    lv = tuple(str(x) for x in levels) if levels is not None else None
    return TermSpec(kind="factor", column=column, levels=lv)


# ---- B-spline evaluation ----


def bspline_knots(
    knot_range: tuple[float, float], num_basis: int, degree: int
) -> np.ndarray:
    """Clamped equidistant knot vector of length num_basis + degree + 1.

    The boundary knots are repeated degree-fold beyond the endpoints included
    by the equidistant interior grid.
    """
    lo, hi = float(knot_range[0]), float(knot_range[1])
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise DataError("knot range must be finite")
    if not lo < hi:
        raise DataError(f"knot range must satisfy lo < hi, got ({lo}, {hi})")
    if num_basis < degree + 1:
        raise SpecError(
            f"num_basis must be >= degree + 1, got {num_basis} < {degree + 1}"
        )
    interior = np.linspace(lo, hi, num_basis - degree + 1)
    return np.concatenate([np.full(degree, lo), interior, np.full(degree, hi)])


def _eval_bspline(x: np.ndarray, t: np.ndarray, num_basis: int, degree: int):
    """Evaluate all basis functions at clamped x given a knot vector t.

    Returns (B, n_clamped): B is (len(x), num_basis), rows sum to 1.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = t[0], t[-1]
    clamped = int(np.sum((x < lo) | (x > hi)))
    x = np.clip(x, lo, hi)
    n = x.shape[0]
    # Knot span index for every observation: the unique j with
    # t[j] <= x < t[j+1], sending x == hi into the last non-empty span.
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, degree, num_basis - 1)
    # Triangular recurrence over the degree+1 active functions per row.
    vals = np.zeros((n, degree + 1))
    vals[:, 0] = 1.0
    left = np.zeros((n, degree + 1))
    right = np.zeros((n, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    B = np.zeros((n, num_basis))
    cols = span[:, None] - degree + np.arange(degree + 1)[None, :]
    np.put_along_axis(B, cols, vals, axis=1)
    return B, clamped


def bspline_basis(
    x: np.ndarray,
    num_basis: int = DEFAULT_NUM_BASIS,
    degree: int = DEFAULT_DEGREE,
    knot_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """B-spline basis matrix (len(x), num_basis) over equidistant knots.

    knot_range defaults to the observed (min, max) of x. Evaluation clamps
    x into the knot range, so every row sums to exactly 1 up to roundoff.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"x must be 1-D, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise DataError("x contains non-finite values")
    if knot_range is None:
        if x.size == 0:
            raise DataError("cannot infer knot range from empty x")
        knot_range = (float(x.min()), float(x.max()))
    t = bspline_knots(knot_range, num_basis, degree)
    B, _ = _eval_bspline(x, t, num_basis, degree)
    return B


def bspline_basis_from_knots(
    x: np.ndarray, knots: np.ndarray, num_basis: int, degree: int
) -> np.ndarray:
    """Basis matrix over a stored knot vector (clamping silently)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(knots, dtype=float)
    if t.shape[0] != num_basis + degree + 1:
        raise DimensionError(
            f"knot vector has {t.shape[0]} entries, expected "
            f"{num_basis + degree + 1}"
        )
    B, _ = _eval_bspline(x, t, num_basis, degree)
    return B


def difference_penalty(num_basis: int, order: int) -> np.ndarray:
    """Penalty matrix K = D^T D for order-th differences of coefficients.

    K is (num_basis, num_basis), symmetric positive semidefinite with rank
    num_basis - order.
    """
    if num_basis < 1:
        raise SpecError(f"num_basis must be >= 1, got {num_basis}")
    if not 1 <= order < num_basis:
        raise SpecError(
            f"order must be in [1, num_basis), got {order} for {num_basis}"
        )
    D = np.diff(np.eye(num_basis), n=order, axis=0)
    return D.T @ D


# ---- Design assembly ----


@dataclass
class StructuredDesign:
    """Built structured design: matrix, penalty, and evaluation metadata.

    X is the training design matrix; K the block-diagonal penalty (zero
    except for spline blocks). column_map sends term names to column slices
    of X. knots and factor_levels hold what transform() needs to evaluate
    the same basis on new data.
    """

    X: np.ndarray
    K: np.ndarray
    terms: tuple[TermSpec, ...]
    column_map: dict[str, slice]
    has_intercept: bool
    knots: dict[str, np.ndarray] = field(default_factory=dict)
    factor_levels: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def n_columns(self) -> int:
        return self.K.shape[0]

    def transform(self, data: Mapping[str, Sequence]):
        """Design matrix for new data using the stored basis.

        Returns (X_new, clamp_counts) where clamp_counts maps each spline
        term name to the number of observations that fell outside the
        training knot range and were clamped onto it.
        """
        X_new, _, clamp_counts = _assemble(
            data,
            self.terms,
            self.has_intercept,
            knots=self.knots,
            factor_levels=self.factor_levels,
        )
        return X_new, clamp_counts


def _numeric_column(data: Mapping, name: str, n: int | None) -> np.ndarray:
    if name not in data:
        raise SchemaError(f"column {name!r} not present in data")
    try:
        col = np.asarray(data[name], dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"column {name!r} is not numeric") from exc
    if col.ndim != 1:
        raise DataError(f"column {name!r} must be 1-D")
    if n is not None and col.shape[0] != n:
        raise DataError(
            f"column {name!r} has length {col.shape[0]}, expected {n}"
        )
    if not np.all(np.isfinite(col)):
        raise DataError(f"column {name!r} contains non-finite values")
    return col


def _data_length(data: Mapping[str, Sequence], terms) -> int:
    for spec in terms:
        if spec.column is not None:
            if spec.column not in data:
                raise SchemaError(f"column {spec.column!r} not present in data")
            return len(data[spec.column])
    # Intercept-only design: fall back to any column in the table.
    for col in data.values():
        return len(col)
    raise DataError("cannot infer number of rows from empty data")


def _assemble(
    data: Mapping[str, Sequence],
    terms: Sequence[TermSpec],
    has_intercept: bool,
    knots: Mapping[str, np.ndarray] | None = None,
    factor_levels: Mapping[str, tuple[str, ...]] | None = None,
):
    n = _data_length(data, terms)
    if n == 0:
        raise DataError("data has no rows")
    blocks: list[np.ndarray] = []
    penalties: list[np.ndarray] = []
    column_map: dict[str, slice] = {}
    out_knots: dict[str, np.ndarray] = {}
    out_levels: dict[str, tuple[str, ...]] = {}
    clamp_counts: dict[str, int] = {}
    start = 0
    for spec in terms:
        if spec.kind == "intercept":
            block = np.ones((n, 1))
            pen = np.zeros((1, 1))
        elif spec.kind == "linear":
            col = _numeric_column(data, spec.column, n)
            block = col[:, None]
            pen = np.zeros((1, 1))
        elif spec.kind == "bspline":
            col = _numeric_column(data, spec.column, n)
            if knots is not None and spec.name in knots:
                t = np.asarray(knots[spec.name], dtype=float)
            else:
                lo, hi = float(col.min()), float(col.max())
                if lo == hi:
                    raise DataError(
                        f"column {spec.column!r} is constant; cannot place "
                        "spline knots"
                    )
                t = bspline_knots((lo, hi), spec.num_basis, spec.degree)
            block, n_clamped = _eval_bspline(col, t, spec.num_basis, spec.degree)
            clamp_counts[spec.name] = n_clamped
            out_knots[spec.name] = t
            pen = difference_penalty(spec.num_basis, spec.penalty_order)
        else:  # factor
            if spec.column not in data:
                raise SchemaError(f"column {spec.column!r} not present in data")
            raw = [str(v) for v in data[spec.column]]
            if len(raw) != n:
                raise DataError(
                    f"column {spec.column!r} has length {len(raw)}, expected {n}"
                )
            if factor_levels is not None and spec.name in factor_levels:
                levels = tuple(factor_levels[spec.name])
            elif spec.levels is not None:
                levels = spec.levels
            else:
                levels = tuple(sorted(set(raw)))
            if len(levels) < 2:
                raise DataError(
                    f"factor column {spec.column!r} has fewer than 2 levels"
                )
            index = {lv: i for i, lv in enumerate(levels)}
            unseen = sorted(set(raw) - set(levels))
            if unseen:
                raise SchemaError(
                    f"column {spec.column!r} contains level(s) not in the "
                    f"design: {unseen}"
                )
            codes = np.array([index[v] for v in raw])
            full = np.zeros((n, len(levels)))
            full[np.arange(n), codes] = 1.0
            # Drop the first level as reference when an intercept is present.
            block = full[:, 1:] if has_intercept else full
            out_levels[spec.name] = levels
            pen = np.zeros((block.shape[1], block.shape[1]))
        blocks.append(block)
        penalties.append(pen)
        column_map[spec.name] = slice(start, start + block.shape[1])
        start += block.shape[1]
    X = np.hstack(blocks)
    p = X.shape[1]
    K = np.zeros((p, p))
    for spec, pen in zip(terms, penalties):
        sl = column_map[spec.name]
        K[sl, sl] = pen
    return X, (K, column_map, out_knots, out_levels), clamp_counts


def build_design(
    data: Mapping[str, Sequence], terms: Sequence[TermSpec]
) -> StructuredDesign:
    """Build a structured design from a column table and term specs.

    Terms are laid out left to right in the given order. Factor terms are
    dummy-encoded, dropping the first level when an intercept term is
    present. Spline knots are placed over the observed (min, max) of the
    source column and stored on the design.
    """
    terms = tuple(terms)
    if not terms:
        raise SpecError("design needs at least one term")
    names = [spec.name for spec in terms]
    if len(set(names)) != len(names):
        dup = sorted({x for x in names if names.count(x) > 1})
        raise SpecError(f"duplicate term name(s): {dup}")
    has_intercept = any(spec.kind == "intercept" for spec in terms)
    X, (K, column_map, knots, levels), _ = _assemble(data, terms, has_intercept)
    return StructuredDesign(
        X=X,
        K=K,
        terms=terms,
        column_map=column_map,
        has_intercept=has_intercept,
        knots=knots,
        factor_levels=levels,
    )
