"""Post-hoc orthogonalization of trained semi-structured models.

After unconstrained training, the latent contribution generally overlaps the
span of the structured design, so beta alone is not interpretable. The
routines here repair that after the fact:

- pho_full: project the latent predictions onto the structured columns in
  one pass and fold the projected part into the structured coefficients.
  Total predictions are unchanged; the remaining latent part is orthogonal
  to the design.
- pho_minibatch: the same correction computed exactly from batch-wise
  accumulation of the normal equations, with O(p^2 + n) persistent storage.
- phogam_adjust: penalized variant for spline designs; the correction solves
  a penalized normal system, optionally with the penalty weight chosen by
  generalized cross-validation. With a positive penalty the remaining latent
  part is NOT orthogonal to the design (the reported ortho_residual
  quantifies this; it is not asserted).

Plus out-of-sample decomposition of predictions into structured and
unstructured parts, and the two importance measures built on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .basis import StructuredDesign
from .errors import (
    DataError,
    DegenerateError,
    DimensionError,
    PreconditionError,
    SchemaError,
)
from .linalg import (
    least_squares_solve,
    penalized_coefficients,
    psd_minnorm_solve,
    solve_gram,
)
from .network import SSNModel, mlp_forward

GCV_GRID = np.logspace(-4.0, 4.0, 25)


@dataclass
class PHOResult:
    """Orthogonalized coefficients and the per-observation decomposition.

    beta_tilde = beta + alpha is the corrected structured coefficient
    vector; alpha is the folded-in correction. eta_str and eta_unstr are the
    structured and remaining unstructured prediction parts on the data the
    correction was computed from; their sum equals the model's
    projection-inactive predictions. ortho_residual is the scale-free
    overlap max|X^T eta_unstr| / (||X||_F ||eta_unstr||); lambda_used is
    None for the unpenalized routines.
    """

    beta_tilde: np.ndarray
    alpha: np.ndarray
    eta_str: np.ndarray
    eta_unstr: np.ndarray
    ortho_residual: float
    lambda_used: float | None = None
    has_intercept: bool = True
    method: str = "pho"


def _ortho_residual(
    xte_inf: float, x_fro: float, e_norm: float
) -> float:
    den = x_fro * e_norm
    if den == 0.0:
        return 0.0
    return float(xte_inf / den)


def _latent_predictions(model: SSNModel, Z: np.ndarray) -> np.ndarray:
    U = mlp_forward(model.mlp, model.mlp_config, Z)
    return U @ model.gamma


def pho_full(model: SSNModel, X: np.ndarray, Z: np.ndarray) -> PHOResult:
    """One-pass orthogonalization against the full structured matrix.

    The correction alpha is the minimum-norm least-squares regression of
    the latent predictions on X. Predictions with the projection inactive
    are invariant: X beta_tilde + eta_unstr == X beta + U gamma up to
    roundoff.
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got ndim={X.ndim}")
    if X.shape[0] != Z.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows, Z has {Z.shape[0]}")
    if X.shape[1] != model.beta.shape[0]:
        raise DimensionError(
            f"X has {X.shape[1]} columns, beta has {model.beta.shape[0]}"
        )
    if X.shape[0] == 0:
        raise DataError("cannot orthogonalize on empty data")
    zeta = _latent_predictions(model, Z)
    alpha = least_squares_solve(X, zeta)
    beta_tilde = model.beta + alpha
    eta_unstr = zeta - X @ alpha
    eta_str = X @ beta_tilde
    resid = _ortho_residual(
        float(np.max(np.abs(X.T @ eta_unstr))) if X.size else 0.0,
        float(np.linalg.norm(X)),
        float(np.linalg.norm(eta_unstr)),
    )
    return PHOResult(
        beta_tilde=beta_tilde,
        alpha=alpha,
        eta_str=eta_str,
        eta_unstr=eta_unstr,
        ortho_residual=resid,
        lambda_used=None,
        has_intercept=model.design.has_intercept,
        method="pho",
    )


BatchSource = Callable[[], Iterable[tuple[np.ndarray, np.ndarray]]]


def pho_minibatch(
    model: SSNModel,
    batches: Sequence[tuple[np.ndarray, np.ndarray]] | BatchSource,
) -> PHOResult:
    """Exact orthogonalization from batch-wise accumulation.

    batches is either a sequence of (X_batch, Z_batch) pairs or a zero-arg
    callable returning a fresh iterator over them (the data is traversed
    twice: once to accumulate the normal equations, once to assemble the
    per-observation parts). Only the p x p Gram matrix, the p-vector
    right-hand side, and the per-batch latent predictions persist between
    passes. Batches may be smaller than p; the accumulated system is solved
    once at the end and agrees with pho_full for any partition of the same
    rows in the same order.
    """
    if callable(batches):
        source = batches
    else:
        seq = list(batches)
        source = lambda: iter(seq)  # noqa: E731 - tiny adapter
    p = model.beta.shape[0]
    H = np.zeros((p, p))
    s = np.zeros(p)
    zetas: list[np.ndarray] = []
    n_total = 0
    for X_b, Z_b in source():
        X_b = np.asarray(X_b, dtype=float)
        if X_b.ndim != 2 or X_b.shape[1] != p:
            raise DimensionError(
                f"batch has {X_b.shape[1] if X_b.ndim == 2 else '?'} columns, "
                f"expected {p}"
            )
        if X_b.shape[0] == 0:
            raise DataError("empty batch")
        zeta_b = _latent_predictions(model, np.asarray(Z_b, dtype=float))
        if zeta_b.shape[0] != X_b.shape[0]:
            raise DimensionError("X and Z batch row counts differ")
        H += X_b.T @ X_b
        s += X_b.T @ zeta_b
        zetas.append(zeta_b)
        n_total += X_b.shape[0]
    if n_total == 0:
        raise DataError("batch source produced no data")
    alpha = solve_gram(H, s)
    beta_tilde = model.beta + alpha
    eta_unstr = np.empty(n_total)
    eta_str = np.empty(n_total)
    xte = np.zeros(p)
    pos = 0
    for (X_b, _), zeta_b in zip(source(), zetas):
        X_b = np.asarray(X_b, dtype=float)
        b = X_b.shape[0]
        e_b = zeta_b - X_b @ alpha
        eta_unstr[pos : pos + b] = e_b
        eta_str[pos : pos + b] = X_b @ beta_tilde
        xte += X_b.T @ e_b
        pos += b
    if pos != n_total:
        raise DataError("batch source changed between passes")
    resid = _ortho_residual(
        float(np.max(np.abs(xte))),
        float(np.sqrt(np.trace(H))),
        float(np.linalg.norm(eta_unstr)),
    )
    return PHOResult(
        beta_tilde=beta_tilde,
        alpha=alpha,
        eta_str=eta_str,
        eta_unstr=eta_unstr,
        ortho_residual=resid,
        lambda_used=None,
        has_intercept=model.design.has_intercept,
        method="pho_minibatch",
    )


# ---- Penalized variant ----


def gcv_score(X: np.ndarray, K: np.ndarray, lam: float, v: np.ndarray) -> float:
    """Generalized cross-validation score n * RSS / (n - tr(H))^2."""
    n = X.shape[0]
    alpha = penalized_coefficients(X, K, lam, v)
    fitted = X @ alpha
    rss = float(np.sum((v - fitted) ** 2))
    # tr(H) = tr((X^T X + lam K)^+ X^T X), computed in p x p space. The
    # smoother trace is invariant to the choice of generalized inverse
    # because col(X^T) is contained in col(X^T X + lam K).
    XtX = X.T @ X
    A = XtX + lam * K
    edf = float(np.trace(psd_minnorm_solve(A, XtX)))
    denom = n - edf
    if denom <= 0.0:
        return float("inf")
    return n * rss / denom**2


def select_lambda_gcv(
    X: np.ndarray,
    K: np.ndarray,
    v: np.ndarray,
    grid: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Penalty weight minimizing GCV over a fixed log grid.

    Returns (best_lambda, scores). Ties resolve to the smallest grid value;
    the default grid is 25 log-spaced points on [1e-4, 1e4].
    """
    if grid is None:
        grid = GCV_GRID
    scores = np.array([gcv_score(X, K, lam, v) for lam in grid])
    if not np.any(np.isfinite(scores)):
        raise DegenerateError("GCV score is non-finite on the whole grid")
    return float(grid[int(np.argmin(scores))]), scores


def phogam_adjust(
    model: SSNModel,
    design: StructuredDesign,
    Z: np.ndarray,
    lam: float | str = "auto",
) -> PHOResult:
    """Penalized orthogonalization for spline designs.

    The correction solves (X^T X + lam K) alpha = X^T (U gamma) with the
    design's block penalty K, taking the minimum-norm solution when spline
    blocks and the intercept overlap. lam=0 reduces to pho_full. lam="auto"
    selects the weight by GCV on the latent predictions. With lam > 0 the
    unpenalized orthogonality no longer holds; the ortho_residual field
    reports the leftover overlap.
    """
    X = design.X
    Z = np.asarray(Z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows, Z has {Z.shape[0]}")
    if X.shape[1] != model.beta.shape[0]:
        raise DimensionError(
            f"design has {X.shape[1]} columns, beta has {model.beta.shape[0]}"
        )
    zeta = _latent_predictions(model, Z)
    if isinstance(lam, str):
        if lam != "auto":
            raise SchemaError(f"lambda must be a number or 'auto', got {lam!r}")
        lam_value, _ = select_lambda_gcv(X, design.K, zeta)
    else:
        lam_value = float(lam)
        if lam_value < 0:
            raise SchemaError(f"lambda must be >= 0, got {lam_value}")
    alpha = penalized_coefficients(X, design.K, lam_value, zeta)
    beta_tilde = model.beta + alpha
    eta_unstr = zeta - X @ alpha
    eta_str = X @ beta_tilde
    resid = _ortho_residual(
        float(np.max(np.abs(X.T @ eta_unstr))),
        float(np.linalg.norm(X)),
        float(np.linalg.norm(eta_unstr)),
    )
    return PHOResult(
        beta_tilde=beta_tilde,
        alpha=alpha,
        eta_str=eta_str,
        eta_unstr=eta_unstr,
        ortho_residual=resid,
        lambda_used=lam_value,
        has_intercept=design.has_intercept,
        method="phogam",
    )


def gam_fit(
    design: StructuredDesign, y: np.ndarray, lam: float | str = "auto"
) -> tuple[np.ndarray, float]:
    """Penalized least-squares fit of y on the structured design alone.

    Shares the penalty machinery and GCV selection with phogam_adjust.
    Returns (coefficients, lambda_used).
    """
    y = np.asarray(y, dtype=float)
    X = design.X
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"y has {y.shape[0]} rows, design has {X.shape[0]}")
    if isinstance(lam, str):
        if lam != "auto":
            raise SchemaError(f"lambda must be a number or 'auto', got {lam!r}")
        lam_value, _ = select_lambda_gcv(X, design.K, y)
    else:
        lam_value = float(lam)
    coefs = penalized_coefficients(X, design.K, lam_value, y)
    return coefs, lam_value


# ---- Out-of-sample decomposition ----


def decompose_out_of_sample(
    model: SSNModel,
    pho: PHOResult,
    X_star: np.ndarray,
    Z_star: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Structured/unstructured prediction parts on new data.

    eta_str = X* beta_tilde; eta_unstr = U(Z*) gamma - X* alpha. The parts
    sum to the model's projection-inactive prediction on (X*, Z*) exactly
    (up to roundoff), for any alpha produced by the orthogonalization
    routines.
    """
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim != 2:
        raise DimensionError("X_star must be 2-D")
    if X_star.shape[1] != pho.beta_tilde.shape[0]:
        raise SchemaError(
            f"X_star has {X_star.shape[1]} columns, the orthogonalized model "
            f"was built on {pho.beta_tilde.shape[0]}"
        )
    zeta_star = _latent_predictions(model, np.asarray(Z_star, dtype=float))
    if zeta_star.shape[0] != X_star.shape[0]:
        raise DimensionError("X_star and Z_star row counts differ")
    eta_str = X_star @ pho.beta_tilde
    eta_unstr = zeta_star - X_star @ pho.alpha
    return eta_str, eta_unstr


# ---- Importance measures ----


def ev_structured(pho: PHOResult) -> float:
    """Share of prediction variance carried by the structured part.

    Var(eta_str) / Var(eta_str + eta_unstr). Requires an intercept in the
    design (otherwise the two parts are not variance-orthogonal and the
    share is not a proportion). Raises on constant total predictions.
    """
    if not pho.has_intercept:
        raise PreconditionError(
            "explained-variance share requires an intercept in the design"
        )
    eta = pho.eta_str + pho.eta_unstr
    total = float(np.var(eta))
    if total == 0.0:
        raise DegenerateError("total prediction is constant; share undefined")
    return float(np.var(pho.eta_str)) / total


def mcfadden_r2(
    model: SSNModel,
    pho: PHOResult,
    X: np.ndarray,
    y: np.ndarray,
    term: str,
) -> float:
    """Likelihood-ratio importance of one structured term.

    1 - ll(eta) / ll(eta_without_term), with Gaussian log-likelihood whose
    variance is the full-model mean squared residual, and the reduced
    predictor formed by zeroing the term's columns without refitting. Zero
    for a term whose corrected coefficients are zero; positive when the
    term improves the fit.
    """
    if term not in model.design.column_map:
        raise SchemaError(f"unknown term {term!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    eta_full = pho.eta_str + pho.eta_unstr
    n = eta_full.shape[0]
    if X.shape[0] != n or y.shape[0] != n:
        raise DimensionError("X and y must match the decomposition length")
    rss_full = float(np.sum((y - eta_full) ** 2))
    if rss_full == 0.0:
        raise DegenerateError(
            "full model fits exactly; likelihood ratio undefined"
        )
    sigma2 = rss_full / n
    sl = model.design.column_map[term]
    eta_reduced = eta_full - X[:, sl] @ pho.beta_tilde[sl]
    rss_reduced = float(np.sum((y - eta_reduced) ** 2))
    const = -0.5 * n * np.log(2.0 * np.pi * sigma2)
    ll_full = const - rss_full / (2.0 * sigma2)
    ll_reduced = const - rss_reduced / (2.0 * sigma2)
    if ll_reduced == 0.0:
        raise DegenerateError("reduced-model log-likelihood is exactly zero")
    return 1.0 - ll_full / ll_reduced


@dataclass
class ImportanceReport:
    """Explained-variance share plus per-term likelihood-ratio importance."""

    ev_structured: float
    ev_unstructured: float
    r2: dict[str, float]


def importance_report(
    model: SSNModel, pho: PHOResult, X: np.ndarray, y: np.ndarray
) -> ImportanceReport:
    """Both importance measures for every term in the design."""
    ev = ev_structured(pho)
    eta = pho.eta_str + pho.eta_unstr
    ev_unstr = float(np.var(pho.eta_unstr)) / float(np.var(eta))
    r2 = {
        spec.name: mcfadden_r2(model, pho, X, y, spec.name)
        for spec in model.design.terms
    }
    return ImportanceReport(ev_structured=ev, ev_unstructured=ev_unstr, r2=r2)
