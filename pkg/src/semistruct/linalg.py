"""Dense least-squares and projection primitives.

All routines are rank-aware: a single SVD factorization with a relative
singular-value cutoff backs the pseudoinverse, the minimum-norm least-squares
solve, and the column-space projectors, so the rank decision is made in
exactly one place. Matrices are dense float64 throughout; no sparse or
iterative paths.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SingularSystemError

# Relative cutoff for treating singular values as zero, as a multiple of the
# largest singular value.
RANK_RTOL = 1e-10
# Stricter cutoff used when a penalized normal-equations system must be
# genuinely invertible rather than rank-truncated.
SOLVE_RTOL = 1e-12


def _as_2d(X: np.ndarray, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got ndim={X.ndim}")
    return X


def _svd_factors(X: np.ndarray, rtol: float = RANK_RTOL):
    """Thin SVD of X with small singular values dropped.

    Returns (U_r, s_r, Vt_r) keeping only singular values > rtol * s_max.
    For a zero (or empty) matrix all three factors are empty.
    """
    if X.size == 0:
        return (
            np.zeros((X.shape[0], 0)),
            np.zeros(0),
            np.zeros((0, X.shape[1])),
        )
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        keep = np.zeros(s.shape, dtype=bool)
    else:
        keep = s > rtol * s[0]
    return U[:, keep], s[keep], Vt[keep]


def matrix_rank(X: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Numerical rank at the package-wide relative cutoff."""
    X = _as_2d(X, "X")
    _, s, _ = _svd_factors(X, rtol)
    return int(s.size)


def pseudoinverse(X: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD with relative cutoff.

    Parameters
    ----------
    X : (n, p) matrix

    Returns
    -------
    (p, n) matrix satisfying the four Penrose conditions up to roundoff.
    """
    X = _as_2d(X, "X")
    U, s, Vt = _svd_factors(X)
    if s.size == 0:
        return np.zeros((X.shape[1], X.shape[0]))
    return (Vt.T / s) @ U.T


def least_squares_solve(X: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of X b ~= v.

    Equals pseudoinverse(X) @ v but computed from the factored SVD directly.
    v may be a vector (n,) or a matrix (n, k) of stacked right-hand sides.
    """
    X = _as_2d(X, "X")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != X.shape[0]:
        raise DimensionError(
            f"right-hand side has {v.shape[0]} rows, X has {X.shape[0]}"
        )
    U, s, Vt = _svd_factors(X)
    if s.size == 0:
        shape = (X.shape[1],) if v.ndim == 1 else (X.shape[1], v.shape[1])
        return np.zeros(shape)
    return Vt.T @ ((U.T @ v).T / s).T


def orthonormal_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis Q of the column space of X (n, rank)."""
    X = _as_2d(X, "X")
    U, _, _ = _svd_factors(X)
    return U


def project_onto(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Orthogonal projection of the columns of V onto the column space of X.

    V may be (n,) or (n, k). The projector is P = Q Q^T for an orthonormal
    basis Q of col(X); it is never formed as an n x n matrix.
    """
    X = _as_2d(X, "X")
    V = np.asarray(V, dtype=float)
    if V.shape[0] != X.shape[0]:
        raise DimensionError(f"V has {V.shape[0]} rows, X has {X.shape[0]}")
    Q = orthonormal_basis(X)
    return Q @ (Q.T @ V)


def project_orthogonal(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Component of V orthogonal to the column space of X: V - P_X V.

    When X has full row rank (its columns span the whole row space, e.g.
    fewer rows than columns), the result is exactly the zero array.
    """
    X = _as_2d(X, "X")
    V = np.asarray(V, dtype=float)
    if V.shape[0] != X.shape[0]:
        raise DimensionError(f"V has {V.shape[0]} rows, X has {X.shape[0]}")
    Q = orthonormal_basis(X)
    if Q.shape[1] == X.shape[0]:
        # col(X) spans the full space; the orthogonal complement is {0}.
        return np.zeros_like(V)
    return V - Q @ (Q.T @ V)


def psd_minnorm_solve(
    A: np.ndarray, B: np.ndarray, rtol: float = SOLVE_RTOL
) -> np.ndarray:
    """Minimum-norm solution of A Y = B for symmetric PSD A.

    Eigenvalues at or below rtol * max eigenvalue are treated as zero and
    their directions receive zero coefficients (pseudoinverse convention).
    B may be a vector (p,) or matrix (p, k).
    """
    A = _as_2d(A, "A")
    B = np.asarray(B, dtype=float)
    p = A.shape[0]
    if A.shape != (p, p):
        raise DimensionError(f"A must be square, got {A.shape}")
    if B.shape[0] != p:
        raise DimensionError(f"B has {B.shape[0]} rows, A has {p}")
    w, V = np.linalg.eigh(A)
    top = w[-1] if w.size else 0.0
    if top <= 0.0:
        return np.zeros_like(B)
    keep = w > rtol * top
    Vk = V[:, keep]
    return Vk @ ((Vk.T @ B).T / w[keep]).T


def penalized_coefficients(
    X: np.ndarray,
    K: np.ndarray,
    lam: float,
    v: np.ndarray,
) -> np.ndarray:
    """Minimum-norm solution of (X^T X + lam K) a = X^T v.

    Parameters
    ----------
    X : (n, p) design matrix
    K : (p, p) symmetric positive semidefinite penalty
    lam : penalty weight, must be >= 0
    v : (n,) response vector

    The system matrix is symmetric PSD. Directions in its null space are
    null directions of X and (for lam > 0) of K simultaneously, so the
    fitted values X a are unique even when the system is rank-deficient;
    the null directions get zero coefficient, matching the pseudoinverse
    convention of the unpenalized path. With lam = 0 and a full-column-rank
    design this is the ordinary least-squares solution.
    """
    X = _as_2d(X, "X")
    K = _as_2d(K, "K")
    v = np.asarray(v, dtype=float)
    p = X.shape[1]
    if K.shape != (p, p):
        raise DimensionError(f"K must be ({p}, {p}), got {K.shape}")
    if v.shape[0] != X.shape[0]:
        raise DimensionError(f"v has {v.shape[0]} rows, X has {X.shape[0]}")
    if lam < 0:
        raise ValueError(f"penalty weight must be nonnegative, got {lam}")
    A = X.T @ X + lam * K
    return psd_minnorm_solve(A, X.T @ v)


def solve_gram(H: np.ndarray, s_vec: np.ndarray) -> np.ndarray:
    """Solve H a = s_vec for an accumulated Gram matrix H.

    Raises SingularSystemError (with the numerical rank) if H is singular at
    the 1e-12 relative cutoff.
    """
    H = _as_2d(H, "H")
    s_vec = np.asarray(s_vec, dtype=float)
    p = H.shape[0]
    if H.shape != (p, p):
        raise DimensionError(f"H must be square, got {H.shape}")
    if s_vec.shape[0] != p:
        raise DimensionError(f"s has {s_vec.shape[0]} rows, H has {p}")
    U, sv, Vt = np.linalg.svd(H)
    rank = int(np.sum(sv > SOLVE_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    if rank < p:
        raise SingularSystemError(
            f"accumulated Gram matrix is singular (rank {rank} of {p}); "
            "the structured design does not have full column rank",
            rank=rank,
        )
    return Vt.T @ ((U.T @ s_vec) / sv)
