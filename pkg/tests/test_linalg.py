"""Least-squares and projection primitives against independent oracles.

The oracle for normal-equation solves is a from-scratch Gaussian elimination
with full pivoting (no numpy.linalg involvement), so agreement is evidence
of correctness rather than shared implementation.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semistruct.errors import DimensionError, SingularSystemError
from semistruct.linalg import (
    least_squares_solve,
    matrix_rank,
    orthonormal_basis,
    penalized_coefficients,
    project_onto,
    project_orthogonal,
    pseudoinverse,
    psd_minnorm_solve,
    solve_gram,
)


def solve_full_pivot(A, b):
    """Oracle: solve the square system A x = b by elimination with full
    pivoting (row and column swaps on the largest remaining entry)."""
    A = [list(map(float, row)) for row in np.asarray(A)]
    b = list(map(float, np.asarray(b)))
    n = len(A)
    col_perm = list(range(n))
    for k in range(n):
        # Largest entry in the remaining submatrix.
        piv_r, piv_c, piv_v = k, k, 0.0
        for i in range(k, n):
            for j in range(k, n):
                if abs(A[i][j]) > piv_v:
                    piv_r, piv_c, piv_v = i, j, abs(A[i][j])
        if piv_v == 0.0:
            raise ZeroDivisionError("singular system in oracle")
        A[k], A[piv_r] = A[piv_r], A[k]
        b[k], b[piv_r] = b[piv_r], b[k]
        for row in A:
            row[k], row[piv_c] = row[piv_c], row[k]
        col_perm[k], col_perm[piv_c] = col_perm[piv_c], col_perm[k]
        for i in range(k + 1, n):
            m = A[i][k] / A[k][k]
            for j in range(k, n):
                A[i][j] -= m * A[k][j]
            b[i] -= m * b[k]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc -= A[i][j] * x[j]
        x[i] = acc / A[i][i]
    out = [0.0] * n
    for pos, orig in enumerate(col_perm):
        out[orig] = x[pos]
    return np.array(out)


def normal_equations_oracle(X, v):
    """Oracle least-squares fit for full-column-rank X."""
    return solve_full_pivot(X.T @ X, X.T @ v)


class TestLeastSquaresSolve:
    def test_identity_design_returns_rhs(self):
        np.testing.assert_allclose(
            least_squares_solve(np.eye(2), np.array([3.0, -1.0])),
            [3.0, -1.0],
        )

    def test_repeated_row_design_returns_mean(self):
        X = np.array([[1.0], [1.0]])
        np.testing.assert_allclose(
            least_squares_solve(X, np.array([1.0, 3.0])), [2.0]
        )

    def test_recovers_coefficients_for_in_span_target(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(6, 3))
        v = X @ np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(
            least_squares_solve(X, v), [1.0, 2.0, 3.0], atol=1e-8
        )

    def test_matches_elimination_oracle_on_noisy_target(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(40, 5))
        v = rng.normal(size=40)
        np.testing.assert_allclose(
            least_squares_solve(X, v),
            normal_equations_oracle(X, v),
            atol=1e-10,
        )

    def test_matrix_right_hand_side_solves_columnwise(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(30, 4))
        V = rng.normal(size=(30, 3))
        got = least_squares_solve(X, V)
        for j in range(3):
            np.testing.assert_allclose(
                got[:, j], least_squares_solve(X, V[:, j]), atol=1e-12
            )

    def test_rank_deficient_design_gives_minimum_norm_solution(self):
        rng = np.random.default_rng(9)
        base = rng.normal(size=(20, 2))
        X = np.column_stack([base, base[:, 0] + base[:, 1]])
        v = rng.normal(size=20)
        b = least_squares_solve(X, v)
        # Any perturbation within the null space must increase the norm.
        null = np.array([1.0, 1.0, -1.0]) / np.sqrt(3.0)
        assert abs(b @ null) < 1e-10
        # Fit quality equals the unreduced problem's optimum.
        b_full = least_squares_solve(X[:, :2], v)
        assert np.linalg.norm(X @ b - v) <= np.linalg.norm(
            X[:, :2] @ b_full - v
        ) + 1e-10

    def test_row_count_mismatch_raises(self):
        with pytest.raises(DimensionError):
            least_squares_solve(np.eye(3), np.array([1.0, 2.0]))


class TestPseudoinverse:
    def test_identity_is_self_inverse(self):
        np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))

    def test_diagonal_with_zero_inverts_nonzero_entries_only(self):
        X = np.array([[2.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(
            pseudoinverse(X), [[0.5, 0.0], [0.0, 0.0]], atol=1e-14
        )

    def test_full_column_rank_gives_left_inverse(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(5, 2))
        np.testing.assert_allclose(
            pseudoinverse(X) @ X, np.eye(2), atol=1e-10
        )

    @pytest.mark.parametrize("rank", [1, 2, 3, 4])
    def test_penrose_conditions_at_each_rank(self, rank):
        rng = np.random.default_rng(100 + rank)
        A = rng.normal(size=(6, rank))
        B = rng.normal(size=(rank, 4))
        X = A @ B  # rank `rank` by construction
        P = pseudoinverse(X)
        scale = np.linalg.norm(X)
        np.testing.assert_allclose(X @ P @ X, X, atol=1e-8 * scale)
        np.testing.assert_allclose(
            P @ X @ P, P, atol=1e-8 * np.linalg.norm(P)
        )
        np.testing.assert_allclose((X @ P).T, X @ P, atol=1e-8)
        np.testing.assert_allclose((P @ X).T, P @ X, atol=1e-8)

    def test_zero_matrix_maps_to_zero(self):
        np.testing.assert_array_equal(
            pseudoinverse(np.zeros((3, 2))), np.zeros((2, 3))
        )


class TestProjections:
    def test_projection_onto_first_axis(self):
        X = np.array([[1.0], [0.0]])
        V = np.array([[2.0], [3.0]])
        np.testing.assert_allclose(project_onto(X, V), [[2.0], [0.0]])

    def test_projection_onto_ones_averages(self):
        X = np.array([[1.0], [1.0]])
        V = np.array([[1.0], [3.0]])
        np.testing.assert_allclose(project_onto(X, V), [[2.0], [2.0]])

    def test_vectors_in_column_space_are_fixed_points(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 4))
        V = X @ rng.normal(size=(4, 3))
        np.testing.assert_allclose(
            project_onto(X, V), V, atol=1e-9 * np.linalg.norm(V)
        )

    def test_projection_is_idempotent(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(15, 3))
        V = rng.normal(size=(15, 2))
        once = project_onto(X, V)
        np.testing.assert_allclose(project_onto(X, once), once, atol=1e-9)

    def test_orthogonal_complement_of_first_axis(self):
        X = np.array([[1.0], [0.0]])
        V = np.array([[2.0], [3.0]])
        np.testing.assert_allclose(
            project_orthogonal(X, V), [[0.0], [3.0]], atol=1e-14
        )

    def test_orthogonal_complement_of_ones_mean_centers(self):
        X = np.array([[1.0], [1.0]])
        V = np.array([[1.0], [3.0]])
        np.testing.assert_allclose(
            project_orthogonal(X, V), [[-1.0], [1.0]], atol=1e-14
        )

    def test_full_row_rank_annihilates_everything_exactly(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(2, 3))  # 2 rows, rank 2: spans R^2
        V = rng.normal(size=(2, 5))
        out = project_orthogonal(X, V)
        assert np.all(out == 0.0)  # exact zeros, not merely small

    def test_square_full_rank_batch_annihilates_exactly(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(4, 4))
        V = rng.normal(size=4)
        assert np.all(project_orthogonal(X, V) == 0.0)

    def test_parts_reassemble_exactly(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(20, 6))
        V = rng.normal(size=(20, 3))
        total = project_onto(X, V) + project_orthogonal(X, V)
        np.testing.assert_allclose(total, V, atol=1e-12)

    def test_orthogonal_part_has_no_design_overlap(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(30, 5))
        V = rng.normal(size=(30, 2))
        overlap = X.T @ project_orthogonal(X, V)
        bound = 1e-8 * np.linalg.norm(X) * np.linalg.norm(V)
        assert np.max(np.abs(overlap)) < bound

    def test_row_count_mismatch_raises(self):
        with pytest.raises(DimensionError):
            project_onto(np.eye(3), np.ones((4, 1)))
        with pytest.raises(DimensionError):
            project_orthogonal(np.eye(3), np.ones((4, 1)))


class TestPenalizedCoefficients:
    def second_difference_penalty(self, p):
        D = np.diff(np.eye(p), n=2, axis=0)
        return D.T @ D

    def test_zero_penalty_equals_least_squares(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(25, 4))
        v = rng.normal(size=25)
        K = self.second_difference_penalty(4)
        np.testing.assert_allclose(
            penalized_coefficients(X, K, 0.0, v),
            least_squares_solve(X, v),
            atol=1e-9,
        )

    def test_huge_ridge_penalty_shrinks_to_zero(self):
        got = penalized_coefficients(
            np.eye(2), np.eye(2), 1e12, np.array([1.0, 1.0])
        )
        assert np.all(np.abs(got) < 1e-6)

    def test_matches_elimination_oracle_at_unit_penalty(self):
        rng = np.random.default_rng(22)
        X = rng.normal(size=(40, 6))
        v = rng.normal(size=40)
        K = self.second_difference_penalty(6)
        oracle = solve_full_pivot(X.T @ X + K, X.T @ v)
        np.testing.assert_allclose(
            penalized_coefficients(X, K, 1.0, v), oracle, atol=1e-9
        )

    def test_singular_design_with_zero_penalty_is_min_norm_fit(self):
        # Duplicated column, zero K: the penalized system is singular and
        # the solution must match the minimum-norm least-squares fit.
        rng = np.random.default_rng(23)
        base = rng.normal(size=(30, 3))
        X = np.column_stack([base, base[:, 0]])
        K = np.zeros((4, 4))
        v = rng.normal(size=30)
        got = penalized_coefficients(X, K, 0.7, v)
        ref, *_ = np.linalg.lstsq(X, v, rcond=None)
        np.testing.assert_allclose(got, ref, atol=1e-8)

    def test_singular_penalized_system_has_unique_fitted_values(self):
        # Intercept next to a block whose columns sum to one (the spline
        # confound): coefficients are ambiguous but fitted values are not.
        rng = np.random.default_rng(24)
        B = rng.dirichlet(alpha=np.ones(4), size=30)  # rows sum to 1
        X = np.column_stack([np.ones(30), B])
        D = np.diff(np.eye(4), n=2, axis=0)
        K = np.zeros((5, 5))
        K[1:, 1:] = D.T @ D
        v = rng.normal(size=30)
        lam = 0.3
        a = penalized_coefficients(X, K, lam, v)
        # Independent oracle for the fitted values: stacked least squares
        # min ||Xa - v||^2 + lam ||D a_block||^2 via numpy lstsq.
        augmented = np.vstack(
            [X, np.sqrt(lam) * np.column_stack([np.zeros(2), D])]
        )
        target = np.concatenate([v, np.zeros(2)])
        ref, *_ = np.linalg.lstsq(augmented, target, rcond=None)
        np.testing.assert_allclose(X @ a, X @ ref, atol=1e-8)
        np.testing.assert_allclose(a, ref, atol=1e-8)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            penalized_coefficients(
                np.eye(2), np.eye(2), -1.0, np.array([1.0, 1.0])
            )

    def test_penalty_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            penalized_coefficients(
                np.eye(3), np.eye(2), 1.0, np.ones(3)
            )


class TestPsdMinnormSolve:
    def test_full_rank_matches_oracle(self):
        rng = np.random.default_rng(31)
        M = rng.normal(size=(5, 5))
        A = M.T @ M + np.eye(5)
        b = rng.normal(size=5)
        np.testing.assert_allclose(
            psd_minnorm_solve(A, b), solve_full_pivot(A, b), atol=1e-9
        )

    def test_singular_system_takes_minimum_norm_solution(self):
        # A = diag(1, 0): solutions of A y = (2, 0) are (2, t); min-norm
        # picks t = 0.
        A = np.diag([1.0, 0.0])
        np.testing.assert_allclose(
            psd_minnorm_solve(A, np.array([2.0, 0.0])), [2.0, 0.0]
        )

    def test_zero_matrix_maps_to_zero(self):
        np.testing.assert_array_equal(
            psd_minnorm_solve(np.zeros((3, 3)), np.ones(3)), np.zeros(3)
        )


class TestSolveGram:
    def test_exact_system_recovers_solution(self):
        rng = np.random.default_rng(41)
        X = rng.normal(size=(50, 4))
        H = X.T @ X
        truth = rng.normal(size=4)
        got = solve_gram(H, H @ truth)
        np.testing.assert_allclose(got, truth, atol=1e-9)

    def test_singular_gram_matrix_reports_rank(self):
        rng = np.random.default_rng(42)
        base = rng.normal(size=(30, 2))
        X = np.column_stack([base, base @ np.array([1.0, -2.0])])
        H = X.T @ X
        with pytest.raises(SingularSystemError) as exc_info:
            solve_gram(H, np.ones(3))
        assert exc_info.value.rank == 2

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            solve_gram(np.ones((2, 3)), np.ones(2))


class TestRankAndBasis:
    def test_rank_of_outer_product_is_one(self):
        u = np.arange(1.0, 5.0)
        assert matrix_rank(np.outer(u, u)) == 1

    def test_orthonormal_basis_spans_and_is_orthonormal(self):
        rng = np.random.default_rng(51)
        X = rng.normal(size=(10, 3))
        Q = orthonormal_basis(X)
        assert Q.shape == (10, 3)
        np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
        # Columns of X are reproducible from Q.
        np.testing.assert_allclose(Q @ (Q.T @ X), X, atol=1e-12)


@st.composite
def matrix_and_targets(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    p = draw(st.integers(min_value=1, max_value=6))
    entries = st.floats(
        min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False
    )
    X = np.array(
        draw(
            st.lists(
                st.lists(entries, min_size=p, max_size=p),
                min_size=n,
                max_size=n,
            )
        )
    )
    v = np.array(draw(st.lists(entries, min_size=n, max_size=n)))
    return X, v


@given(matrix_and_targets())
@settings(max_examples=60, deadline=None)
def test_projection_parts_always_reassemble(case):
    X, v = case
    total = project_onto(X, v) + project_orthogonal(X, v)
    np.testing.assert_allclose(total, v, atol=1e-10 * (1 + np.abs(v).max()))


@given(matrix_and_targets())
@settings(max_examples=60, deadline=None)
def test_orthogonal_part_never_overlaps_design(case):
    X, v = case
    out = project_orthogonal(X, v)
    bound = 1e-8 * max(1.0, np.linalg.norm(X)) * max(1.0, np.linalg.norm(v))
    assert np.max(np.abs(X.T @ out), initial=0.0) < bound


@given(matrix_and_targets())
@settings(max_examples=60, deadline=None)
def test_least_squares_never_beaten_by_random_competitor(case):
    X, v = case
    b = least_squares_solve(X, v)
    rng = np.random.default_rng(0)
    ours = np.linalg.norm(X @ b - v)
    for _ in range(5):
        other = b + rng.normal(size=b.shape)
        assert ours <= np.linalg.norm(X @ other - v) + 1e-8
