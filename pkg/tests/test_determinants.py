#!/usr/bin/env python3
"""
Test suite for the determinant engine.
"""
import math

import numpy as np
import pytest

from smalldet.determinants import (
    GramResult,
    adjugate,
    append_column_identity_check,
    batch_complex_log_det,
    batch_gram_log_det,
    batch_log_abs_det,
    complex_gaussian_det,
    gram_det,
    read_matrix_text,
    sample_complex_gaussian,
    square_det,
    write_matrix_text,
)
from smalldet.errors import DimensionMismatchError, NotPositiveSemidefiniteError, SpecFileError
from smalldet.streams import make_generator


def cofactor_det(M: np.ndarray) -> float:
    """Laplace expansion along the first row."""
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(M[1:], j, axis=1)
        total += (-1) ** j * M[0, j] * cofactor_det(minor)
    return total


def minor(M: np.ndarray, i: int, j: int) -> float:
    return cofactor_det(np.delete(np.delete(M, i, axis=0), j, axis=1))


@pytest.mark.unit
class TestSquareDet:
    """Test LU determinants with sign tracking."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_matches_cofactor_expansion(self, n):
        rng = make_generator(100 + n)
        for _ in range(20):
            M = rng.standard_normal((n, n))
            result = square_det(M)
            assert result.method == "lu"
            assert result.value == pytest.approx(cofactor_det(M), rel=1e-9)

    def test_sign_of_permutation(self):
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        result = square_det(swap)
        assert result.sign == -1
        assert result.value == pytest.approx(-1.0)
        assert square_det(np.eye(3)).sign == 1

    def test_exactly_singular(self):
        result = square_det(np.array([[1.0, 2.0], [2.0, 4.0]]))
        assert result.sign == 0
        assert result.det == 0.0
        assert result.log_abs_det == -math.inf

    def test_overflow_keeps_log(self):
        result = square_det(1e200 * np.eye(3))
        assert result.det is None
        assert result.log_abs_det == pytest.approx(3 * math.log(1e200))
        assert result.value == math.inf

    def test_underflow_keeps_log(self):
        result = square_det(-1e-200 * np.eye(3))
        assert result.det is None
        assert result.sign == -1
        assert result.value == 0.0

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            square_det(np.ones((2, 3)))
        with pytest.raises(ValueError):
            square_det(np.ones(3))


@pytest.mark.unit
class TestGramDet:
    """Test Gram determinants det(A A^T)."""

    def test_matches_explicit_gram(self):
        A = make_generator(7).standard_normal((3, 5))
        result = gram_det(A)
        assert result.method == "cholesky"
        assert result.value == pytest.approx(square_det(A @ A.T).value, rel=1e-10)

    def test_square_gram_is_det_squared(self):
        A = make_generator(8).standard_normal((4, 4))
        assert gram_det(A).value == pytest.approx(cofactor_det(A) ** 2, rel=1e-10)

    def test_wide_matrix_uses_qr(self):
        A = make_generator(9).standard_normal((3, 80))
        result = gram_det(A)
        assert result.method == "qr"
        _, expected = np.linalg.slogdet(A @ A.T)
        assert result.log_abs_det == pytest.approx(expected, rel=1e-10)

    def test_dependent_rows_fall_back_to_svd(self):
        A = make_generator(10).standard_normal((2, 4))
        A[1] = A[0]
        result = gram_det(A)
        assert result.method == "svd-fallback"
        assert abs(result.value) < 1e-20

    def test_zero_row_is_singular(self):
        A = make_generator(10).standard_normal((2, 4))
        A[1] = 0.0
        result = gram_det(A)
        assert result.method == "svd-fallback"
        assert result.value == 0.0

    def test_rejects_tall_matrix(self):
        with pytest.raises(DimensionMismatchError):
            gram_det(np.ones((3, 2)))


@pytest.mark.unit
class TestAdjugate:
    """Test the adjugate of positive-definite matrices."""

    def test_matches_signed_minors(self):
        B = make_generator(11).standard_normal((4, 6))
        S = B @ B.T
        adj = adjugate(S)
        scale = float(np.max(np.abs(adj)))
        for i in range(4):
            for j in range(4):
                expected = (-1) ** (i + j) * minor(S, j, i)
                assert adj[i, j] == pytest.approx(expected, rel=1e-8, abs=1e-10 * scale)

    def test_one_by_one(self):
        np.testing.assert_allclose(adjugate(np.array([[5.0]])), [[1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            adjugate(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_singular(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            adjugate(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(NotPositiveSemidefiniteError, match="symmetric"):
            adjugate(np.array([[2.0, 1.0], [0.0, 2.0]]))


@pytest.mark.unit
class TestAppendColumnIdentity:
    """Test det BB^T = det AA^T + a^T adj(AA^T) a."""

    @pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (3, 3), (4, 7), (5, 8)])
    def test_identity_holds(self, n, m):
        rng = make_generator(12, n * 10 + m)
        A = rng.standard_normal((n, m))
        a = rng.standard_normal(n)
        check = append_column_identity_check(A, a)
        assert abs(check.gap) <= 1e-8 * max(1.0, abs(check.lhs))
        assert check.lhs >= -1e-10

    def test_zero_column_adds_nothing(self):
        A = make_generator(13).standard_normal((3, 4))
        check = append_column_identity_check(A, np.zeros(3))
        assert check.rhs == 0.0
        assert abs(check.lhs) <= 1e-10 * gram_det(A).value

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            append_column_identity_check(np.eye(2), np.ones(3))

    def test_singular_gram_rejected(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            append_column_identity_check(np.ones((2, 3)), np.ones(2))


@pytest.mark.unit
class TestComplexGaussian:
    """Test complex Gaussian sampling and det(M M*)."""

    def test_shapes(self):
        rng = make_generator(0)
        assert sample_complex_gaussian(3, rng).shape == (3, 3)
        batch = sample_complex_gaussian(2, rng, count=5)
        assert batch.shape == (5, 2, 2)
        assert np.iscomplexobj(batch)

    def test_unknown_convention(self):
        with pytest.raises(ValueError, match="convention"):
            sample_complex_gaussian(2, make_generator(0), convention="bogus")

    def test_scalar_case(self):
        """For n = 1, det(M M*) = |m|^2 = var * (z1^2 + z2^2)."""
        z = make_generator(4, 9).standard_normal((2, 1, 1))
        expected = 0.5 * float(z[0, 0, 0] ** 2 + z[1, 0, 0] ** 2)
        assert complex_gaussian_det(1, 4, stream=9).value == pytest.approx(expected, rel=1e-12)
        assert complex_gaussian_det(1, 4, "unit-per-part", 9).value == pytest.approx(
            2 * expected, rel=1e-12
        )

    def test_matches_direct_product(self):
        M = sample_complex_gaussian(3, make_generator(5, 1))
        direct = np.linalg.det(M @ M.conj().T).real
        result = complex_gaussian_det(3, 5, stream=1)
        assert result.sign == 1
        assert result.value == pytest.approx(direct, rel=1e-10)
        assert result.log_abs_det == pytest.approx(math.log(direct), abs=1e-10)

    def test_deterministic(self):
        first = complex_gaussian_det(2, 1, stream=3)
        assert first.log_abs_det == complex_gaussian_det(2, 1, stream=3).log_abs_det
        assert first.log_abs_det != complex_gaussian_det(2, 1, stream=4).log_abs_det

    def test_large_order_keeps_log_magnitude(self):
        """det(M M*) overflows a float near n = 300 while its log does not."""
        result = complex_gaussian_det(300, seed=1)
        assert math.isfinite(result.log_abs_det)
        assert result.log_abs_det > 709.0
        assert result.det is None
        assert result.value == math.inf

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            complex_gaussian_det(0, 1)


@pytest.mark.unit
class TestBatchKernels:
    """Test the vectorized kernels used by the Monte Carlo loop."""

    def test_batch_square(self):
        mats = make_generator(20).standard_normal((6, 3, 3))
        mats[2] = 0.0
        logs = batch_log_abs_det(mats)
        assert logs[2] == -np.inf
        for i in (0, 1, 3):
            assert logs[i] == pytest.approx(square_det(mats[i]).log_abs_det, rel=1e-12)

    @pytest.mark.parametrize("m", [4, 70])
    def test_batch_gram(self, m):
        mats = make_generator(21).standard_normal((3, 2, m))
        logs = batch_gram_log_det(mats)
        for i in range(3):
            assert logs[i] == pytest.approx(gram_det(mats[i]).log_abs_det, rel=1e-10)

    def test_batch_gram_rejects_tall(self):
        with pytest.raises(DimensionMismatchError):
            batch_gram_log_det(np.ones((1, 3, 2)))

    def test_batch_complex(self):
        mats = sample_complex_gaussian(3, make_generator(22), count=4)
        mats[1] = 0.0
        logs = batch_complex_log_det(mats)
        assert logs[1] == -np.inf
        for i in (0, 2, 3):
            direct = np.linalg.det(mats[i] @ mats[i].conj().T).real
            assert logs[i] == pytest.approx(math.log(direct), abs=1e-10)


@pytest.mark.unit
class TestMatrixText:
    """Test the whitespace matrix format."""

    def test_write_then_read(self, tmp_path):
        M = make_generator(30).standard_normal((2, 3))
        path = tmp_path / "a.txt"
        write_matrix_text(path, M)
        assert path.read_text().splitlines()[0] == "2 3"
        np.testing.assert_array_equal(read_matrix_text(path), M)

    def test_short_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2\n1 2\n3\n")
        with pytest.raises(SpecFileError) as excinfo:
            read_matrix_text(path)
        assert excinfo.value.line == 3

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 1\n1\n2\n")
        with pytest.raises(SpecFileError, match="Expected 3 rows"):
            read_matrix_text(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(SpecFileError, match="Empty"):
            read_matrix_text(path)


@pytest.mark.unit
class TestGramResult:
    def test_from_log_singular(self):
        result = GramResult.from_log(0, 5.0, "lu")
        assert result.det == 0.0 and result.log_abs_det == -math.inf
