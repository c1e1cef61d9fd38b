#!/usr/bin/env python3
"""
Determinant engine for SMALLDET.

Square and Gram determinants carried as (sign, log-magnitude) pairs, the
adjugate of a positive-definite matrix and the column-append identity
det BB^T = det AA^T + a^T adj(AA^T) a for B = [A | a].
"""
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as la

from .errors import DimensionMismatchError, NotPositiveSemidefiniteError, SpecFileError
from .streams import make_generator

logger = logging.getLogger(__name__)

# Cholesky pivots below PIVOT_RTOL * trace trigger the SVD fallback
PIVOT_RTOL = 1e-12
# Gram matrices are formed explicitly up to this many columns, QR beyond
GRAM_EXPLICIT_MAX_COLS = 64

COMPLEX_CONVENTIONS = {
    # real and imaginary parts each with variance 1/2: E|m_ij|^2 = 1
    "unit-complex": 0.5,
    # real and imaginary parts each with variance 1: E|m_ij|^2 = 2
    "unit-per-part": 1.0,
}

_MAX_LOG = math.log(np.finfo(float).max)
_MIN_LOG = math.log(np.finfo(float).tiny)


@dataclass(frozen=True)
class GramResult:
    """
    Determinant as sign and log-magnitude.

    det is None when the value is not representable as a float; sign 0 means
    the matrix is singular and log_abs_det is -inf.
    """

    det: Optional[float]
    log_abs_det: float
    sign: int
    method: str

    @classmethod
    def from_log(cls, sign: int, log_abs_det: float, method: str) -> "GramResult":
        if sign == 0:
            return cls(det=0.0, log_abs_det=-math.inf, sign=0, method=method)
        if log_abs_det > _MAX_LOG or log_abs_det < _MIN_LOG:
            det: Optional[float] = None
        else:
            det = sign * math.exp(log_abs_det)
        return cls(det=det, log_abs_det=log_abs_det, sign=sign, method=method)

    @property
    def value(self) -> float:
        """Determinant as a float, saturating to 0 or inf outside the float range."""
        if self.det is not None:
            return self.det
        return self.sign * (math.inf if self.log_abs_det > 0 else 0.0)


def _as_matrix(M: np.ndarray, name: str = "M") -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {M.shape}")
    return M


def _lu_slogdet(M: np.ndarray) -> Tuple[complex, float]:
    """Sign (unit modulus, 0 if singular) and log|det| via partially pivoted LU."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(M, check_finite=True)
    diag = np.diag(lu)
    if np.any(diag == 0):
        return 0.0, -math.inf
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    phase = np.prod(diag / np.abs(diag)) * (-1.0) ** swaps
    return phase, float(np.sum(np.log(np.abs(diag))))


def square_det(M: np.ndarray) -> GramResult:
    """
    Determinant of a square real matrix via LU with partial pivoting.

    Args:
        M: (n x n) real matrix, n >= 1

    Returns:
        GramResult with method "lu"; exactly singular input gives sign 0
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"square_det needs a non-empty square matrix, got {M.shape}")

    phase, log_abs = _lu_slogdet(M.astype(float))
    sign = 0 if phase == 0 else int(np.sign(np.real(phase)))
    return GramResult.from_log(sign, log_abs, "lu")


def _gram_svd(A: np.ndarray) -> GramResult:
    s = la.svd(A, compute_uv=False)
    if s.size == 0 or s[-1] <= max(A.shape) * np.finfo(float).eps * s[0]:
        return GramResult.from_log(0, -math.inf, "svd-fallback")
    return GramResult.from_log(1, 2.0 * float(np.sum(np.log(s))), "svd-fallback")


def gram_det(A: np.ndarray) -> GramResult:
    """
    Gram determinant det(A A^T) of an (n x m) matrix with n <= m.

    Forms A A^T and factors it by Cholesky for m <= 64; wider matrices use the
    R factor of A^T (det = prod R_ii^2). A failed factorization or a pivot
    below 1e-12 * trace falls back to singular values.

    Raises:
        DimensionMismatchError: If n > m
    """
    A = _as_matrix(A, "A").astype(float)
    n, m = A.shape
    if n > m:
        raise DimensionMismatchError(f"gram_det needs n <= m, got {n}x{m}")
    if n == 0:
        return GramResult.from_log(1, 0.0, "cholesky")

    if m <= GRAM_EXPLICIT_MAX_COLS:
        gram = A @ A.T
        threshold = PIVOT_RTOL * float(np.trace(gram))
        try:
            L = la.cholesky(gram, lower=True)
            pivots = np.diag(L)
            if np.all(pivots * pivots > threshold):
                return GramResult.from_log(
                    1, 2.0 * float(np.sum(np.log(pivots))), "cholesky"
                )
        except la.LinAlgError:
            pass
    else:
        R = la.qr(A.T, mode="r")[0][:n, :n]
        pivots = np.abs(np.diag(R))
        threshold = PIVOT_RTOL * float(np.sum(A * A))
        if np.all(pivots * pivots > threshold):
            return GramResult.from_log(1, 2.0 * float(np.sum(np.log(pivots))), "qr")

    logger.warning(f"Gram factorization degenerate for {n}x{m}; using SVD")
    return _gram_svd(A)


def adjugate(S: np.ndarray) -> np.ndarray:
    """
    Adjugate det(S) S^-1 of a symmetric positive-definite matrix.

    Entry (i, j) equals (-1)^(i+j) times the minor of S with row j and
    column i deleted.

    Raises:
        NotPositiveSemidefiniteError: If S is not symmetric positive definite
    """
    S = _as_matrix(S, "S").astype(float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError(f"adjugate needs a square matrix, got {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > 1e-12 * scale:
        raise NotPositiveSemidefiniteError("adjugate input is not symmetric")

    try:
        factor = la.cho_factor(S, lower=True)
    except la.LinAlgError:
        raise NotPositiveSemidefiniteError(
            "adjugate input is not positive definite"
        ) from None
    pivots = np.diag(factor[0])
    if np.any(pivots * pivots <= PIVOT_RTOL * float(np.trace(S))):
        raise NotPositiveSemidefiniteError(
            "adjugate input is numerically singular"
        )

    det = float(np.prod(pivots * pivots))
    inverse = la.cho_solve(factor, np.eye(n))
    adj = det * inverse
    return 0.5 * (adj + adj.T)


@dataclass(frozen=True)
class IdentityCheck:
    """Both sides of det BB^T - det AA^T = a^T adj(AA^T) a."""

    lhs: float
    rhs: float
    gap: float


def append_column_identity_check(A: np.ndarray, a: np.ndarray) -> IdentityCheck:
    """
    Compare the growth of the Gram determinant when column a is appended.

    Args:
        A: (n x m) matrix with n <= m and positive-definite A A^T
        a: Column of length n

    Returns:
        IdentityCheck with lhs = gram_det([A|a]) - gram_det(A),
        rhs = a^T adj(A A^T) a and gap = lhs - rhs

    Raises:
        NotPositiveSemidefiniteError: If A A^T is not positive definite
    """
    A = _as_matrix(A, "A").astype(float)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"Column length {a.shape[0]} does not match {A.shape[0]} rows"
        )

    B = np.column_stack([A, a])
    lhs = gram_det(B).value - gram_det(A).value
    rhs = float(a @ adjugate(A @ A.T) @ a)
    return IdentityCheck(lhs=lhs, rhs=rhs, gap=lhs - rhs)


def sample_complex_gaussian(
    n: int,
    rng: np.random.Generator,
    count: Optional[int] = None,
    convention: str = "unit-complex",
) -> np.ndarray:
    """
    Matrices with independent complex Gaussian entries.

    Args:
        n: Matrix order
        rng: Source of randomness
        count: Batch size; None returns a single (n x n) matrix
        convention: Key of COMPLEX_CONVENTIONS

    Returns:
        Complex array of shape (n, n) or (count, n, n)
    """
    if convention not in COMPLEX_CONVENTIONS:
        raise ValueError(
            f"Unknown complex convention '{convention}'. "
            f"Expected one of: {', '.join(COMPLEX_CONVENTIONS)}"
        )
    shape: Tuple[int, ...] = (n, n) if count is None else (count, n, n)
    std = math.sqrt(COMPLEX_CONVENTIONS[convention])
    parts = rng.standard_normal((2,) + shape)
    return std * (parts[0] + 1j * parts[1])


def complex_gaussian_det(
    n: int,
    seed: int,
    convention: str = "unit-complex",
    stream: Optional[int] = None,
) -> GramResult:
    """
    One draw of det(M M*) for an (n x n) standard complex Gaussian M.

    det(M M*) = |det M|^2, evaluated from the complex LU factorization in
    log-magnitude form. For large n the value leaves the float range while
    log_abs_det stays finite; det is then None.
    """
    if n < 1:
        raise ValueError(f"Matrix order must be positive, got {n}")
    M = sample_complex_gaussian(n, make_generator(seed, stream), convention=convention)
    phase, log_abs = _lu_slogdet(M)
    if phase == 0:
        return GramResult.from_log(0, -math.inf, "lu")
    return GramResult.from_log(1, 2.0 * log_abs, "lu")


def batch_complex_log_det(mats: np.ndarray) -> np.ndarray:
    """log det(M M*) = 2 log|det M| of a stack of complex matrices, -inf where singular."""
    sign, logabs = np.linalg.slogdet(mats)
    return np.where(sign == 0, -np.inf, 2.0 * logabs)


def batch_log_abs_det(mats: np.ndarray) -> np.ndarray:
    """log|det| of a stack of square matrices, -inf where singular."""
    sign, logabs = np.linalg.slogdet(mats)
    return np.where(sign == 0, -np.inf, logabs)


def batch_gram_log_det(mats: np.ndarray) -> np.ndarray:
    """log det(A A^T) of a stack of (n x m) matrices, -inf where singular."""
    n, m = mats.shape[-2:]
    if n > m:
        raise DimensionMismatchError(f"Gram determinant needs n <= m, got {n}x{m}")
    if m <= GRAM_EXPLICIT_MAX_COLS:
        return batch_log_abs_det(mats @ np.swapaxes(mats, -1, -2))
    R = np.linalg.qr(np.swapaxes(mats, -1, -2), mode="r")
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    with np.errstate(divide="ignore"):
        return 2.0 * np.sum(np.log(diag), axis=-1)


def read_matrix_text(path: Union[str, Path]) -> np.ndarray:
    """
    Read a matrix in the whitespace text format: "n m" then n rows.

    Raises:
        SpecFileError: On malformed content, with the offending line number
    """
    path = Path(path)
    with open(path, "r") as f:
        numbered = [
            (lineno, line.split())
            for lineno, line in enumerate(f, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    if not numbered:
        raise SpecFileError("Empty matrix file", path)

    header_line, header = numbered[0]
    try:
        n, m = (int(x) for x in header)
    except ValueError:
        raise SpecFileError("Header must be two integers 'n m'", path, header_line) from None
    if len(numbered) - 1 != n:
        raise SpecFileError(
            f"Expected {n} rows, found {len(numbered) - 1}", path, numbered[-1][0]
        )

    matrix = np.empty((n, m), dtype=float)
    for row, (lineno, tokens) in enumerate(numbered[1:]):
        if len(tokens) != m:
            raise SpecFileError(
                f"Row must have {m} values, found {len(tokens)}", path, lineno
            )
        try:
            matrix[row] = [float(x) for x in tokens]
        except ValueError:
            raise SpecFileError("Non-numeric matrix value", path, lineno) from None
    return matrix


def write_matrix_text(path: Union[str, Path], matrix: np.ndarray) -> None:
    """Write a real matrix in the whitespace text format."""
    matrix = _as_matrix(matrix, "matrix")
    lines = [f"{matrix.shape[0]} {matrix.shape[1]}"]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in matrix)
    Path(path).write_text("\n".join(lines) + "\n")
