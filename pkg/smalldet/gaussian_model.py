#!/usr/bin/env python3
"""
Joint Gaussian law of the entry array for SMALLDET.

Defines the covariance models over matrix entries, the canonical conditioning
order of entries, the conditional residual variances d_k and seeded sampling
of entry matrices.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from .errors import (
    CorollaryHypothesisError,
    DimensionMismatchError,
    NotPositiveSemidefiniteError,
    SpecFileError,
    UsageError,
)
from .streams import make_generator

logger = logging.getLogger(__name__)

# Singular values below RANK_RTOL * largest are treated as zero in regressions
RANK_RTOL = 1e-10
# Residual variances within this relative distance of zero are exactly zero
RESIDUAL_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12
FACTOR_RTOL = 1e-8

COVARIANCE_KINDS = ("iid", "diagonal", "equicorrelated", "ar1", "dense")
_KIND_ALIASES = {"diagonal-scaled": "diagonal", "diag": "diagonal"}


@dataclass(frozen=True, order=True)
class EntryIndex:
    """1-based position (row, col) of an entry tau_ij."""

    row: int
    col: int

    def __post_init__(self) -> None:
        if self.row < 1 or self.col < 1:
            raise ValueError(f"Entry indices are 1-based, got ({self.row}, {self.col})")

    @property
    def level(self) -> int:
        """Conditioning level min(row, col)."""
        return min(self.row, self.col)

    @property
    def is_diagonal(self) -> bool:
        return self.row == self.col

    def conditions(self, k: int) -> bool:
        """True if the entry belongs to the conditioning set of (k, k)."""
        return self.level < k


@dataclass(frozen=True)
class EntryOrdering:
    """Canonical enumeration of the entries of an n x m matrix."""

    n: int
    m: int
    entries: Tuple[EntryIndex, ...]
    _positions: Dict[EntryIndex, int] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_positions", {entry: i for i, entry in enumerate(self.entries)}
        )

    def __len__(self) -> int:
        return len(self.entries)

    def position(self, entry: EntryIndex) -> int:
        """Index of an entry in the ordering."""
        try:
            return self._positions[entry]
        except KeyError:
            raise KeyError(
                f"Entry ({entry.row}, {entry.col}) is not part of a "
                f"{self.n}x{self.m} ordering"
            ) from None

    def diagonal_position(self, k: int) -> int:
        return self.position(EntryIndex(k, k))

    def conditioning_positions(self, k: int) -> List[int]:
        """Positions of all entries with min(i, j) < k."""
        return [i for i, entry in enumerate(self.entries) if entry.conditions(k)]

    def rows(self) -> np.ndarray:
        """0-based row index of each position."""
        return np.fromiter((e.row - 1 for e in self.entries), dtype=np.intp)

    def cols(self) -> np.ndarray:
        """0-based column index of each position."""
        return np.fromiter((e.col - 1 for e in self.entries), dtype=np.intp)


def build_ordering(n: int, m: Optional[int] = None) -> EntryOrdering:
    """
    Enumerate the entries of an n x m matrix in conditioning order.

    Entries are grouped by level min(i, j); within a level the diagonal entry
    comes first, followed by the remaining entries in row-major order. Every
    entry with min(i, j) < k therefore precedes (k, k).

    Args:
        n: Matrix order (rows)
        m: Column count, defaults to n

    Returns:
        Deterministic EntryOrdering for (n, m)

    Raises:
        UsageError: If n < 1 or n > m
    """
    if m is None:
        m = n
    if n < 1 or m < 1:
        raise UsageError(f"Dimensions must be positive, got n={n}, m={m}")
    if n > m:
        raise UsageError(f"Need n <= m, got n={n}, m={m}")

    all_entries = [EntryIndex(i, j) for i in range(1, n + 1) for j in range(1, m + 1)]
    ordered = sorted(
        all_entries, key=lambda e: (e.level, not e.is_diagonal, e.row, e.col)
    )
    return EntryOrdering(n=n, m=m, entries=tuple(ordered))


@dataclass(frozen=True, eq=False)
class DenseCovariance:
    """Covariance matrix over an explicit entry list, as read from a file."""

    n: int
    m: int
    entries: Tuple[EntryIndex, ...]
    matrix: np.ndarray
    path: Optional[str] = None

    def digest(self) -> str:
        """Content hash used to tell dense specs apart in experiment descriptors."""
        h = hashlib.sha256()
        h.update(f"{self.n} {self.m}".encode())
        for entry in self.entries:
            h.update(f" {entry.row},{entry.col}".encode())
        h.update(np.ascontiguousarray(self.matrix, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class CovarianceSpec:
    """
    Covariance model over matrix-entry indices.

    Kinds:
        iid            - identity covariance
        diagonal       - tau_kk ~ N(0, sigma_k^2) independent, off-diagonal entries zero
        equicorrelated - (1 - rho) I + rho J over all entries
        ar1            - Cov(tau_ij, tau_kl) = rho^|i-k| * rho^|j-l|
        dense          - explicit matrix read from a covariance file
    """

    kind: str
    rho: float = 0.0
    sigmas: Tuple[float, ...] = ()
    dense: Optional[DenseCovariance] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in COVARIANCE_KINDS:
            raise UsageError(
                f"Unknown covariance kind '{self.kind}'. "
                f"Expected one of: {', '.join(COVARIANCE_KINDS)}"
            )
        if kind in ("equicorrelated", "ar1") and not -1.0 <= self.rho <= 1.0:
            raise UsageError(f"rho must lie in [-1, 1], got {self.rho}")
        if kind == "ar1" and abs(self.rho) >= 1.0:
            raise UsageError(f"ar1 needs |rho| < 1, got {self.rho}")
        if kind == "diagonal":
            sigmas = tuple(float(s) for s in self.sigmas) or (1.0,)
            if any(s < 0 for s in sigmas):
                raise UsageError(f"sigma values must be non-negative, got {sigmas}")
            object.__setattr__(self, "sigmas", sigmas)
        if kind == "dense" and self.dense is None:
            raise UsageError("Dense covariance spec needs a covariance file")

    @classmethod
    def iid(cls) -> "CovarianceSpec":
        return cls("iid")

    @classmethod
    def diagonal(cls, sigmas: Sequence[float] = (1.0,)) -> "CovarianceSpec":
        return cls("diagonal", sigmas=tuple(sigmas))

    @classmethod
    def equicorrelated(cls, rho: float) -> "CovarianceSpec":
        return cls("equicorrelated", rho=rho)

    @classmethod
    def ar1(cls, rho: float) -> "CovarianceSpec":
        return cls("ar1", rho=rho)

    @classmethod
    def from_dense_file(cls, path: Union[str, Path]) -> "CovarianceSpec":
        return cls("dense", dense=read_dense_covariance(path))

    @classmethod
    def parse(cls, text: str) -> "CovarianceSpec":
        """
        Parse the command-line spec syntax.

        Accepted forms: "iid", "kind=equicorrelated rho=0.5",
        "kind=diagonal sigma=1,2,3", "kind=ar1 rho=0.3", "dense=path/to/file".

        Raises:
            UsageError: On unknown keys or malformed values
        """
        tokens = text.replace(";", " ").split()
        if not tokens:
            raise UsageError("Empty covariance spec")

        params: Dict[str, str] = {}
        for token in tokens:
            if "=" not in token:
                if "kind" in params:
                    raise UsageError(f"Unexpected token '{token}' in spec '{text}'")
                params["kind"] = token
                continue
            key, value = token.split("=", 1)
            params[key.strip().lower()] = value.strip()
        return cls.from_mapping(params)

    @classmethod
    def from_mapping(cls, params: Mapping[str, Any]) -> "CovarianceSpec":
        """Build a spec from a mapping such as a JSON config entry."""
        params = dict(params)
        if "dense" in params:
            path = params.pop("dense")
            params.pop("kind", None)
            if params:
                raise UsageError(f"Unknown spec keys for dense spec: {sorted(params)}")
            return cls.from_dense_file(path)

        kind = str(params.pop("kind", "iid"))
        rho = params.pop("rho", 0.0)
        sigma = params.pop("sigma", params.pop("sigmas", None))
        if params:
            raise UsageError(f"Unknown spec keys: {sorted(params)}")

        try:
            rho_value = float(rho)
            if sigma is None:
                sigmas: Tuple[float, ...] = ()
            elif isinstance(sigma, str):
                sigmas = tuple(float(s) for s in sigma.split(",") if s)
            elif isinstance(sigma, (int, float)):
                sigmas = (float(sigma),)
            else:
                sigmas = tuple(float(s) for s in sigma)
        except (TypeError, ValueError) as e:
            raise UsageError(f"Malformed spec parameter: {e}") from e

        return cls(kind, rho=rho_value, sigmas=sigmas)

    def describe(self) -> Dict[str, Any]:
        """JSON-ready parameters identifying this spec."""
        description: Dict[str, Any] = {"kind": self.kind}
        if self.kind in ("equicorrelated", "ar1"):
            description["rho"] = self.rho
        elif self.kind == "diagonal":
            description["sigma"] = list(self.sigmas)
        elif self.kind == "dense" and self.dense is not None:
            description["dense_digest"] = self.dense.digest()
        return description

    def label(self) -> str:
        """Short human-readable form, e.g. 'equicorrelated(rho=0.3)'."""
        if self.kind in ("equicorrelated", "ar1"):
            return f"{self.kind}(rho={self.rho:g})"
        if self.kind == "diagonal":
            return "diagonal(sigma=" + ",".join(f"{s:g}" for s in self.sigmas) + ")"
        if self.kind == "dense" and self.dense is not None:
            return f"dense({self.dense.path or self.dense.digest()})"
        return self.kind


@dataclass(frozen=True)
class DValues:
    """Conditional residual variances d_1..d_n and the eps_0 divisor."""

    values: Tuple[float, ...]
    n: int
    m: int
    epsilon0_scale: float = field(init=False)

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.values):
            raise ValueError(f"Residual variances must be non-negative: {self.values}")
        scale = float(np.prod(np.sqrt(np.asarray(self.values, dtype=float))))
        object.__setattr__(self, "epsilon0_scale", scale)

    @property
    def all_positive(self) -> bool:
        return all(v > 0 for v in self.values)

    def zero_indices(self) -> List[int]:
        """1-based k with d_k = 0."""
        return [k for k, v in enumerate(self.values, start=1) if v == 0.0]

    def rescale(self, eps: float) -> float:
        """
        eps_0 = eps / prod d_k^(1/2).

        Raises:
            CorollaryHypothesisError: If some d_k = 0
        """
        zeros = self.zero_indices()
        if zeros:
            raise CorollaryHypothesisError(
                f"Corollary hypothesis violated: d_k = 0 for k in {zeros}"
            )
        return eps / self.epsilon0_scale


@dataclass(frozen=True, eq=False)
class SampledMatrix:
    """One draw of the n x m entry matrix."""

    n: int
    m: int
    values: np.ndarray
    seed: int
    stream: Optional[int] = None


def read_dense_covariance(path: Union[str, Path]) -> DenseCovariance:
    """
    Read a dense covariance file.

    Format: first line "n m p" with p = n*m, then p lines "i j" giving the
    entry order, then p lines of p whitespace-separated reals. Blank lines and
    lines starting with '#' are ignored.

    Raises:
        SpecFileError: On malformed content, with the offending line number
        OSError: If the file cannot be read
    """
    path = Path(path)
    logger.info(f"Reading dense covariance from {path}")
    with open(path, "r") as f:
        numbered = [
            (lineno, line.split())
            for lineno, line in enumerate(f, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]

    if not numbered:
        raise SpecFileError("Empty covariance file", path)

    header_line, header = numbered[0]
    try:
        n, m, p = (int(x) for x in header)
    except ValueError:
        raise SpecFileError(
            "Header must be three integers 'n m p'", path, header_line
        ) from None
    if n < 1 or m < n:
        raise SpecFileError(f"Need 1 <= n <= m, got n={n}, m={m}", path, header_line)
    if p != n * m:
        raise SpecFileError(f"p must equal n*m = {n * m}, got {p}", path, header_line)
    if len(numbered) != 1 + 2 * p:
        last = numbered[-1][0]
        raise SpecFileError(
            f"Expected {2 * p} lines after the header, found {len(numbered) - 1}",
            path,
            last,
        )

    entries: List[EntryIndex] = []
    for lineno, tokens in numbered[1 : 1 + p]:
        try:
            i, j = (int(x) for x in tokens)
            entry = EntryIndex(i, j)
        except ValueError:
            raise SpecFileError("Expected entry index 'i j'", path, lineno) from None
        if entry.row > n or entry.col > m:
            raise SpecFileError(
                f"Entry ({entry.row}, {entry.col}) outside {n}x{m}", path, lineno
            )
        if entry in entries:
            raise SpecFileError(
                f"Duplicate entry ({entry.row}, {entry.col})", path, lineno
            )
        entries.append(entry)

    matrix = np.empty((p, p), dtype=float)
    for row, (lineno, tokens) in enumerate(numbered[1 + p :]):
        if len(tokens) != p:
            raise SpecFileError(
                f"Covariance row must have {p} values, found {len(tokens)}",
                path,
                lineno,
            )
        try:
            matrix[row] = [float(x) for x in tokens]
        except ValueError:
            raise SpecFileError("Non-numeric covariance value", path, lineno) from None

    return DenseCovariance(
        n=n, m=m, entries=tuple(entries), matrix=matrix, path=str(path)
    )


def write_dense_covariance(
    path: Union[str, Path], ordering: EntryOrdering, matrix: np.ndarray
) -> None:
    """Write a covariance matrix over an ordering in the dense file format."""
    matrix = np.asarray(matrix, dtype=float)
    p = len(ordering)
    if matrix.shape != (p, p):
        raise DimensionMismatchError(
            f"Matrix shape {matrix.shape} does not match ordering size {p}"
        )
    lines = [f"{ordering.n} {ordering.m} {p}"]
    lines.extend(f"{e.row} {e.col}" for e in ordering.entries)
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in matrix)
    Path(path).write_text("\n".join(lines) + "\n")


def _named_covariance(spec: CovarianceSpec, ordering: EntryOrdering) -> np.ndarray:
    p = len(ordering)
    if spec.kind == "iid":
        return np.eye(p)

    if spec.kind == "diagonal":
        variances = np.zeros(p)
        for pos, entry in enumerate(ordering.entries):
            if entry.is_diagonal:
                sigma = spec.sigmas[min(entry.row, len(spec.sigmas)) - 1]
                variances[pos] = sigma * sigma
        return np.diag(variances)

    if spec.kind == "equicorrelated":
        if p > 1 and spec.rho < -1.0 / (p - 1):
            raise NotPositiveSemidefiniteError(
                f"equicorrelated rho={spec.rho} is not PSD for {p} entries "
                f"(needs rho >= {-1.0 / (p - 1):.6g})"
            )
        return (1.0 - spec.rho) * np.eye(p) + spec.rho * np.ones((p, p))

    # ar1: separable in row and column distance
    rows = ordering.rows()
    cols = ordering.cols()
    distance = np.abs(rows[:, None] - rows[None, :]) + np.abs(
        cols[:, None] - cols[None, :]
    )
    return np.power(spec.rho, distance.astype(float))


def _dense_covariance(dense: DenseCovariance, ordering: EntryOrdering) -> np.ndarray:
    file_positions = {entry: i for i, entry in enumerate(dense.entries)}
    missing = [e for e in ordering.entries if e not in file_positions]
    if missing:
        first = missing[0]
        raise DimensionMismatchError(
            f"Dense covariance ({dense.n}x{dense.m}) does not cover a "
            f"{ordering.n}x{ordering.m} ordering; missing entry "
            f"({first.row}, {first.col})"
        )
    index = np.array([file_positions[e] for e in ordering.entries], dtype=np.intp)
    return dense.matrix[np.ix_(index, index)]


def factor_covariance(cov: np.ndarray) -> np.ndarray:
    """
    Symmetric factor F with cov = F F^T.

    Tries a plain Cholesky factorization first; semidefinite matrices fall back
    to LAPACK pivoted Cholesky with the trailing block beyond the detected rank
    set to zero.

    Raises:
        NotPositiveSemidefiniteError: If neither factorization reproduces cov
    """
    cov = np.asarray(cov, dtype=float)
    p = cov.shape[0]
    if p == 0:
        return np.zeros((0, 0))

    try:
        return la.cholesky(cov, lower=True)
    except la.LinAlgError:
        logger.debug("Cholesky failed, retrying with pivoted factorization")

    c, piv, rank, info = lapack.dpstrf(cov, tol=-1.0, lower=1)
    if info < 0:
        raise NotPositiveSemidefiniteError(
            f"Pivoted Cholesky rejected argument {-info}"
        )
    lower = np.tril(c)
    lower[:, rank:] = 0.0
    factor = np.zeros_like(lower)
    factor[piv - 1, :] = lower

    scale = max(1.0, float(np.max(np.abs(np.diag(cov)))))
    residual = float(np.max(np.abs(factor @ factor.T - cov)))
    if residual > FACTOR_RTOL * scale:
        raise NotPositiveSemidefiniteError(
            f"Covariance is not positive semidefinite "
            f"(factorization residual {residual:.3g})"
        )
    logger.info(f"Covariance is singular (rank {rank} of {p}); using pivoted factor")
    return factor


@dataclass(frozen=True, eq=False)
class FactoredCovariance:
    """Covariance of the entry vector together with a factor, cov = F F^T."""

    cov: np.ndarray
    factor: np.ndarray


def factored_covariance(spec: CovarianceSpec, ordering: EntryOrdering) -> FactoredCovariance:
    """
    Covariance matrix of the entry vector in ordering order, with its factor.

    The factorization doubles as the PSD check, so callers that sample
    should take the factor from here instead of factoring again.

    Raises:
        NotPositiveSemidefiniteError: If the matrix is asymmetric or not PSD
        DimensionMismatchError: If a dense spec does not cover the ordering
    """
    if spec.kind == "dense":
        assert spec.dense is not None
        cov = _dense_covariance(spec.dense, ordering)
    else:
        cov = _named_covariance(spec, ordering)

    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise NotPositiveSemidefiniteError("Covariance matrix is not symmetric")
    return FactoredCovariance(cov=cov, factor=factor_covariance(cov))


def materialize_covariance(spec: CovarianceSpec, ordering: EntryOrdering) -> np.ndarray:
    """
    Covariance matrix of the entry vector in ordering order.

    Args:
        spec: Covariance model
        ordering: Entry enumeration

    Returns:
        Symmetric positive semidefinite (p x p) matrix, p = len(ordering)

    Raises:
        NotPositiveSemidefiniteError: If the matrix is asymmetric or not PSD
        DimensionMismatchError: If a dense spec does not cover the ordering
    """
    return factored_covariance(spec, ordering).cov


def _residual_variance(cov: np.ndarray, target: int, given: Sequence[int]) -> float:
    variance = float(cov[target, target])
    if not given:
        return variance
    idx = np.asarray(given, dtype=np.intp)
    sigma = cov[np.ix_(idx, idx)]
    cross = cov[idx, target]
    if not np.any(cross):
        return variance
    explained = float(cross @ la.pinvh(sigma, rtol=RANK_RTOL) @ cross)
    return variance - explained


def compute_d_values(
    spec: CovarianceSpec, n: int, m: Optional[int] = None
) -> DValues:
    """
    Conditional residual variances d_k.

    d_k is the variance left after linearly regressing tau_kk on every entry
    tau_ij with min(i, j) < k, j <= m: the Schur complement
    Var(tau_kk) - c^T Sigma^+ c.

    Args:
        spec: Covariance model
        n: Matrix order
        m: Column count (defaults to n)

    Returns:
        DValues for k = 1..n

    Raises:
        NotPositiveSemidefiniteError: If the covariance is not PSD or a
            residual comes out clearly negative
    """
    ordering = build_ordering(n, m)
    d = d_values_from_covariance(materialize_covariance(spec, ordering), ordering)
    logger.info(f"Computed d-values for {spec.label()} n={n} m={ordering.m}: {list(d.values)}")
    return d


def d_values_from_covariance(cov: np.ndarray, ordering: EntryOrdering) -> DValues:
    """d_k from an already materialized covariance in ordering order."""
    n = ordering.n
    values: List[float] = []
    for k in range(1, n + 1):
        target = ordering.diagonal_position(k)
        residual = _residual_variance(cov, target, ordering.conditioning_positions(k))
        tol = RESIDUAL_RTOL * max(1.0, float(cov[target, target]))
        if residual < -tol:
            raise NotPositiveSemidefiniteError(
                f"Negative residual variance d_{k} = {residual:.3g}"
            )
        if abs(residual) <= tol:
            if residual != 0.0:
                logger.debug(f"Snapping d_{k} = {residual:.3g} to zero")
            residual = 0.0
        values.append(residual)

    return DValues(values=tuple(values), n=n, m=ordering.m)


def d_values_stabilization(
    spec: CovarianceSpec, n: int, m_values: Iterable[int]
) -> List[DValues]:
    """d_k for a sequence of column counts, to watch the n x inf limit settle."""
    return [compute_d_values(spec, n, m) for m in m_values]


def scatter_entries(values: np.ndarray, ordering: EntryOrdering) -> np.ndarray:
    """
    Place entry vectors (..., p) into matrices (..., n, m).

    Args:
        values: Array whose last axis follows the ordering
        ordering: Entry enumeration

    Returns:
        Array of shape values.shape[:-1] + (n, m)
    """
    values = np.asarray(values)
    out = np.zeros(values.shape[:-1] + (ordering.n, ordering.m), dtype=values.dtype)
    out[..., ordering.rows(), ordering.cols()] = values
    return out


def sample_batch(
    factor: np.ndarray,
    ordering: EntryOrdering,
    rng: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Draw count entry matrices, shape (count, n, m), from a covariance factor."""
    z = rng.standard_normal((count, len(ordering)))
    return scatter_entries(z @ factor.T, ordering)


def sample_matrix(
    spec: CovarianceSpec,
    ordering: EntryOrdering,
    seed: int,
    stream: Optional[int] = None,
) -> SampledMatrix:
    """
    Draw one entry matrix from the centered Gaussian law of spec.

    Identical (spec, ordering, seed, stream) gives bit-identical output.

    Raises:
        NotPositiveSemidefiniteError: If the covariance cannot be factored
    """
    factor = factored_covariance(spec, ordering).factor
    rng = make_generator(seed, stream)
    values = sample_batch(factor, ordering, rng, 1)[0]
    return SampledMatrix(
        n=ordering.n, m=ordering.m, values=values, seed=seed, stream=stream
    )
