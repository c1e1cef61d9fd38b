#!/usr/bin/env python3
"""
Scalar laws for SMALLDET.

Exact and asymptotic distributions of products of independent positive
factors (absolute standard Gaussians, gamma variables), computed on a uniform
log-scale grid by numerical convolution, plus the one-dimensional Gaussian
interval probabilities behind the Anderson inequality.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .errors import GridRangeError, UsageError
from .gaussian_model import DValues
from .streams import make_generator

logger = logging.getLogger(__name__)

# 2 / sqrt(2 pi): density of |X| at zero
HALF_NORMAL_AT_ZERO = math.sqrt(2.0 / math.pi)
MIN_GRID_POINTS = 64
_EPS = float(np.finfo(float).eps)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def gaussian_interval_prob(sigma: float, shift: float, eps: float) -> float:
    """
    P(|Y + shift| <= eps) for Y ~ N(0, sigma^2).

    Args:
        sigma: Standard deviation, >= 0 (0 means Y = 0)
        shift: Deterministic offset
        eps: Half-width of the interval, >= 0

    Returns:
        The interval probability

    Raises:
        ValueError: If sigma or eps is negative
    """
    if sigma < 0 or eps < 0:
        raise ValueError(f"sigma and eps must be non-negative, got {sigma}, {eps}")
    # P(|Y + r| <= eps) = P(|Y - r| <= eps)
    shift = abs(shift)
    if sigma == 0:
        return 1.0 if shift <= eps else 0.0

    lo = (-eps - shift) / sigma
    hi = (eps - shift) / sigma
    if lo > 0:
        return float(special.ndtr(-lo) - special.ndtr(-hi))
    return float(special.ndtr(hi) - special.ndtr(lo))


def log_abs_gaussian_density(u: ArrayLike) -> Union[float, np.ndarray]:
    """Density of log|X| for X ~ N(0, 1): (2/sqrt(2 pi)) exp(-e^(2u)/2 + u)."""
    u_arr = np.asarray(u, dtype=float)
    with np.errstate(over="ignore"):
        values = HALF_NORMAL_AT_ZERO * np.exp(u_arr - 0.5 * np.exp(2.0 * u_arr))
    return float(values) if values.ndim == 0 else values


def log_abs_gaussian_cdf(t: ArrayLike) -> Union[float, np.ndarray]:
    """P(log|X| < t) = 2 Phi(e^t) - 1."""
    t_arr = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        values = special.erf(np.exp(t_arr) / math.sqrt(2.0))
    return float(values) if values.ndim == 0 else values


class FactorLaw:
    """Law of log V for one positive factor V of a product."""

    name = "factor"

    def density(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail_masses(self, u_min: float, u_max: float) -> Tuple[float, float]:
        """Upper bounds on the mass of log V below u_min and above u_max."""
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {"law": self.name}


class LogAbsGaussianFactor(FactorLaw):
    """log|X| with X ~ N(0, 1)."""

    name = "log-abs-gaussian"

    def density(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(log_abs_gaussian_density(u))

    def cdf(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(log_abs_gaussian_cdf(t))

    def tail_masses(self, u_min: float, u_max: float) -> Tuple[float, float]:
        # left tail uses f(u) <= (2/sqrt(2 pi)) e^u
        left = HALF_NORMAL_AT_ZERO * math.exp(u_min)
        with np.errstate(over="ignore"):
            right = float(special.erfc(np.exp(u_max) / math.sqrt(2.0)))
        return left, right


@dataclass(frozen=True)
class LogGammaFactor(FactorLaw):
    """log G with G ~ Gamma(shape, scale)."""

    shape: float
    scale: float = 1.0
    name = "log-gamma"

    def __post_init__(self) -> None:
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError(
                f"Gamma shape and scale must be positive, got {self.shape}, {self.scale}"
            )

    def density(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        log_norm = special.gammaln(self.shape) + self.shape * math.log(self.scale)
        with np.errstate(over="ignore"):
            return np.exp(self.shape * u - np.exp(u) / self.scale - log_norm)

    def cdf(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return special.gammainc(self.shape, np.exp(np.asarray(t, dtype=float)) / self.scale)

    def tail_masses(self, u_min: float, u_max: float) -> Tuple[float, float]:
        with np.errstate(over="ignore"):
            left = float(special.gammainc(self.shape, math.exp(u_min) / self.scale))
            right = float(special.gammaincc(self.shape, np.exp(u_max) / self.scale))
        return left, right

    def describe(self) -> Dict[str, Any]:
        return {"law": self.name, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class GridConfig:
    """
    Uniform log-scale lattice for product-law tables.

    The CDF is tabulated on t in [t_min, t_max]; each convolution integrates
    the factor density over u in [u_min, u_max]. All bounds must be integer
    multiples of 2 * step so that the step-doubled lattice used for the
    Richardson error estimate lines up with the fine one.
    """

    step: float = 2.0 ** -7
    u_min: float = -45.0
    u_max: float = 6.0
    t_min: float = -60.0
    t_max: float = 12.0

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise UsageError(f"Grid step must be positive, got {self.step}")
        if self.u_min >= self.u_max or self.t_min >= self.t_max:
            raise UsageError(
                f"Grid bounds must be increasing: u=[{self.u_min}, {self.u_max}], "
                f"t=[{self.t_min}, {self.t_max}]"
            )
        for name in ("u_min", "u_max", "t_min", "t_max"):
            ratio = getattr(self, name) / (2.0 * self.step)
            if abs(ratio - round(ratio)) > 1e-9:
                raise UsageError(
                    f"Grid bound {name}={getattr(self, name)} is not a multiple "
                    f"of 2*step={2.0 * self.step}"
                )
        for label, lo, hi in (("t", self.t_min, self.t_max), ("u", self.u_min, self.u_max)):
            points = int(round((hi - lo) / self.step)) + 1
            if points < MIN_GRID_POINTS:
                raise UsageError(
                    f"{label} grid has {points} points; at least {MIN_GRID_POINTS} required"
                )

    def index_range(self, lo: float, hi: float) -> Tuple[int, int]:
        return int(round(lo / self.step)), int(round(hi / self.step))

    def t_grid(self) -> np.ndarray:
        k0, k1 = self.index_range(self.t_min, self.t_max)
        return np.arange(k0, k1 + 1) * self.step

    def u_grid(self) -> np.ndarray:
        k0, k1 = self.index_range(self.u_min, self.u_max)
        return np.arange(k0, k1 + 1) * self.step

    def coarsened(self) -> "GridConfig":
        """Same bounds with twice the step (at least 64 points still required)."""
        return GridConfig(
            step=2.0 * self.step,
            u_min=self.u_min,
            u_max=self.u_max,
            t_min=self.t_min,
            t_max=self.t_max,
        )


@dataclass(frozen=True, eq=False)
class ProductLawTable:
    """
    Gridded CDF of S = sum_j log V_j for independent positive factors V_j.

    cdf[i] = P(S < grid[i]); error_estimate bounds the absolute error of the
    tabulated and interpolated values.
    """

    n: int
    grid: np.ndarray
    cdf: np.ndarray
    grid_step: float
    truncation_bounds: Tuple[float, float]
    error_estimate: float
    factors: Tuple[FactorLaw, ...] = ()
    _interpolator: PchipInterpolator = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        if self.grid.shape != self.cdf.shape or self.grid.ndim != 1:
            raise ValueError("grid and cdf must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.grid.setflags(write=False)
        self.cdf.setflags(write=False)
        object.__setattr__(self, "_interpolator", PchipInterpolator(self.grid, self.cdf))

    @property
    def t_min(self) -> float:
        return float(self.grid[0])

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    def _check_range(self, t: np.ndarray) -> None:
        slack = 1e-12 * max(1.0, abs(self.t_min), abs(self.t_max))
        if np.any(t < self.t_min - slack) or np.any(t > self.t_max + slack) or np.any(
            np.isnan(t)
        ):
            raise GridRangeError(
                f"log-threshold outside table range [{self.t_min:g}, {self.t_max:g}]; "
                f"rebuild the table with a wider grid"
            )

    def cdf_at(self, t: ArrayLike) -> Union[float, np.ndarray]:
        """Monotone cubic interpolation of P(S < t)."""
        t_arr = np.asarray(t, dtype=float)
        self._check_range(t_arr)
        values = np.clip(self._interpolator(np.clip(t_arr, self.t_min, self.t_max)), 0.0, 1.0)
        return float(values) if values.ndim == 0 else values

    def density_at(self, u: ArrayLike) -> np.ndarray:
        """Derivative of the monotone interpolant, i.e. the density of S."""
        u_arr = np.asarray(u, dtype=float)
        return np.maximum(self._interpolator.derivative()(u_arr), 0.0)

    def factor_density(self, u: np.ndarray) -> np.ndarray:
        """Density of S on u, analytic for single-factor tables."""
        if len(self.factors) == 1:
            return self.factors[0].density(u)
        return self.density_at(u)

    def metadata(self) -> Dict[str, Any]:
        """JSON-ready description of the table."""
        return {
            "n": self.n,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "grid_step": self.grid_step,
            "points": int(self.grid.size),
            "truncation_bounds": list(self.truncation_bounds),
            "error_estimate": self.error_estimate,
            "factors": [f.describe() for f in self.factors],
        }


def _trapezoid_weights(count: int, step: float) -> np.ndarray:
    weights = np.full(count, step)
    weights[0] = weights[-1] = 0.5 * step
    return weights


def _interpolation_error(grid: np.ndarray, cdf: np.ndarray) -> float:
    """Error of interpolating from every other node, checked on the skipped ones."""
    if grid.size < 5:
        return 0.0
    coarse = PchipInterpolator(grid[::2], cdf[::2])
    return float(np.max(np.abs(coarse(grid[1::2]) - cdf[1::2])))


def _finalize(cdf: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))


def _aligned_convolution(
    cdf_prev: np.ndarray,
    t_range: Tuple[int, int],
    weighted_density: np.ndarray,
    u_range: Tuple[int, int],
) -> Tuple[np.ndarray, float]:
    """
    P(S + U < t_i) = sum_j w_j f(u_j) P(S < t_i - u_j) on a shared integer lattice.

    Args:
        cdf_prev: P(S < t) on lattice indices t_range[0]..t_range[1]
        t_range: Inclusive lattice index range of the t grid
        weighted_density: Quadrature weight times density of U at each u node
        u_range: Inclusive lattice index range of the u grid

    Returns:
        New CDF on the same t grid, and the error bound from padding
        P(S < .) with 0 below and 1 above the t grid
    """
    kt0, kt1 = t_range
    ku0, ku1 = u_range
    # P(S < k) for lattice indices k = kt0 - ku1 .. kt1 - ku0
    lo = kt0 - ku1
    hi = kt1 - ku0
    below = max(0, min(kt0, hi + 1) - lo)
    above = max(0, hi - max(kt1, lo - 1))
    inner_lo = max(lo, kt0)
    inner_hi = min(hi, kt1)
    inner = cdf_prev[inner_lo - kt0 : inner_hi - kt0 + 1] if inner_lo <= inner_hi else cdf_prev[:0]
    extended = np.concatenate([np.zeros(below), inner, np.ones(above)])
    result = np.convolve(extended, weighted_density, mode="valid")
    pad_error = float(cdf_prev[0]) + float(1.0 - cdf_prev[-1])
    return result, pad_error


def _product_law_pass(
    factors: Sequence[FactorLaw], grid: GridConfig
) -> Tuple[np.ndarray, float]:
    """CDF of the sum of log-factors on grid, with accumulated truncation error."""
    t = grid.t_grid()
    u = grid.u_grid()
    t_range = grid.index_range(grid.t_min, grid.t_max)
    u_range = grid.index_range(grid.u_min, grid.u_max)
    weights = _trapezoid_weights(u.size, grid.step)

    cdf = np.asarray(factors[0].cdf(t), dtype=float)
    error = u.size * 4.0 * _EPS
    for factor in factors[1:]:
        weighted = weights * factor.density(u)
        cdf, pad_error = _aligned_convolution(cdf, t_range, weighted, u_range)
        cdf = _finalize(cdf)
        left, right = factor.tail_masses(grid.u_min, grid.u_max)
        error += pad_error + left + right + u.size * 4.0 * _EPS
    return cdf, error


def product_law_for_factors(
    factors: Sequence[FactorLaw], grid: Optional[GridConfig] = None
) -> ProductLawTable:
    """
    Tabulate the CDF of the log of a product of independent factors.

    The first factor's CDF is used analytically; each further factor is added
    by trapezoidal convolution with its log-density. The error estimate adds
    the truncation tails, the padding error, a Richardson step-doubling
    difference and the interpolation error.

    Args:
        factors: Factor laws, at least one
        grid: Lattice settings (defaults to GridConfig())

    Returns:
        ProductLawTable with n = len(factors)
    """
    if not factors:
        raise UsageError("At least one factor is required")
    grid = grid or GridConfig()

    cdf, error = _product_law_pass(factors, grid)
    t = grid.t_grid()
    if len(factors) > 1:
        try:
            coarse, _ = _product_law_pass(factors, grid.coarsened())
            richardson = float(np.max(np.abs(cdf[::2] - coarse)))
        except UsageError:
            logger.warning("Grid too small to coarsen; skipping Richardson estimate")
            richardson = 0.0
        error += richardson
    error += _interpolation_error(t, cdf)

    table = ProductLawTable(
        n=len(factors),
        grid=t,
        cdf=cdf,
        grid_step=grid.step,
        truncation_bounds=(grid.u_min, grid.u_max),
        error_estimate=error,
        factors=tuple(factors),
    )
    logger.info(
        f"Built product law with {table.n} factors on {t.size} points "
        f"(error estimate {error:.3g})"
    )
    return table


def build_product_law(n: int, grid: Optional[GridConfig] = None) -> ProductLawTable:
    """
    CDF table of S_n = sum_{j<=n} log|X_j| for i.i.d. standard Gaussians X_j.

    Args:
        n: Number of factors, >= 1
        grid: Lattice settings

    Returns:
        ProductLawTable; the n = 1 table is the analytic 2 Phi(e^t) - 1

    Raises:
        UsageError: If n < 1 or the grid is invalid
    """
    if n < 1:
        raise UsageError(f"Factor count must be positive, got {n}")
    gaussian = LogAbsGaussianFactor()
    return product_law_for_factors([gaussian] * n, grid)


def convolve_product_laws(a: ProductLawTable, b: ProductLawTable) -> ProductLawTable:
    """
    Law of S_a + S_b from two tables on the same lattice.

    a contributes its CDF, b its density (analytic for single-factor tables,
    the derivative of the monotone interpolant otherwise).

    Raises:
        UsageError: If the tables do not share step and lattice alignment
    """
    if not math.isclose(a.grid_step, b.grid_step, rel_tol=1e-12):
        raise UsageError(
            f"Tables use different steps: {a.grid_step} vs {b.grid_step}"
        )
    step = a.grid_step

    def lattice(table: ProductLawTable) -> Tuple[int, int]:
        return int(round(table.t_min / step)), int(round(table.t_max / step))

    def convolve(table_a: ProductLawTable, table_b: ProductLawTable, stride: int) -> Tuple[np.ndarray, float]:
        t_a = table_a.grid[::stride]
        u_b = table_b.grid[::stride]
        kt = (int(round(t_a[0] / (step * stride))), int(round(t_a[-1] / (step * stride))))
        ku = (int(round(u_b[0] / (step * stride))), int(round(u_b[-1] / (step * stride))))
        if stride == 1:
            density = table_b.factor_density(u_b)
        elif len(table_b.factors) == 1:
            density = table_b.factors[0].density(u_b)
        else:
            density = np.maximum(
                PchipInterpolator(u_b, table_b.cdf[::stride]).derivative()(u_b), 0.0
            )
        weighted = _trapezoid_weights(u_b.size, step * stride) * density
        return _aligned_convolution(table_a.cdf[::stride], kt, weighted, ku)

    for table in (a, b):
        lo, hi = lattice(table)
        if lo % 2 or hi % 2:
            raise UsageError("Table bounds must be multiples of 2*step")

    cdf, pad_error = convolve(a, b, 1)
    cdf = _finalize(cdf)
    coarse, _ = convolve(a, b, 2)
    richardson = float(np.max(np.abs(cdf[::2] - _finalize(coarse))))
    tails = float(b.cdf[0]) + float(1.0 - b.cdf[-1])
    error = (
        a.error_estimate
        + b.error_estimate
        + pad_error
        + tails
        + richardson
        + b.grid.size * 4.0 * _EPS
        + _interpolation_error(a.grid, cdf)
    )
    return ProductLawTable(
        n=a.n + b.n,
        grid=a.grid.copy(),
        cdf=cdf,
        grid_step=step,
        truncation_bounds=(b.t_min, b.t_max),
        error_estimate=error,
        factors=a.factors + b.factors,
    )


def product_small_dev(table: ProductLawTable, eps: float) -> float:
    """
    P(prod_j V_j <= eps) read from a product-law table.

    Raises:
        ValueError: If eps <= 0
        GridRangeError: If log(eps) is outside the table grid
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return float(table.cdf_at(math.log(eps)))


def asymptotic_product_prob(n: int, eps: float) -> float:
    """
    Small-eps approximation (2/sqrt(2 pi))^n eps |log eps|^(n-1) / (n-1)!.

    Raises:
        ValueError: If n < 1 or eps is outside (0, 1)
    """
    if n < 1:
        raise ValueError(f"Factor count must be positive, got {n}")
    if not 0 < eps < 1:
        raise ValueError(f"Asymptotic formula needs 0 < eps < 1, got {eps}")
    return (
        HALF_NORMAL_AT_ZERO ** n
        * eps
        * abs(math.log(eps)) ** (n - 1)
        / math.factorial(n - 1)
    )


@dataclass(frozen=True)
class CorollaryBound:
    eps0: float
    bound: float


def corollary_bound(
    eps: float, d: DValues, n: int, table: ProductLawTable
) -> CorollaryBound:
    """
    Rescaled small-deviation bound P(prod |X_j| <= eps_0), eps_0 = eps / prod d_k^(1/2).

    Raises:
        CorollaryHypothesisError: If some d_k = 0
        GridRangeError: If log(eps_0) is outside the table grid
    """
    if d.n != n or table.n != n:
        raise UsageError(
            f"Order mismatch: n={n}, d-values for n={d.n}, table for n={table.n}"
        )
    eps0 = d.rescale(eps)
    return CorollaryBound(eps0=eps0, bound=product_small_dev(table, eps0))


@dataclass(frozen=True)
class GammaProductSpec:
    """Independent factors G_j ~ Gamma(shape_j, scale)."""

    shapes: Tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self) -> None:
        shapes = tuple(float(s) for s in self.shapes)
        if not shapes:
            raise UsageError("GammaProductSpec needs at least one shape")
        if any(s <= 0 for s in shapes):
            raise UsageError(f"Gamma shapes must be positive, got {shapes}")
        if not self.scale > 0:
            raise UsageError(f"Gamma scale must be positive, got {self.scale}")
        object.__setattr__(self, "shapes", shapes)

    @classmethod
    def arithmetic(
        cls, n: int, start: float, step: float, scale: float = 1.0
    ) -> "GammaProductSpec":
        """Shapes start, start + step, ..., start + (n-1) step."""
        return cls(tuple(start + step * j for j in range(n)), scale)

    def perturbed(self, delta: float) -> "GammaProductSpec":
        return GammaProductSpec(tuple(s + delta for s in self.shapes), self.scale)

    def factors(self) -> List[FactorLaw]:
        return [LogGammaFactor(s, self.scale) for s in self.shapes]

    def describe(self) -> Dict[str, Any]:
        return {"shapes": list(self.shapes), "scale": self.scale}


def gamma_product_law(
    spec: GammaProductSpec, grid: Optional[GridConfig] = None
) -> ProductLawTable:
    """CDF table of log prod_j G_j by numerical convolution."""
    return product_law_for_factors(spec.factors(), grid)


def sample_log_gamma_products(
    spec: GammaProductSpec, rng: np.random.Generator, count: int
) -> np.ndarray:
    """count independent draws of log prod_j G_j = sum_j log G_j."""
    draws = rng.gamma(np.asarray(spec.shapes), spec.scale, size=(count, len(spec.shapes)))
    with np.errstate(divide="ignore"):
        return np.sum(np.log(draws), axis=1)


def sample_gamma_products(
    spec: GammaProductSpec, rng: np.random.Generator, count: int
) -> np.ndarray:
    """count independent draws of prod_j G_j."""
    return np.exp(sample_log_gamma_products(spec, rng, count))


def gamma_product_sampler(
    spec: GammaProductSpec, seed: int, stream: Optional[int] = None
) -> float:
    """One draw of prod_j G_j, deterministic per (seed, stream)."""
    return float(sample_gamma_products(spec, make_generator(seed, stream), 1)[0])
