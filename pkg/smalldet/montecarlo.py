#!/usr/bin/env python3
"""
Monte Carlo estimation for SMALLDET.

Seeded, worker-count independent estimates of P(|det| <= eps) with exact
Clopper-Pearson intervals, pooled merges of independent runs, the
Kolmogorov-Smirnov fit used for the complex Gaussian law, the bound-check
pipeline and the seeded cases for the column-append identity.
"""
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .determinants import (
    COMPLEX_CONVENTIONS,
    append_column_identity_check,
    batch_complex_log_det,
    batch_gram_log_det,
    batch_log_abs_det,
    gram_det,
    sample_complex_gaussian,
)
from .errors import NotPositiveSemidefiniteError, UsageError
from .gaussian_model import (
    CovarianceSpec,
    DValues,
    EntryOrdering,
    build_ordering,
    compute_d_values,
    d_values_from_covariance,
    factored_covariance,
    sample_batch,
)
from .scalar_laws import (
    GammaProductSpec,
    GridConfig,
    ProductLawTable,
    build_product_law,
    corollary_bound,
    gamma_product_law,
    sample_log_gamma_products,
)
from .streams import DEFAULT_BLOCK_SIZE, Block, SubstreamPlan, make_generator

logger = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.99
VARIANTS = ("square", "gram")
KS_MIN_SAMPLES = 100
IDENTITY_GAP_RTOL = 1e-8
MONOTONICITY_ATOL = 1e-10
COMPLEX_MIN_TRIALS = 10_000
LAW_METHODS = ("convolution", "montecarlo")
# entries drawn per batch inside one block
_CHUNK_ENTRIES = 2_000_000
# substreams for reference-law sampling live far above the trial blocks
_LAW_STREAM_BASE = 1 << 40
CALIBRATION_STREAM_BASE = 1 << 41


def clopper_pearson(
    hits: int, trials: int, confidence: float = DEFAULT_CONFIDENCE
) -> Tuple[float, float]:
    """
    Exact two-sided binomial interval from beta quantiles.

    Returns:
        (low, high); (0, 1) when trials == 0
    """
    if not 0 < confidence < 1:
        raise ValueError(f"Confidence must be in (0, 1), got {confidence}")
    if trials < 0 or not 0 <= hits <= trials:
        raise ValueError(f"Invalid counts: hits={hits}, trials={trials}")
    if trials == 0:
        return 0.0, 1.0

    alpha = 1.0 - confidence
    low = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2, hits, trials - hits + 1))
    high = (
        1.0 if hits == trials else float(stats.beta.isf(alpha / 2, hits + 1, trials - hits))
    )
    return low, high


def spec_hash(spec: CovarianceSpec) -> str:
    """Short stable digest of the covariance parameters."""
    payload = json.dumps(spec.describe(), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def experiment_descriptor(
    spec: CovarianceSpec, n: int, m: int, eps: float, variant: str
) -> str:
    """Digest identifying which estimates may be pooled."""
    payload = json.dumps(
        {"spec": spec.describe(), "n": n, "m": m, "eps": eps, "variant": variant},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MonteCarloEstimate:
    """
    Hit count of a Monte Carlo indicator experiment with its exact interval.

    seed_record maps each base seed to the substream ids whose trials were
    counted; an estimate with no trials is the merge identity.
    """

    hits: int
    trials: int
    confidence: float = DEFAULT_CONFIDENCE
    seed_record: Mapping[int, FrozenSet[int]] = field(default_factory=dict)
    descriptor: Optional[str] = None
    block_size: int = DEFAULT_BLOCK_SIZE
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self) -> None:
        low, high = clopper_pearson(self.hits, self.trials, self.confidence)
        p_hat = self.hits / self.trials if self.trials else 0.0
        object.__setattr__(self, "p_hat", p_hat)
        object.__setattr__(self, "ci_low", min(low, p_hat))
        object.__setattr__(self, "ci_high", max(high, p_hat))
        object.__setattr__(
            self,
            "seed_record",
            {int(s): frozenset(int(b) for b in ids) for s, ids in self.seed_record.items()},
        )

    @classmethod
    def empty(
        cls, descriptor: Optional[str] = None, confidence: float = DEFAULT_CONFIDENCE
    ) -> "MonteCarloEstimate":
        return cls(hits=0, trials=0, confidence=confidence, descriptor=descriptor)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hits": self.hits,
            "trials": self.trials,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "confidence": self.confidence,
            "block_size": self.block_size,
            "descriptor": self.descriptor,
            "seed_record": {
                str(seed): sorted(ids) for seed, ids in sorted(self.seed_record.items())
            },
        }


def merge(e1: MonteCarloEstimate, e2: MonteCarloEstimate) -> MonteCarloEstimate:
    """
    Pool two estimates of the same experiment.

    Raises:
        UsageError: If the descriptors, confidence levels or block sizes
            differ, or both estimates counted the same substream
    """
    if e2.trials == 0 and not e2.seed_record:
        return e1
    if e1.trials == 0 and not e1.seed_record:
        return e2

    if e1.descriptor != e2.descriptor:
        raise UsageError(
            f"Cannot merge estimates of different experiments "
            f"({e1.descriptor} vs {e2.descriptor})"
        )
    if not math.isclose(e1.confidence, e2.confidence):
        raise UsageError(
            f"Cannot merge estimates with confidence {e1.confidence} and {e2.confidence}"
        )
    if e1.block_size != e2.block_size:
        raise UsageError(
            f"Cannot merge estimates with block sizes {e1.block_size} and {e2.block_size}"
        )

    record: Dict[int, FrozenSet[int]] = dict(e1.seed_record)
    for seed, ids in e2.seed_record.items():
        overlap = record.get(seed, frozenset()) & ids
        if overlap:
            raise UsageError(
                f"Estimates share substreams {sorted(overlap)[:5]} of seed {seed}"
            )
        record[seed] = record.get(seed, frozenset()) | ids

    return MonteCarloEstimate(
        hits=e1.hits + e2.hits,
        trials=e1.trials + e2.trials,
        confidence=e1.confidence,
        seed_record=record,
        descriptor=e1.descriptor,
        block_size=e1.block_size,
    )


def _log_statistic(mats: np.ndarray, variant: str) -> np.ndarray:
    if variant == "square":
        return batch_log_abs_det(mats)
    return 0.5 * batch_gram_log_det(mats)


def _count_block(
    factor: np.ndarray,
    ordering: EntryOrdering,
    seed: int,
    block: Block,
    log_eps: np.ndarray,
    variant: str,
) -> np.ndarray:
    """Hits of one block for every threshold."""
    rng = make_generator(seed, block.stream)
    chunk = max(1, _CHUNK_ENTRIES // max(1, len(ordering)))
    hits = np.zeros(log_eps.size, dtype=np.int64)
    done = 0
    while done < block.count:
        count = min(chunk, block.count - done)
        mats = sample_batch(factor, ordering, rng, count)
        values = _log_statistic(mats, variant)
        hits += np.count_nonzero(values[:, None] <= log_eps[None, :], axis=0)
        done += count
    return hits


def _run_plan(
    plan: SubstreamPlan,
    workers: int,
    run_block: Callable[[Block], np.ndarray],
) -> List[np.ndarray]:
    """Run every block of plan, each worker owning one contiguous range."""
    ranges = plan.partition(workers)

    def run_range(blocks: List[Block]) -> List[np.ndarray]:
        return [run_block(block) for block in blocks]

    if len(ranges) <= 1:
        results = [run_range(blocks) for blocks in ranges]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            results = list(pool.map(run_range, ranges))
    return [out for per_worker in results for out in per_worker]


def _validate_run(trials: int, workers: int, variant: str, n: int, m: int) -> None:
    if trials < 1:
        raise UsageError(f"Trial count must be positive, got {trials}")
    if workers < 1:
        raise UsageError(f"Worker count must be positive, got {workers}")
    if variant not in VARIANTS:
        raise UsageError(f"Unknown variant '{variant}'. Expected one of: {', '.join(VARIANTS)}")
    if variant == "square" and m != n:
        raise UsageError(f"Square variant needs m = n, got {n}x{m}")
    if variant == "gram" and m < n:
        raise UsageError(f"Gram variant needs n <= m, got {n}x{m}")


def estimate_small_dev_curve(
    spec: CovarianceSpec,
    n: int,
    m: Optional[int],
    eps_values: Sequence[float],
    trials: int,
    seed: int,
    workers: int = 1,
    variant: str = "square",
    block_size: int = DEFAULT_BLOCK_SIZE,
    first_trial: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
    factor: Optional[np.ndarray] = None,
) -> List[MonteCarloEstimate]:
    """
    Estimate the determinant small-deviation probability at several thresholds.

    Every threshold is counted on the same matrices. The square variant counts
    log|det A| <= log eps, the gram variant (1/2) log det(A A^T) <= log eps.

    Args:
        spec: Covariance model of the entries
        n: Row count
        m: Column count (defaults to n)
        eps_values: Positive thresholds
        trials: Number of sampled matrices, >= 1
        seed: Base seed
        workers: Number of threads; results do not depend on it
        variant: "square" or "gram"
        block_size: Trials per substream
        first_trial: First trial index, a multiple of block_size
        confidence: Interval confidence level
        factor: Covariance factor for the (n, m) ordering, if already computed

    Returns:
        One MonteCarloEstimate per threshold, in input order

    Raises:
        UsageError: On invalid counts, variant or thresholds
        NotPositiveSemidefiniteError: If the covariance cannot be factored
    """
    m = n if m is None else m
    _validate_run(trials, workers, variant, n, m)
    if not eps_values:
        raise UsageError("At least one eps value is required")
    if any(not eps > 0 for eps in eps_values):
        raise UsageError(f"eps values must be positive, got {list(eps_values)}")

    try:
        plan = SubstreamPlan(trials, block_size=block_size, first_trial=first_trial)
    except ValueError as e:
        raise UsageError(str(e)) from e

    ordering = build_ordering(n, m)
    if factor is None:
        factor = factored_covariance(spec, ordering).factor
    log_eps = np.log(np.asarray(eps_values, dtype=float))

    logger.info(
        f"Sampling {trials} {variant} determinants of {spec.label()} {n}x{m} "
        f"(seed={seed}, workers={workers})"
    )
    per_block = _run_plan(
        plan,
        workers,
        lambda block: _count_block(factor, ordering, seed, block, log_eps, variant),
    )
    hits = np.sum(per_block, axis=0) if per_block else np.zeros(log_eps.size, dtype=np.int64)
    streams = frozenset(block.stream for block in plan.blocks())

    estimates = []
    for eps, count in zip(eps_values, hits):
        estimates.append(
            MonteCarloEstimate(
                hits=int(count),
                trials=trials,
                confidence=confidence,
                seed_record={seed: streams},
                descriptor=experiment_descriptor(spec, n, m, float(eps), variant),
                block_size=block_size,
            )
        )
    return estimates


def estimate_det_small_dev(
    spec: CovarianceSpec,
    n: int,
    m: Optional[int],
    eps: float,
    trials: int,
    seed: int,
    workers: int = 1,
    variant: str = "square",
    block_size: int = DEFAULT_BLOCK_SIZE,
    first_trial: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
) -> MonteCarloEstimate:
    """Single-threshold form of estimate_small_dev_curve."""
    return estimate_small_dev_curve(
        spec,
        n,
        m,
        [eps],
        trials,
        seed,
        workers=workers,
        variant=variant,
        block_size=block_size,
        first_trial=first_trial,
        confidence=confidence,
    )[0]


@dataclass(frozen=True)
class KSResult:
    statistic: float
    sample_size: int
    p_value_bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistic": self.statistic,
            "sample_size": self.sample_size,
            "p_value_bound": self.p_value_bound,
        }


def ks_fit(
    samples: np.ndarray,
    law_cdf: Callable[[np.ndarray], np.ndarray],
    reference_size: Optional[int] = None,
) -> KSResult:
    """
    Kolmogorov-Smirnov distance between sorted samples and a CDF.

    Args:
        samples: Sorted sample values, at least 100
        law_cdf: Vectorized CDF of the hypothesized law
        reference_size: Sample size behind law_cdf when it is itself
            empirical; the p-value then uses the two-sample effective size

    Returns:
        KSResult with the p-value from the asymptotic Kolmogorov distribution

    Raises:
        UsageError: If samples are unsorted or fewer than 100
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    size = x.size
    if size < KS_MIN_SAMPLES:
        raise UsageError(f"KS fit needs at least {KS_MIN_SAMPLES} samples, got {size}")
    if np.any(np.diff(x) < 0):
        raise UsageError("KS fit needs samples sorted in ascending order")

    cdf = np.clip(np.asarray(law_cdf(x), dtype=float), 0.0, 1.0)
    ranks = np.arange(1, size + 1)
    d_plus = np.max(ranks / size - cdf)
    d_minus = np.max(cdf - (ranks - 1) / size)
    statistic = float(min(1.0, max(0.0, d_plus, d_minus)))

    effective = float(size)
    if reference_size:
        effective = size * reference_size / (size + reference_size)
    p_value = float(stats.kstwobign.sf(math.sqrt(effective) * statistic))
    return KSResult(statistic=statistic, sample_size=size, p_value_bound=p_value)


@dataclass(frozen=True)
class BoundCheckRow:
    eps: float
    n: int
    m: int
    spec_hash: str
    trials: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    bound: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "n": self.n,
            "m": self.m,
            "spec_hash": self.spec_hash,
            "trials": self.trials,
            "hits": self.hits,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "bound": self.bound,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class BoundCheckReport:
    rows: List[BoundCheckRow]
    estimates: List[MonteCarloEstimate]
    d_values: DValues
    error_estimate: float
    variant: str

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)


def bound_check(
    spec: CovarianceSpec,
    n: int,
    m: Optional[int],
    eps_values: Sequence[float],
    trials: int,
    seed: int,
    workers: int = 1,
    variant: str = "square",
    block_size: int = DEFAULT_BLOCK_SIZE,
    first_trial: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
    grid: Optional[GridConfig] = None,
    table: Optional[ProductLawTable] = None,
) -> BoundCheckReport:
    """
    Compare Monte Carlo determinant probabilities with the product-law bound.

    For each eps the bound is P(prod |X_j| <= eps_0) with
    eps_0 = eps / prod d_k^(1/2), d_k computed for (n, n) in the square
    variant and for (n, m) in the gram variant. A row passes when the lower
    confidence limit does not exceed the bound.

    Raises:
        CorollaryHypothesisError: If some d_k = 0
        GridRangeError: If some log eps_0 is outside the table grid
    """
    m = n if m is None else m
    _validate_run(trials, workers, variant, n, m)
    ordering = build_ordering(n, m)
    factored = factored_covariance(spec, ordering)
    d_values = d_values_from_covariance(factored.cov, ordering)
    logger.info(f"d-values for {spec.label()} n={n} m={m}: {list(d_values.values)}")
    if table is None:
        table = build_product_law(n, grid)
    bounds = [corollary_bound(eps, d_values, n, table) for eps in eps_values]

    estimates = estimate_small_dev_curve(
        spec,
        n,
        m,
        eps_values,
        trials,
        seed,
        workers=workers,
        variant=variant,
        block_size=block_size,
        first_trial=first_trial,
        confidence=confidence,
        factor=factored.factor,
    )

    digest = spec_hash(spec)
    rows = []
    for eps, estimate, corollary in zip(eps_values, estimates, bounds):
        verdict = "pass" if estimate.ci_low <= corollary.bound else "fail"
        if verdict == "fail":
            logger.warning(
                f"Bound violated at eps={eps:g}: ci_low={estimate.ci_low:.6g} "
                f"> bound={corollary.bound:.6g}"
            )
        rows.append(
            BoundCheckRow(
                eps=float(eps),
                n=n,
                m=m,
                spec_hash=digest,
                trials=estimate.trials,
                hits=estimate.hits,
                p_hat=estimate.p_hat,
                ci_low=estimate.ci_low,
                ci_high=estimate.ci_high,
                bound=corollary.bound,
                verdict=verdict,
            )
        )
    return BoundCheckReport(
        rows=rows,
        estimates=estimates,
        d_values=d_values,
        error_estimate=table.error_estimate,
        variant=variant,
    )


@dataclass(frozen=True)
class LemmaCase:
    index: int
    n: int
    m: int
    kind: str
    lhs: float
    rhs: Optional[float]
    gap: Optional[float]

    @property
    def relative_gap(self) -> Optional[float]:
        if self.gap is None:
            return None
        return abs(self.gap) / max(1.0, abs(self.lhs))


@dataclass(frozen=True)
class LemmaReport:
    cases: List[LemmaCase]

    @property
    def max_relative_gap(self) -> float:
        gaps = [c.relative_gap for c in self.cases if c.relative_gap is not None]
        return max(gaps) if gaps else 0.0

    @property
    def min_margin(self) -> float:
        return min((c.lhs for c in self.cases), default=0.0)

    @property
    def passed(self) -> bool:
        return (
            self.max_relative_gap <= IDENTITY_GAP_RTOL
            and self.min_margin >= -MONOTONICITY_ATOL
        )


def _lemma_inputs(
    index: int, n_max: int, m_max: int, rng: np.random.Generator
) -> Tuple[str, np.ndarray, np.ndarray]:
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(n, m_max + 1))
    A = rng.standard_normal((n, m))
    a = rng.standard_normal(n)
    if index == 0:
        return "zero-column", A, np.zeros(n)
    if index == 1:
        n = max(2, n)
        m = max(m, n)
        A = rng.standard_normal((n, m))
        A[-1] = 2.0 * A[0]
        return "dependent-rows", A, rng.standard_normal(n)
    return "random", A, a


def run_lemma_cases(
    n_max: int = 5, m_max: int = 8, cases: int = 500, seed: int = 0
) -> LemmaReport:
    """
    Check det BB^T - det AA^T = a^T adj(AA^T) a on seeded random cases.

    Case 0 appends a zero column and case 1 uses an A with dependent rows,
    where only the monotonicity det BB^T >= det AA^T is recorded. Case i is
    drawn from substream i of seed.
    """
    if n_max < 1 or m_max < n_max:
        raise UsageError(f"Lemma cases need 1 <= n_max <= m_max, got {n_max}, {m_max}")
    if cases < 1:
        raise UsageError(f"Case count must be positive, got {cases}")

    results = []
    for index in range(cases):
        kind, A, a = _lemma_inputs(index, n_max, m_max, make_generator(seed, index))
        n, m = A.shape
        try:
            check = append_column_identity_check(A, a)
            results.append(
                LemmaCase(index, n, m, kind, check.lhs, check.rhs, check.gap)
            )
        except NotPositiveSemidefiniteError:
            B = np.column_stack([A, a])
            lhs = gram_det(B).value - gram_det(A).value
            results.append(LemmaCase(index, n, m, kind, lhs, None, None))

    report = LemmaReport(results)
    logger.info(
        f"Checked {cases} column-append cases: max relative gap "
        f"{report.max_relative_gap:.3g}, min margin {report.min_margin:.3g}"
    )
    return report


def default_gamma_scale(convention: str) -> float:
    """Gamma scale matching a complex entry convention: 2 * per-part variance."""
    if convention not in COMPLEX_CONVENTIONS:
        raise UsageError(
            f"Unknown complex convention '{convention}'. "
            f"Expected one of: {', '.join(COMPLEX_CONVENTIONS)}"
        )
    return 2.0 * COMPLEX_CONVENTIONS[convention]


def sample_complex_log_dets(
    n: int,
    trials: int,
    seed: int,
    convention: str = "unit-complex",
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
    stream_offset: int = 0,
) -> np.ndarray:
    """
    Sorted draws of log det(M M*) for standard complex Gaussian M.

    Block b uses substream stream_offset + b, so the result does not depend
    on workers. Values stay finite for orders where det(M M*) itself
    overflows; singular draws are -inf.
    """
    if n < 1:
        raise UsageError(f"Matrix order must be positive, got {n}")
    if trials < 1:
        raise UsageError(f"Trial count must be positive, got {trials}")
    default_gamma_scale(convention)
    plan = SubstreamPlan(trials, block_size=block_size)

    def run_block(block: Block) -> np.ndarray:
        rng = make_generator(seed, stream_offset + block.stream)
        mats = sample_complex_gaussian(n, rng, count=block.count, convention=convention)
        return batch_complex_log_det(mats)

    draws = np.concatenate(_run_plan(plan, workers, run_block))
    return np.sort(draws)


def gamma_law_cdf(
    spec: GammaProductSpec,
    method: str = "convolution",
    seed: int = 0,
    law_samples: int = 1_000_000,
    grid: Optional[GridConfig] = None,
) -> Tuple[Callable[[np.ndarray], np.ndarray], Optional[int]]:
    """
    CDF of log prod_j G_j as a vectorized callable of t = log x.

    Returns:
        (cdf, reference_size); reference_size is the sample count behind an
        empirical CDF, None for the convolution table
    """
    if method not in LAW_METHODS:
        raise UsageError(f"Unknown law method '{method}'. Expected one of: {', '.join(LAW_METHODS)}")

    if method == "montecarlo":
        rng = make_generator(seed, _LAW_STREAM_BASE)
        reference = np.sort(sample_log_gamma_products(spec, rng, law_samples))

        def empirical_cdf(t: np.ndarray) -> np.ndarray:
            return np.searchsorted(reference, t, side="right") / reference.size

        return empirical_cdf, law_samples

    table = gamma_product_law(spec, grid)

    def table_cdf(t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), table.t_min, table.t_max)
        return np.asarray(table.cdf_at(t))

    return table_cdf, None


@dataclass(frozen=True)
class CalibrationResult:
    spec: GammaProductSpec
    ks: KSResult
    candidates: List[Tuple[GammaProductSpec, KSResult]]


def calibrate_gamma_shapes(
    samples: np.ndarray,
    n: int,
    scale: float = 1.0,
    starts: Sequence[float] = (0.5, 1.0, 1.5),
    steps: Sequence[float] = (0.5, 1.0),
    grid: Optional[GridConfig] = None,
) -> CalibrationResult:
    """
    Pick the arithmetic shape family with the smallest KS distance to log samples.

    Candidates are shapes start, start + step, ..., start + (n-1) step for
    every (start, step) pair.
    """
    candidates = []
    for start in starts:
        for step in steps:
            spec = GammaProductSpec.arithmetic(n, start, step, scale)
            cdf, _ = gamma_law_cdf(spec, "convolution", grid=grid)
            result = ks_fit(samples, cdf)
            logger.debug(f"Shapes {spec.shapes}: KS statistic {result.statistic:.4g}")
            candidates.append((spec, result))

    best_spec, best_ks = min(candidates, key=lambda item: item[1].statistic)
    logger.info(f"Calibrated gamma shapes {best_spec.shapes} (KS {best_ks.statistic:.4g})")
    return CalibrationResult(spec=best_spec, ks=best_ks, candidates=candidates)


@dataclass(frozen=True)
class ComplexLawReport:
    n: int
    trials: int
    convention: str
    method: str
    law: GammaProductSpec
    ks: KSResult
    calibration: Optional[CalibrationResult] = None

    @property
    def passed(self) -> bool:
        return self.ks.p_value_bound > 0.01


def complex_law_fit(
    n: int,
    trials: int,
    seed: int,
    law: Optional[GammaProductSpec] = None,
    convention: str = "unit-complex",
    method: str = "convolution",
    workers: int = 1,
    grid: Optional[GridConfig] = None,
) -> ComplexLawReport:
    """
    KS fit of sampled log det(M M*) against a gamma-product law.

    With law None the shapes are calibrated on an independent batch drawn
    from separate substreams; the reported KS uses the main draws only.

    Raises:
        UsageError: If trials < 10^4 or the options are invalid
    """
    if trials < COMPLEX_MIN_TRIALS:
        raise UsageError(
            f"complex-law needs at least {COMPLEX_MIN_TRIALS} trials, got {trials}"
        )
    samples = sample_complex_log_dets(n, trials, seed, convention, workers=workers)

    calibration = None
    if law is None:
        held_out = sample_complex_log_dets(
            n,
            trials,
            seed,
            convention,
            workers=workers,
            stream_offset=CALIBRATION_STREAM_BASE,
        )
        calibration = calibrate_gamma_shapes(
            held_out, n, scale=default_gamma_scale(convention), grid=grid
        )
        law = calibration.spec

    cdf, reference_size = gamma_law_cdf(
        law, method, seed=seed, law_samples=10 * trials, grid=grid
    )
    ks = ks_fit(samples, cdf, reference_size=reference_size)
    logger.info(
        f"complex-law n={n}: KS {ks.statistic:.4g}, p-value bound {ks.p_value_bound:.4g}"
    )
    return ComplexLawReport(
        n=n,
        trials=trials,
        convention=convention,
        method=method,
        law=law,
        ks=ks,
        calibration=calibration,
    )
