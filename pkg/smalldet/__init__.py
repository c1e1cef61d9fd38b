"""
SMALLDET: small-deviation toolkit for Gaussian random-matrix determinants

Residual variances of correlated Gaussian matrix models, exact and asymptotic
laws of products of independent factors, stable determinant kernels and
seeded Monte Carlo verification of the resulting bounds.
"""
from importlib.metadata import PackageNotFoundError, version


def get_version() -> str:
    """Get the package version, falling back to pyproject.toml in a checkout."""
    try:
        return version("smalldet")
    except PackageNotFoundError:
        from pathlib import Path
        import re

        try:
            pyproject_path = Path(__file__).parent.parent / "pyproject.toml"
            if pyproject_path.exists():
                content = pyproject_path.read_text(encoding="utf-8")
                match = re.search(r'^version\s*=\s*"([^"]+)"', content, re.MULTILINE)
                if match:
                    return match.group(1)
        except OSError:
            pass

        return "0.1.0"


__version__ = get_version()

from .determinants import (  # noqa: E402
    GramResult,
    adjugate,
    append_column_identity_check,
    complex_gaussian_det,
    gram_det,
    square_det,
)
from .errors import (  # noqa: E402
    CorollaryHypothesisError,
    DimensionMismatchError,
    GridRangeError,
    NotPositiveSemidefiniteError,
    SmallDetError,
    UsageError,
)
from .gaussian_model import (  # noqa: E402
    CovarianceSpec,
    DValues,
    EntryOrdering,
    build_ordering,
    compute_d_values,
    sample_matrix,
)
from .montecarlo import (  # noqa: E402
    KSResult,
    MonteCarloEstimate,
    bound_check,
    estimate_det_small_dev,
    ks_fit,
    merge,
)
from .scalar_laws import (  # noqa: E402
    GammaProductSpec,
    GridConfig,
    ProductLawTable,
    asymptotic_product_prob,
    build_product_law,
    corollary_bound,
    gamma_product_sampler,
    gaussian_interval_prob,
    log_abs_gaussian_density,
    product_small_dev,
)

__all__ = [
    "__version__",
    "CorollaryHypothesisError",
    "CovarianceSpec",
    "DValues",
    "DimensionMismatchError",
    "EntryOrdering",
    "GammaProductSpec",
    "GramResult",
    "GridConfig",
    "GridRangeError",
    "KSResult",
    "MonteCarloEstimate",
    "NotPositiveSemidefiniteError",
    "ProductLawTable",
    "SmallDetError",
    "UsageError",
    "adjugate",
    "append_column_identity_check",
    "asymptotic_product_prob",
    "bound_check",
    "build_ordering",
    "build_product_law",
    "complex_gaussian_det",
    "compute_d_values",
    "corollary_bound",
    "estimate_det_small_dev",
    "gamma_product_sampler",
    "gaussian_interval_prob",
    "gram_det",
    "ks_fit",
    "log_abs_gaussian_density",
    "merge",
    "product_small_dev",
    "sample_matrix",
    "square_det",
]
