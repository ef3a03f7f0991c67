"""smoothcert: certification engine for randomized-smoothing robustness bounds."""

__version__ = "0.1.0"

from .certify import (
    Certificate,
    ConfidenceBudget,
    certified_radius_search,
    certify,
    certify_practical,
    clopper_pearson_lower,
    cohen_bound,
    cohen_radius,
    gaussian_bilateral_radius,
    teng_bound,
    teng_radius,
)
from .classifiers import (
    BallIndicator,
    BinomialEvidence,
    Constant,
    ExternalClassifier,
    Halfspace,
    evaluate,
    exact_smoothed_value,
    success_counts,
)
from .discrepancy import (
    DiscrepancyEstimate,
    DualBoundResult,
    LambdaGrid,
    QuadratureGrid,
    ThreatModel,
    WorstDelta,
    discrepancy_gaussian_closed_form,
    discrepancy_laplace_closed_form,
    discrepancy_mc,
    discrepancy_quadrature,
    dual_lower_bound,
    hoeffding_epsilon,
    worst_delta,
)
from .errors import (
    ConfigError,
    DomainError,
    EngineError,
    SamplerAbortError,
    SingularityError,
    TransportError,
    UnsupportedError,
)
from .families import (
    RadiusStats,
    SampleBatch,
    SmoothingFamily,
    log_density_ratio_shift,
    log_unnormalized_density,
    matched_sigma,
    radius_stats,
    sample,
    sample_chunks,
)
from .rng import RandomStream
from .special import (
    gamma_sample,
    log_gamma,
    reg_incomplete_beta,
    reg_incomplete_beta_inverse,
    std_normal_cdf,
    std_normal_quantile,
)

__all__ = [
    "__version__",
    "BallIndicator",
    "BinomialEvidence",
    "Certificate",
    "ConfidenceBudget",
    "ConfigError",
    "Constant",
    "DiscrepancyEstimate",
    "DomainError",
    "DualBoundResult",
    "EngineError",
    "ExternalClassifier",
    "Halfspace",
    "LambdaGrid",
    "QuadratureGrid",
    "RadiusStats",
    "RandomStream",
    "SampleBatch",
    "SamplerAbortError",
    "SingularityError",
    "SmoothingFamily",
    "ThreatModel",
    "TransportError",
    "UnsupportedError",
    "WorstDelta",
    "certified_radius_search",
    "certify",
    "certify_practical",
    "clopper_pearson_lower",
    "cohen_bound",
    "cohen_radius",
    "discrepancy_gaussian_closed_form",
    "discrepancy_laplace_closed_form",
    "discrepancy_mc",
    "discrepancy_quadrature",
    "dual_lower_bound",
    "evaluate",
    "exact_smoothed_value",
    "gamma_sample",
    "gaussian_bilateral_radius",
    "hoeffding_epsilon",
    "log_density_ratio_shift",
    "log_gamma",
    "log_unnormalized_density",
    "matched_sigma",
    "radius_stats",
    "reg_incomplete_beta",
    "reg_incomplete_beta_inverse",
    "sample",
    "sample_chunks",
    "std_normal_cdf",
    "std_normal_quantile",
    "success_counts",
    "teng_bound",
    "teng_radius",
    "worst_delta",
]
