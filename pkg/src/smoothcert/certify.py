"""Closed-form certifiers and the end-to-end certification pipelines.

The closed forms cover Gaussian smoothing under l2 threats, Laplacian
smoothing under l1 threats, and the bilateral Gaussian radius. The
pipelines estimate p0 from classifier samples (exact one-sided
Clopper-Pearson), then maximize the dual bound over the lambda grid;
a certificate is issued when the bound clears 1/2.

Confidence accounting: the total budget splits into the p0 test and
the Monte Carlo discrepancy stage (alpha_p0 + alpha_mc <= alpha_total),
and the overall guarantee holds by the union bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import BinomialEvidence, Classifier, success_counts
from .discrepancy import (
    DualBoundResult,
    LambdaGrid,
    ThreatModel,
    discrepancy_mc,
    dual_lower_bound,
    worst_delta,
)
from .errors import DomainError
from .families import SmoothingFamily
from .rng import RandomStream
from .special import (
    reg_incomplete_beta_inverse,
    std_normal_cdf,
    std_normal_quantile,
)

Probability = float

CERTIFIED = "certified"
NOT_CERTIFIED = "not_certified"
ABSTAIN = "abstain"


@dataclass(frozen=True)
class ConfidenceBudget:
    """Split of the total failure probability across pipeline stages."""

    alpha_total: float
    alpha_p0: float
    alpha_mc: float

    def __post_init__(self) -> None:
        for name in ("alpha_total", "alpha_p0", "alpha_mc"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must be in (0, 1), got {v}")
        if self.alpha_p0 + self.alpha_mc > self.alpha_total + 1e-15:
            raise DomainError(
                f"alpha_p0 + alpha_mc = {self.alpha_p0 + self.alpha_mc} exceeds "
                f"alpha_total = {self.alpha_total}"
            )

    @classmethod
    def split(cls, alpha_total: float) -> "ConfidenceBudget":
        """Default even split between the p0 test and the MC stage."""
        return cls(alpha_total=alpha_total, alpha_p0=alpha_total / 2.0, alpha_mc=alpha_total / 2.0)


@dataclass(frozen=True)
class Certificate:
    """End-to-end outcome of certifying one input."""

    input_id: str
    status: str  # certified | not_certified | abstain
    p0_lower: float
    bound: float
    lambda_star: float
    threat: ThreatModel
    family: SmoothingFamily
    budget: ConfidenceBudget
    n1: int
    n2: int
    dual: DualBoundResult | None = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if self.status not in (CERTIFIED, NOT_CERTIFIED, ABSTAIN):
            raise DomainError(f"unknown certificate status {self.status!r}")
        if self.bound > 1.0 + 1e-12:
            raise DomainError(f"certificate bound {self.bound} exceeds 1")
        if self.status == CERTIFIED and not self.bound > 0.5:
            raise DomainError("certified certificate requires bound > 1/2")

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        return {
            "input_id": self.input_id,
            "status": self.status,
            "certified": self.certified,
            "p0_lower": self.p0_lower,
            "bound": self.bound,
            "lambda_star": self.lambda_star,
            "threat": {"norm": self.threat.norm, "radius": self.threat.radius},
            "family": self.family.describe(),
            "budget": {
                "alpha_total": self.budget.alpha_total,
                "alpha_p0": self.budget.alpha_p0,
                "alpha_mc": self.budget.alpha_mc,
            },
            "sample_counts": {"n1": self.n1, "n2": self.n2},
        }


# ---------------------------------------------------------------------------
# closed forms


def clopper_pearson_lower(evidence: BinomialEvidence, alpha: float) -> Probability:
    """Exact one-sided lower confidence bound for a binomial proportion.

    Solves the Beta quantile relation: the bound is the alpha-quantile
    of Beta(successes, trials - successes + 1); coverage of the true p
    is at least 1 - alpha. Zero successes give 0.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    s, n = evidence.successes, evidence.trials
    if s == 0:
        return 0.0
    if s == n:
        return alpha ** (1.0 / n)
    return reg_incomplete_beta_inverse(s, n - s + 1.0, alpha)


def cohen_bound(p0: Probability, sigma: float, r: float) -> Probability:
    """Gaussian/l2 closed-form lower bound Phi(Phi^-1(p0) - r/sigma).

    Saturates to exactly 0.0 or 1.0 at p0 in {0, 1}; the value itself
    is the flag for that degenerate case.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if not r >= 0.0:
        raise DomainError(f"r must be >= 0, got {r}")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must be in [0, 1], got {p0}")
    if p0 == 0.0:
        return 0.0
    if p0 == 1.0:
        return 1.0
    return std_normal_cdf(std_normal_quantile(p0) - r / sigma)


def cohen_radius(p0: Probability, sigma: float) -> float:
    """Certified l2 radius sigma * Phi^-1(p0); negative means p0 <= 1/2.

    Saturates to +-inf at p0 in {0, 1}.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must be in [0, 1], got {p0}")
    if p0 == 0.0:
        return -math.inf
    if p0 == 1.0:
        return math.inf
    return sigma * std_normal_quantile(p0)


def _teng_threshold(b: float, r: float) -> float:
    return 1.0 - 0.5 * math.exp(-r / b)


def teng_bound(p0: Probability, b: float, r: float) -> float:
    """Laplacian/l1 closed-form lower bound, piecewise in p0.

    Above the threshold 1 - e^{-r/b}/2 the bound is
    1 - e^{r/b} (1 - p0), below it e^{-r/b} / (4 (1 - p0)); both
    branches cross 1/2 exactly at r = -b ln(2 (1 - p0)).
    """
    if not b > 0.0:
        raise DomainError(f"b must be > 0, got {b}")
    if not r >= 0.0:
        raise DomainError(f"r must be >= 0, got {r}")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must be in [0, 1], got {p0}")
    if p0 == 1.0:
        return 1.0
    if p0 >= _teng_threshold(b, r):
        return 1.0 - math.exp(r / b) * (1.0 - p0)
    return 0.5 * math.exp(-r / b - math.log(2.0 * (1.0 - p0)))


def teng_radius(p0: Probability, b: float, cap: float = math.inf) -> float:
    """Certified l1 radius -b ln(2 (1 - p0)).

    Non-positive for p0 <= 1/2 (the not-certifiable signal); saturates
    to ``cap`` as p0 -> 1.
    """
    if not b > 0.0:
        raise DomainError(f"b must be > 0, got {b}")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must be in [0, 1], got {p0}")
    if p0 == 1.0:
        return cap
    return min(cap, -b * math.log(2.0 * (1.0 - p0)))


def gaussian_bilateral_radius(pa: Probability, pb: Probability, sigma: float) -> float:
    """Two-class Gaussian radius sigma/2 (Phi^-1(pA) - Phi^-1(pB)).

    Non-positive when pA <= pB (not certifiable). With pB = 1 - pA this
    reduces to the unilateral radius sigma * Phi^-1(pA).
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    for name, v in (("pa", pa), ("pb", pb)):
        if not 0.0 < v < 1.0:
            raise DomainError(f"{name} must be in (0, 1), got {v}")
    return 0.5 * sigma * (std_normal_quantile(pa) - std_normal_quantile(pb))


# ---------------------------------------------------------------------------
# pipelines


def _abstain_certificate(
    input_id: str,
    p0_lower: float,
    threat: ThreatModel,
    family: SmoothingFamily,
    budget: ConfidenceBudget,
    n1: int,
    n2: int,
) -> Certificate:
    return Certificate(
        input_id=input_id,
        status=ABSTAIN,
        p0_lower=p0_lower,
        bound=0.0,
        lambda_star=0.0,
        threat=threat,
        family=family,
        budget=budget,
        n1=n1,
        n2=n2,
    )


def certify(
    classifier: Classifier,
    x0: np.ndarray,
    family: SmoothingFamily,
    threat: ThreatModel,
    grid: LambdaGrid,
    n1: int,
    n2: int,
    budget: ConfidenceBudget,
    rng: RandomStream,
    workers: int = 1,
    input_id: str = "x0",
) -> Certificate:
    """Full-grid certification (one input).

    Stage 1 draws n1 noise samples, counts classifier successes, and
    lower-bounds p0 at level alpha_p0. Stage 2 runs the dual bound with
    n2 fresh samples at level alpha_mc. Certified iff the bound exceeds
    1/2; if the p0 bound itself cannot clear 1/2 the pipeline abstains
    without spending stage 2.
    """
    evidence = success_counts(classifier, x0, family, n1, rng.child(0))
    p0_lower = clopper_pearson_lower(evidence, budget.alpha_p0)
    if p0_lower <= 0.5:
        return _abstain_certificate(input_id, p0_lower, threat, family, budget, n1, n2)
    dual = dual_lower_bound(
        p0_lower, family, threat, grid, n2, budget.alpha_mc, rng.child(1), workers=workers
    )
    bound = min(dual.bound, 1.0)
    return Certificate(
        input_id=input_id,
        status=CERTIFIED if bound > 0.5 else NOT_CERTIFIED,
        p0_lower=p0_lower,
        bound=bound,
        lambda_star=dual.lambda_star,
        threat=threat,
        family=family,
        budget=budget,
        n1=n1,
        n2=n2,
        dual=dual,
    )


def certify_practical(
    classifier: Classifier,
    x0: np.ndarray,
    family: SmoothingFamily,
    threat: ThreatModel,
    grid: LambdaGrid,
    pilot_counts: tuple[int, int],
    final_counts: tuple[int, int],
    budget: ConfidenceBudget,
    rng: RandomStream,
    workers: int = 1,
    input_id: str = "x0",
) -> Certificate:
    """Two-stage certification: cheap pilot to pick lambda, then commit.

    The pilot estimates the per-lambda bound over the whole grid with
    small counts and selects lambda_hat = argmax; it is purely a
    heuristic and charges no confidence budget. The final stage uses
    fresh samples at the final counts and evaluates only lambda_hat,
    so its Hoeffding term needs no grid union. The final bound is
    rigorous regardless of pilot quality; a bad pilot merely loosens
    it.
    """
    n1_pilot, n2_pilot = pilot_counts
    n1, n2 = final_counts

    pilot_evidence = success_counts(classifier, x0, family, n1_pilot, rng.child(2))
    pilot_p0 = clopper_pearson_lower(pilot_evidence, budget.alpha_p0)
    lambda_hat = grid.values()[0]
    if pilot_p0 > 0.0:
        pilot = dual_lower_bound(
            pilot_p0, family, threat, grid, n2_pilot, budget.alpha_mc, rng.child(3),
            workers=workers,
        )
        lambda_hat = pilot.lambda_star

    evidence = success_counts(classifier, x0, family, n1, rng.child(0))
    p0_lower = clopper_pearson_lower(evidence, budget.alpha_p0)
    if p0_lower <= 0.5:
        return _abstain_certificate(input_id, p0_lower, threat, family, budget, n1, n2)
    delta = worst_delta(threat, family)
    est = discrepancy_mc(
        family, delta.vector, float(lambda_hat), n2, budget.alpha_mc, rng.child(1),
        workers=workers,
    )
    bound = min(float(lambda_hat) * p0_lower - est.upper, 1.0)
    return Certificate(
        input_id=input_id,
        status=CERTIFIED if bound > 0.5 else NOT_CERTIFIED,
        p0_lower=p0_lower,
        bound=bound,
        lambda_star=float(lambda_hat),
        threat=threat,
        family=family,
        budget=budget,
        n1=n1,
        n2=n2,
    )


def certified_radius_search(
    classifier: Classifier,
    x0: np.ndarray,
    family: SmoothingFamily,
    threat_norm: str,
    r_max: float,
    grid: LambdaGrid,
    n1: int,
    n2: int,
    budget: ConfidenceBudget,
    rng: RandomStream,
    iterations: int = 12,
    r_step: float | None = None,
    workers: int = 1,
) -> tuple[float, Certificate | None]:
    """Largest certified radius by bisection on r in [0, r_max].

    The p0 bound is computed once (it does not depend on r) and one
    sample batch is reused across probes: only the shift changes. Every
    probe is a rigorous certificate at its own radius with the MC
    budget split across all probes, so the reported radius (snapped
    down to ``r_step`` if given) was itself certified, not
    interpolated.
    """
    if not r_max > 0.0:
        raise DomainError(f"r_max must be > 0, got {r_max}")
    if iterations < 1:
        raise DomainError(f"iterations must be >= 1, got {iterations}")
    evidence = success_counts(classifier, x0, family, n1, rng.child(0))
    p0_lower = clopper_pearson_lower(evidence, budget.alpha_p0)
    if p0_lower <= 0.5:
        return 0.0, None

    alpha_probe = budget.alpha_mc / iterations
    dual_rng = rng.child(1)
    lo, hi = 0.0, r_max
    best: Certificate | None = None
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        threat = ThreatModel(norm=threat_norm, radius=mid)
        dual = dual_lower_bound(
            p0_lower, family, threat, grid, n2, alpha_probe, dual_rng, workers=workers
        )
        bound = min(dual.bound, 1.0)
        if bound > 0.5:
            lo = mid
            best = Certificate(
                input_id="radius_search",
                status=CERTIFIED,
                p0_lower=p0_lower,
                bound=bound,
                lambda_star=dual.lambda_star,
                threat=threat,
                family=family,
                budget=budget,
                n1=n1,
                n2=n2,
                dual=dual,
            )
        else:
            hi = mid
    radius = lo if best is not None else 0.0
    if r_step is not None and radius > 0.0:
        radius = math.floor(radius / r_step) * r_step
    return radius, best
