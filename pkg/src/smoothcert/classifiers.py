"""Black-box classifier abstraction.

Synthetic classifiers (constant, ball indicator, halfspace) are exact
and serve as ground truth in tests and experiments. External models in
any runtime are certified through a line-delimited stdio protocol:

    request:  "EVAL <n> <d>\\n" followed by n lines of d space-separated
              decimal floats (shortest round-trip formatting)
    response: n lines, each "0" or "1", in request order

Only hard labels cross the boundary. A reference worker implementing
the protocol ships as ``python -m smoothcert.eval_worker``.
"""

from __future__ import annotations

import math
import subprocess
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc, gammainc

from .errors import DomainError, TransportError, UnsupportedError
from .families import SmoothingFamily, sample_chunks
from .rng import RandomStream
from .special import log_gamma


@dataclass(frozen=True)
class BinomialEvidence:
    """Success count from evaluating a classifier under smoothing noise."""

    successes: int
    trials: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise DomainError(
                f"successes must be in [0, trials], got {self.successes}/{self.trials}"
            )


@dataclass(frozen=True)
class Constant:
    """f(x) = label everywhere."""

    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DomainError(f"label must be 0 or 1, got {self.label}")

    @property
    def dim(self) -> int | None:
        return None

    def labels(self, points: np.ndarray) -> np.ndarray:
        return np.full(points.shape[0], self.label, dtype=np.int8)


@dataclass(frozen=True)
class BallIndicator:
    """f(x) = 1 inside the closed ball of radius R around center."""

    norm: str
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        if self.norm not in ("l2", "linf"):
            raise DomainError(f"ball norm must be 'l2' or 'linf', got {self.norm!r}")
        if not self.radius >= 0.0:
            raise DomainError(f"ball radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int | None:
        return int(self.center.shape[0])

    def labels(self, points: np.ndarray) -> np.ndarray:
        diff = points - self.center
        if self.norm == "l2":
            dist = np.linalg.norm(diff, axis=1)
        else:
            dist = np.abs(diff).max(axis=1)
        return (dist <= self.radius).astype(np.int8)


@dataclass(frozen=True)
class Halfspace:
    """f(x) = 1 where w . x >= c."""

    w: np.ndarray
    c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.w.ndim != 1 or self.w.shape[0] < 1:
            raise DomainError("halfspace weight must be a nonempty vector")

    @property
    def dim(self) -> int | None:
        return int(self.w.shape[0])

    def labels(self, points: np.ndarray) -> np.ndarray:
        return (points @ self.w >= self.c).astype(np.int8)


class ExternalClassifier:
    """Adapter speaking the EVAL protocol to a child process.

    The child is spawned lazily on first use and kept alive across
    batches; one adapter drives one subprocess. Timeouts, malformed
    response lines, and child death all raise
    :class:`~smoothcert.errors.TransportError` so certification aborts
    loudly instead of silently under-counting.
    """

    def __init__(
        self,
        command: list[str] | tuple[str, ...],
        batch_size: int = 1024,
        timeout_ms: int = 30_000,
        dim: int | None = None,
    ) -> None:
        if batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {batch_size}")
        if timeout_ms < 1:
            raise DomainError(f"timeout_ms must be >= 1, got {timeout_ms}")
        self.command = list(command)
        self.batch_size = batch_size
        self.timeout_ms = timeout_ms
        self._declared_dim = dim
        self._proc: subprocess.Popen | None = None

    @property
    def dim(self) -> int | None:
        return self._declared_dim

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise TransportError(f"failed to spawn classifier worker: {exc}") from exc
        return self._proc

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None

    def __enter__(self) -> "ExternalClassifier":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _exchange(self, block: np.ndarray) -> np.ndarray:
        proc = self._ensure_started()
        n, d = block.shape
        request = [f"EVAL {n} {d}\n"]
        request.extend(" ".join(repr(float(v)) for v in row) + "\n" for row in block)
        timer = threading.Timer(self.timeout_ms / 1000.0, proc.kill)
        timer.start()
        try:
            assert proc.stdin is not None and proc.stdout is not None
            try:
                proc.stdin.write("".join(request))
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"classifier worker closed its input: {exc}") from exc
            out = np.empty(n, dtype=np.int8)
            for i in range(n):
                line = proc.stdout.readline()
                if line == "":
                    raise TransportError(
                        "classifier worker closed its output mid-batch "
                        f"(got {i}/{n} labels; timeout {self.timeout_ms} ms)"
                    )
                token = line.strip()
                if token == "0":
                    out[i] = 0
                elif token == "1":
                    out[i] = 1
                else:
                    raise TransportError(f"malformed response line {i}: {line!r}")
            return out
        finally:
            timer.cancel()

    def labels(self, points: np.ndarray) -> np.ndarray:
        chunks = []
        for start in range(0, points.shape[0], self.batch_size):
            chunks.append(self._exchange(points[start : start + self.batch_size]))
        return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


Classifier = Constant | BallIndicator | Halfspace | ExternalClassifier


def evaluate(classifier: Classifier, points: np.ndarray) -> np.ndarray:
    """Labels in {0,1}^n for an n x d batch of inputs."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise DomainError(f"points must be an n x d matrix, got shape {points.shape}")
    cdim = classifier.dim
    if cdim is not None and cdim != points.shape[1]:
        raise DomainError(
            f"dimension mismatch: classifier expects d={cdim}, points have d={points.shape[1]}"
        )
    return classifier.labels(points)


def success_counts(
    classifier: Classifier,
    x0: np.ndarray,
    family: SmoothingFamily,
    n: int,
    rng: RandomStream,
) -> BinomialEvidence:
    """Count f(x0 + z) = 1 over n smoothing draws.

    Dimensions are validated before any sampling, so a mismatch
    consumes zero samples. Draws stream in fixed-size blocks; the count
    is reproducible for a fixed (seed, stream_id).
    """
    if n < 1:
        raise DomainError(f"success_counts requires n >= 1, got {n}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (family.dim,):
        raise DomainError(f"x0 must have length {family.dim}, got shape {x0.shape}")
    cdim = classifier.dim
    if cdim is not None and cdim != family.dim:
        raise DomainError(
            f"dimension mismatch: classifier expects d={cdim}, family has d={family.dim}"
        )
    successes = 0
    for block in sample_chunks(family, n, rng):
        successes += int(classifier.labels(x0 + block).sum())
    return BinomialEvidence(successes=successes, trials=n)


# ---------------------------------------------------------------------------
# analytic oracle for centered-ball truths


def _radial_cdf(family: SmoothingFamily, x: float) -> float:
    """P(||z|| <= x) for the spherical radius law r^(d-1-k) e^(-r^2/2s^2)."""
    if x <= 0.0:
        return 0.0
    shape = (family.dim - family.k) / 2.0
    return float(gammainc(shape, x * x / (2.0 * family.sigma**2)))


def exact_smoothed_value(
    classifier: BallIndicator,
    x0: np.ndarray,
    family: SmoothingFamily,
    shift: np.ndarray,
) -> float:
    """E_{z ~ pi_0} f(x0 + shift + z) for an l2 ball indicator, to 1e-6.

    Valid for spherically symmetric smoothing (gaussian or
    l2_power_tail). Conditioning on the radius rho reduces the sphere
    average to a Beta CDF in the cosine of the polar angle, leaving a
    1-D integral over the radius law that adaptive quadrature handles:

        P(||mu + z|| <= R) = F(R - a)  +  int p(rho) h(rho) drho

    with a = ||mu||, h the spherical cap fraction, and the integral
    supported on |R - a| <= rho <= R + a.
    """
    if not isinstance(classifier, BallIndicator) or classifier.norm != "l2":
        raise UnsupportedError("exact_smoothed_value supports l2 ball indicators only")
    if family.variant not in ("gaussian", "l2_power_tail"):
        raise UnsupportedError(
            f"exact_smoothed_value supports gaussian/l2_power_tail, got {family.variant}"
        )
    x0 = np.asarray(x0, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if x0.shape != (family.dim,) or shift.shape != (family.dim,):
        raise DomainError(f"x0 and shift must be vectors of length {family.dim}")
    if classifier.dim != family.dim:
        raise DomainError("ball center dimension does not match the family")

    big_r = classifier.radius
    if big_r == 0.0:
        return 0.0
    if math.isinf(big_r):
        return 1.0
    a = float(np.linalg.norm(x0 + shift - classifier.center))
    if a == 0.0:
        return _radial_cdf(family, big_r)

    d, k, sigma = family.dim, family.k, family.sigma
    if d == 1:
        inside_minus = _radial_cdf(family, a + big_r) - _radial_cdf(family, max(a - big_r, 0.0))
        inside_plus = _radial_cdf(family, max(big_r - a, 0.0))
        return 0.5 * inside_minus + 0.5 * inside_plus

    m = d - 1.0 - k
    log_norm = 0.5 * (m - 1.0) * math.log(2.0) + (m + 1.0) * math.log(sigma) + log_gamma(
        (m + 1.0) / 2.0
    )
    half = (d - 1.0) / 2.0

    def integrand(rho: float) -> float:
        t = (big_r * big_r - a * a - rho * rho) / (2.0 * a * rho)
        if t >= 1.0:
            cap = 1.0
        elif t <= -1.0:
            cap = 0.0
        else:
            cap = float(betainc(half, half, 0.5 * (t + 1.0)))
        if cap == 0.0:
            return 0.0
        log_pdf = m * math.log(rho) - rho * rho / (2.0 * sigma * sigma) - log_norm
        return math.exp(log_pdf) * cap

    lo, hi = abs(big_r - a), big_r + a
    core = _radial_cdf(family, big_r - a) if a < big_r else 0.0
    tail, _err = integrate.quad(integrand, lo, hi, epsabs=1e-9, epsrel=1e-9, limit=200)
    return min(1.0, max(0.0, core + tail))
