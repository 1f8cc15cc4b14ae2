"""Eigendecomposition-free estimation of lambda_k and of the optimal sampling distribution.

Random Gaussian signals are low-pass filtered with a Chebyshev approximation
of the ideal filter. The total filtered energy counts eigenvalues below the
cutoff; the per-node energy estimates the squared local coherence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .filters import Damping, apply_filter, estimate_lambda_max, fit_lowpass
from .spectral import SamplingDistribution

__all__ = [
    "EstimationConfig",
    "EstimationState",
    "EstimationResult",
    "default_num_signals",
    "prepare",
    "count_eigs_below",
    "estimate_lambda_k",
    "estimate_optimal_distribution",
    "run_estimation",
]


def default_num_signals(n: int) -> int:
    return max(1, math.ceil(2.0 * math.log(n)))


@dataclass(frozen=True)
class EstimationConfig:
    """Knobs of the estimator. ``num_signals=None`` means ``ceil(2 ln n)``."""

    num_signals: int | None = None
    precision: float = 0.01
    cheb_degree: int = 100
    seed: int = 0
    max_bisections: int = 60
    damping: Damping = Damping.JACKSON
    lambda_max: float | None = None

    def __post_init__(self) -> None:
        if self.num_signals is not None and self.num_signals < 1:
            raise ValueError("num_signals must be at least 1")
        if not 0 < self.precision < 1:
            raise ValueError("precision must lie in (0, 1)")
        if self.cheb_degree < 1:
            raise ValueError("cheb_degree must be at least 1")
        if self.max_bisections < 1:
            raise ValueError("max_bisections must be at least 1")
        object.__setattr__(self, "damping", Damping(self.damping))


@dataclass
class EstimationState:
    """Random signals and spectral bound shared by every bisection step of one run."""

    signals: np.ndarray
    lambda_max: float


@dataclass
class EstimationResult:
    lambda_k: float
    distribution: SamplingDistribution
    converged: bool
    iterations: int
    count: float
    lambda_max: float
    num_signals: int
    history: list[tuple[float, float, float, float]] = field(default_factory=list)

    def diagnostics(self) -> dict:
        return {
            "lambda_k": self.lambda_k,
            "converged": self.converged,
            "iterations": self.iterations,
            "count": self.count,
            "lambda_max": self.lambda_max,
            "num_signals": self.num_signals,
        }


def prepare(L, cfg: EstimationConfig) -> EstimationState:
    """Draw the random signals (covariance I/L_signals) and bound the spectrum."""
    n = L.shape[0]
    num = cfg.num_signals or default_num_signals(n)
    rng = np.random.default_rng(cfg.seed)
    lmax = cfg.lambda_max
    if lmax is None:
        lmax = estimate_lambda_max(L, seed=rng.integers(2**32))
    R = rng.standard_normal((n, num)) / math.sqrt(num)
    return EstimationState(R, float(lmax))


def _filtered(L, lam: float, state: EstimationState, cfg: EstimationConfig) -> np.ndarray:
    if lam >= state.lambda_max:
        return state.signals
    lam = max(lam, 1e-12 * state.lambda_max)
    f = fit_lowpass(lam, state.lambda_max, cfg.cheb_degree, cfg.damping)
    return apply_filter(L, f, state.signals)


def count_eigs_below(L, lam: float, cfg: EstimationConfig, filtered_cache: EstimationState | None = None) -> float:
    """Filtered-signal energy, an estimate of ``#{j : lambda_j <= lam}``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    state = filtered_cache if filtered_cache is not None else prepare(L, cfg)
    Y = _filtered(L, lam, state, cfg)
    return float(np.sum(Y * Y))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def run_estimation(L, k: int, cfg: EstimationConfig = EstimationConfig(), state: EstimationState | None = None) -> EstimationResult:
    """Bisection on the cutoff until the rounded energy equals k and the bracket is tight."""
    n = L.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    state = state if state is not None else prepare(L, cfg)
    lo, hi = 0.0, state.lambda_max
    lam = hi / 2.0
    Y = _filtered(L, lam, state, cfg)
    count = float(np.sum(Y * Y))
    history = [(lo, hi, lam, count)]
    it = 0
    converged = True
    while _round_half_up(count) != k or abs(hi - lo) > cfg.precision * hi:
        if it >= cfg.max_bisections:
            converged = False
            break
        if _round_half_up(count) >= k:
            hi = lam
        else:
            lo = lam
        lam = 0.5 * (lo + hi)
        Y = _filtered(L, lam, state, cfg)
        count = float(np.sum(Y * Y))
        it += 1
        history.append((lo, hi, lam, count))
    if not converged:
        warnings.warn(
            f"lambda_k bisection stopped after {cfg.max_bisections} steps without convergence "
            f"(rounded count {_round_half_up(count)} vs k={k})",
            RuntimeWarning,
            stacklevel=2,
        )
    energy = np.sum(Y * Y, axis=1)
    dist = SamplingDistribution.from_weights(energy)
    return EstimationResult(
        lambda_k=lam,
        distribution=dist,
        converged=converged,
        iterations=it,
        count=count,
        lambda_max=state.lambda_max,
        num_signals=state.signals.shape[1],
        history=history,
    )


def estimate_lambda_k(L, k: int, cfg: EstimationConfig = EstimationConfig()) -> tuple[float, EstimationResult]:
    res = run_estimation(L, k, cfg)
    return res.lambda_k, res


def estimate_optimal_distribution(L, k: int, cfg: EstimationConfig = EstimationConfig()) -> SamplingDistribution:
    return run_estimation(L, k, cfg).distribution
