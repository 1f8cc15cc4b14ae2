"""Chebyshev polynomial graph filters applied with Laplacian matvecs only.

All polynomials live on the spectral interval ``[0, lambda_max]`` and are
expanded in Chebyshev polynomials of the affinely mapped variable
``s = 2 t / lambda_max - 1``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial import chebyshev as cheb

from .spectral import SpectralBasis

__all__ = [
    "Damping",
    "PolynomialFilter",
    "estimate_lambda_max",
    "fit_lowpass",
    "fit_function",
    "apply_filter",
    "apply_exact_filter",
    "full_basis",
    "jackson_coefficients",
]

LAMBDA_MAX_SAFETY = 1.01
NONCONVERGED_SAFETY = 1.05


class Damping(str, enum.Enum):
    NONE = "none"
    JACKSON = "jackson"


@dataclass(frozen=True)
class PolynomialFilter:
    """Polynomial spectral response stored as Chebyshev coefficients on [0, lambda_max]."""

    cheb_coeffs: np.ndarray
    lambda_max: float
    cutoff: float | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.cheb_coeffs, dtype=float).ravel()
        if c.size == 0:
            raise ValueError("need at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "cheb_coeffs", c)

    @property
    def degree(self) -> int:
        return self.cheb_coeffs.size - 1

    def response(self, t) -> np.ndarray:
        """Evaluate the scalar response kappa(t)."""
        s = 2.0 * np.asarray(t, dtype=float) / self.lambda_max - 1.0
        return cheb.chebval(s, self.cheb_coeffs)

    @classmethod
    def from_power_coeffs(cls, coeffs, lambda_max: float) -> "PolynomialFilter":
        """Build from monomial coefficients ``kappa(t) = sum_i coeffs[i] * t**i``."""
        conv = Polynomial(coeffs).convert(kind=Chebyshev, domain=[0.0, lambda_max])
        return cls(conv.coef, lambda_max)

    def grid(self, num: int = 1000) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, self.lambda_max, num)
        return t, self.response(t)


def estimate_lambda_max(L, tol: float = 1e-8, max_iters: int = 5000, seed: int | None = 0) -> float:
    """Power-method estimate of the largest Laplacian eigenvalue, inflated by 1%.

    The Rayleigh quotient never exceeds the true value, hence the safety
    factor. If the iteration does not settle within ``max_iters`` the current
    estimate is inflated by 5% instead and a warning is issued.
    """
    n = L.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rq = 0.0
    for _ in range(max_iters):
        w = L @ v
        new_rq = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            # v in the null space; only possible for an edgeless graph
            return LAMBDA_MAX_SAFETY * max(new_rq, 0.0) or 1.0
        v = w / nrm
        if abs(new_rq - rq) <= tol * abs(new_rq):
            return LAMBDA_MAX_SAFETY * new_rq
        rq = new_rq
    warnings.warn(
        f"power method did not converge in {max_iters} iterations; using {NONCONVERGED_SAFETY}x the last estimate",
        RuntimeWarning,
        stacklevel=2,
    )
    return NONCONVERGED_SAFETY * rq


def jackson_coefficients(degree: int) -> np.ndarray:
    """Jackson damping factors g_0..g_d that suppress Gibbs oscillations."""
    d = degree
    alpha = math.pi / (d + 2)
    j = np.arange(d + 1)
    return ((1 - j / (d + 2)) * math.sin(alpha) * np.cos(j * alpha) + (1 / (d + 2)) * math.cos(alpha) * np.sin(j * alpha)) / math.sin(alpha)


def fit_lowpass(
    cutoff: float,
    lambda_max: float,
    degree: int = 100,
    damping: Damping | str = Damping.JACKSON,
) -> PolynomialFilter:
    """Chebyshev expansion of the ideal low-pass response ``1[t <= cutoff]``.

    The coefficients are the exact Chebyshev projections of the step
    function (closed form), optionally multiplied by Jackson factors.
    """
    damping = Damping(damping)
    if not 0 < cutoff < lambda_max:
        raise ValueError(f"need 0 < cutoff < lambda_max, got cutoff={cutoff}, lambda_max={lambda_max}")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    theta_c = math.acos(2.0 * cutoff / lambda_max - 1.0)
    j = np.arange(1, degree + 1)
    c = np.empty(degree + 1)
    c[0] = (math.pi - theta_c) / math.pi
    c[1:] = -2.0 * np.sin(j * theta_c) / (j * math.pi)
    if damping is Damping.JACKSON:
        c *= jackson_coefficients(degree)
    return PolynomialFilter(c, lambda_max, cutoff)


def fit_function(
    func: Callable[[np.ndarray], np.ndarray],
    lambda_max: float,
    degree: int,
    damping: Damping | str = Damping.NONE,
) -> PolynomialFilter:
    """Chebyshev interpolant of an arbitrary response ``func`` on [0, lambda_max]."""
    damping = Damping(damping)
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    c = cheb.chebinterpolate(lambda s: func((s + 1.0) * (lambda_max / 2.0)), degree)
    if damping is Damping.JACKSON:
        c = c * jackson_coefficients(degree)
    return PolynomialFilter(c, lambda_max)


def apply_filter(L, f: PolynomialFilter, signals: np.ndarray) -> np.ndarray:
    """``kappa(L) @ signals`` by the three-term Chebyshev recurrence.

    Uses exactly ``f.degree`` products with ``L``, each on the whole column block.
    """
    X = np.asarray(signals, dtype=float)
    c = f.cheb_coeffs
    out = c[0] * X
    if f.degree == 0:
        return out
    a = 2.0 / f.lambda_max

    def shifted(V):
        # (2/lambda_max) L V - V maps the spectrum onto [-1, 1]
        return a * (L @ V) - V

    t_prev = X
    t_cur = shifted(X)
    out = out + c[1] * t_cur
    for j in range(2, f.degree + 1):
        t_next = 2.0 * shifted(t_cur) - t_prev
        out = out + c[j] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


def apply_exact_filter(basis_full: SpectralBasis, response, signals: np.ndarray) -> np.ndarray:
    """Spectral filtering ``U diag(h(lambda)) U^T x`` with a full eigenbasis (test oracle).

    ``response`` is either a callable evaluated on the eigenvalues or an array
    of per-eigenvalue values.
    """
    if basis_full.k != basis_full.n:
        raise ValueError("exact filtering needs the full eigenbasis (k == n)")
    U = basis_full.vectors
    h = response(basis_full.eigenvalues) if callable(response) else np.asarray(response, dtype=float)
    X = np.asarray(signals, dtype=float)
    coeffs = U.T @ X
    if coeffs.ndim == 1:
        return U @ (h * coeffs)
    return U @ (h[:, None] * coeffs)


def full_basis(L) -> SpectralBasis:
    """Complete eigendecomposition of a small Laplacian, wrapped as a SpectralBasis."""
    A = L.toarray() if hasattr(L, "toarray") else np.asarray(L)
    lam, U = np.linalg.eigh(A)
    return SpectralBasis(eigenvalues=lam, vectors=U, lambda_next=None)
