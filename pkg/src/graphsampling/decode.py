"""Reconstruction of bandlimited signals from weighted samples.

Two decoders are provided: a weighted least-squares fit inside span(U_k)
(needs an eigenbasis) and a Laplacian-regularized least-squares solved by
conjugate gradient (needs only Laplacian matvecs).
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from . import _csv
from .sample import Measurement, ReweightedOperator, SampleSet
from .spectral import SamplingDistribution, SpectralBasis

__all__ = [
    "RegularizerSpec",
    "ErrorDecomposition",
    "DecodeResult",
    "standard_decode",
    "efficient_decode",
    "decompose_error",
    "bound_standard",
    "bound_efficient_inband",
    "bound_efficient_outband",
    "optimal_gamma_inband",
    "m_max_bounds",
    "save_reconstruction",
]


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty ``gamma * z^T L^power z``."""

    power: int = 1
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if int(self.power) != self.power or self.power < 1:
            raise ValueError("power must be a positive integer")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def g(self, t):
        return np.asarray(t, dtype=float) ** self.power


@dataclass(frozen=True)
class ErrorDecomposition:
    total: float
    inband: float
    outband: float


@dataclass
class DecodeResult:
    """Reconstructed signal plus solver diagnostics.

    ``ok`` is False for a rank-deficient standard decode or a CG run that hit
    its iteration cap.
    """

    signal: np.ndarray
    ok: bool = True
    iterations: int = 0
    residual: float = 0.0

    @property
    def degenerate(self) -> bool:
        return not self.ok


def _values(y) -> np.ndarray:
    return y.values if isinstance(y, Measurement) else np.asarray(y, dtype=float)


def standard_decode(basis: SpectralBasis, omega: SampleSet, y) -> DecodeResult:
    """``U_k argmin_a ||P_Omega^{-1/2}(M U_k a - y)||_2``.

    Solved with an SVD-based least-squares routine, which returns the
    minimum-norm coefficients when the sampled basis is rank deficient.
    """
    w = 1.0 / np.sqrt(omega.probs)
    A = basis.vectors[omega.indices] * w[:, None]
    b = w * _values(y)
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    ok = rank == basis.k
    if not ok:
        warnings.warn(
            f"sampled basis has rank {rank} < k={basis.k}; returning the minimum-norm solution",
            RuntimeWarning,
            stacklevel=2,
        )
    res = A @ coef - b
    return DecodeResult(basis.vectors @ coef, ok=ok, residual=float(np.linalg.norm(A.T @ res)))


def _apply_power(L, v: np.ndarray, power: int) -> np.ndarray:
    for _ in range(power):
        v = L @ v
    return v


def efficient_decode(
    L,
    omega: SampleSet,
    y,
    reg: RegularizerSpec,
    solver_tol: float = 1e-10,
    max_iters: int = 5000,
    callback: Callable[[np.ndarray], None] | None = None,
) -> DecodeResult:
    """Solve ``(M^T P_Omega^-1 M + gamma L^l) z = M^T P_Omega^-1 y`` by conjugate gradient.

    ``L^l`` is never formed; each operator application costs ``l`` sparse
    matvecs. ``callback`` receives every CG iterate.
    """
    if not reg.gamma > 0:
        raise ValueError("gamma must be positive")
    n = L.shape[0]
    op = ReweightedOperator(omega)
    d = op.node_weights()
    rhs = op.adjoint(op.apply(_values(y)))
    gamma, power = reg.gamma, reg.power

    def matvec(z):
        z = np.ravel(z)
        return d * z + gamma * _apply_power(L, z, power)

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    iters = 0

    def _cb(xk):
        nonlocal iters
        iters += 1
        if callback is not None:
            callback(xk)

    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return DecodeResult(np.zeros(n), ok=True, iterations=0, residual=0.0)
    z, info = spla.cg(A, rhs, rtol=solver_tol, atol=0.0, maxiter=max_iters, callback=_cb)
    rel = float(np.linalg.norm(matvec(z) - rhs) / bnorm)
    ok = info == 0
    if not ok:
        warnings.warn(
            f"CG stopped after {iters} iterations with relative residual {rel:.3g} (target {solver_tol:g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return DecodeResult(z, ok=ok, iterations=iters, residual=rel)


def decode_objective(L, omega: SampleSet, y, reg: RegularizerSpec, z: np.ndarray) -> float:
    """Value of the regularized least-squares objective at ``z``."""
    op = ReweightedOperator(omega)
    r = op.sample(z) - op.apply(_values(y))
    return float(r @ r + reg.gamma * z @ _apply_power(L, z, reg.power))


def decompose_error(basis: SpectralBasis, x_star: np.ndarray, x_true: np.ndarray) -> ErrorDecomposition:
    """Split the error into the in-band part ``alpha* - x`` and out-of-band part ``beta*``."""
    U = basis.vectors
    alpha = U @ (U.T @ x_star)
    beta = x_star - alpha
    return ErrorDecomposition(
        total=float(np.linalg.norm(x_star - x_true)),
        inband=float(np.linalg.norm(alpha - x_true)),
        outband=float(np.linalg.norm(beta)),
    )


def _check_delta_m(delta: float, m: int) -> None:
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if m < 1:
        raise ValueError("m must be positive")


def bound_standard(delta: float, m: int, weighted_noise_norm: float) -> float:
    """Error bound ``2 / sqrt(m (1 - delta)) * ||P_Omega^-1/2 n||`` of the subspace decoder."""
    _check_delta_m(delta, m)
    return 2.0 / math.sqrt(m * (1.0 - delta)) * weighted_noise_norm


def bound_efficient_inband(
    delta: float,
    m: int,
    gamma: float,
    lk: float,
    lk1: float,
    power: int,
    M_max: float,
    weighted_noise_norm: float,
    x_norm: float,
) -> float:
    """Upper bound on ``||alpha* - x||`` for the regularized decoder with ``g = t**power``."""
    _check_delta_m(delta, m)
    g_k, g_k1 = lk**power, lk1**power
    if not g_k1 > 0:
        raise ValueError("g(lambda_{k+1}) must be positive")
    noise_term = (2.0 + M_max / math.sqrt(gamma * g_k1)) * weighted_noise_norm
    model_term = (M_max * math.sqrt(g_k / g_k1) + math.sqrt(gamma * g_k)) * x_norm
    return (noise_term + model_term) / math.sqrt(m * (1.0 - delta))


def bound_efficient_outband(gamma: float, lk: float, lk1: float, power: int, weighted_noise_norm: float, x_norm: float) -> float:
    """Upper bound on ``||beta*||`` for the regularized decoder with ``g = t**power``."""
    g_k, g_k1 = lk**power, lk1**power
    if not g_k1 > 0:
        raise ValueError("g(lambda_{k+1}) must be positive")
    return weighted_noise_norm / math.sqrt(gamma * g_k1) + math.sqrt(g_k / g_k1) * x_norm


def optimal_gamma_inband(lk: float, lk1: float, power: int, M_max: float, weighted_noise_norm: float, x_norm: float) -> float:
    """Minimizer in gamma of the in-band bound: ``M_max ||P^-1/2 n|| / (||x|| sqrt(g_k g_k1))``."""
    g_k, g_k1 = lk**power, lk1**power
    if not (g_k > 0 and g_k1 > 0 and x_norm > 0):
        raise ValueError("need g(lambda_k) > 0, g(lambda_{k+1}) > 0 and x_norm > 0")
    return M_max * weighted_noise_norm / (x_norm * math.sqrt(g_k * g_k1))


def m_max_bounds(omega: SampleSet, p: SamplingDistribution | None = None) -> dict[str, float]:
    """Candidate constants ``M_max`` with ``||M P_Omega^-1/2||_2 <= M_max``.

    ``exact`` is the operator norm itself, ``max_i sqrt(count_i / p_i)``.
    ``realized`` is ``max_j p_{omega_j}^-1/2``, which equals ``exact`` only
    when no node is drawn twice. ``global`` is ``max_i p_i^-1/2`` over all
    nodes (needs ``p``).
    """
    out = {
        "exact": ReweightedOperator(omega).operator_norm(),
        "realized": float(np.max(1.0 / np.sqrt(omega.probs))) if omega.m else 0.0,
    }
    if p is not None:
        out["global"] = float(np.max(1.0 / np.sqrt(p.p)))
    return out


def save_reconstruction(x: np.ndarray, path: str | os.PathLike, comment: str | None = None) -> None:
    _csv.write_rows(path, ["node_index", "value"], ((i, float(v)) for i, v in enumerate(x)), comment=comment)
