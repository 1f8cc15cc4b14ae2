"""Exact spectral quantities: partial eigendecomposition, coherences, RIP constants."""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .graph import Laplacian
from . import _csv

if TYPE_CHECKING:
    from .sample import SampleSet

__all__ = [
    "AmbiguousBandlimitError",
    "SpectralBasis",
    "SamplingDistribution",
    "partial_eigendecomposition",
    "local_coherence",
    "weighted_coherence",
    "optimal_distribution",
    "uniform_distribution",
    "rip_constants",
    "sample_count_bound",
    "save_distribution",
    "load_distribution",
]

DENSE_LIMIT = 5000
GAP_RTOL = 1e-9
PROB_FLOOR = 1e-15


class AmbiguousBandlimitError(ValueError):
    """lambda_k == lambda_{k+1}: the k-bandlimited subspace is not well defined."""


@dataclass(frozen=True)
class SpectralBasis:
    """First ``k`` eigenpairs of a Laplacian in ascending order.

    ``lambda_next`` holds lambda_{k+1} (``None`` when k == n).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    lambda_next: float | None = None

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class SamplingDistribution:
    """Strictly positive probability vector over the nodes."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("p must be a non-empty vector")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValueError("sampling probabilities must be finite and strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size

    @classmethod
    def from_weights(cls, w: np.ndarray, floor: float = PROB_FLOOR) -> "SamplingDistribution":
        """Normalize nonnegative weights, flooring zeros so every node stays reachable."""
        w = np.asarray(w, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("weights must be finite, nonnegative and not all zero")
        p = w / w.sum()
        if np.any(p < floor):
            warnings.warn(
                f"{int(np.sum(p < floor))} node(s) have probability below {floor:g}; flooring and renormalizing",
                RuntimeWarning,
                stacklevel=2,
            )
            p = np.maximum(p, floor)
            p = p / p.sum()
        # one more pass removes the last ulp of drift from the division
        p = p / math.fsum(p)
        return cls(p)


def _dense_eigh(A: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    return scipy.linalg.eigh(A, subset_by_index=[0, count - 1], driver="evr")


def partial_eigendecomposition(L: Laplacian, k: int) -> SpectralBasis:
    """Orthonormal eigenvectors for the ``k`` smallest eigenvalues of ``L``.

    Raises :class:`AmbiguousBandlimitError` when lambda_k and lambda_{k+1}
    coincide to relative precision 1e-9.
    """
    n = L.n
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    count = min(k + 1, n)
    if n <= DENSE_LIMIT:
        lam, U = _dense_eigh(L.toarray(), count)
    else:
        # shift-invert around a point just below zero targets the low end of the spectrum
        lam, U = scipy.sparse.linalg.eigsh(L.operator.tocsc(), k=count, sigma=-1e-3, which="LM")
        order = np.argsort(lam)
        lam, U = lam[order], U[:, order]
    lam_next = float(lam[k]) if k < n else None
    if lam_next is not None:
        gap = lam_next - lam[k - 1]
        if gap <= GAP_RTOL * max(lam_next, 1.0):
            raise AmbiguousBandlimitError(
                f"lambda_{k} = {lam[k - 1]:.12g} and lambda_{k + 1} = {lam_next:.12g} coincide; "
                "choose a band limit at a spectral gap"
            )
    vals = np.array(lam[:k], dtype=float)
    vecs = np.ascontiguousarray(U[:, :k])
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralBasis(eigenvalues=vals, vectors=vecs, lambda_next=lam_next)


def local_coherence(basis: SpectralBasis) -> np.ndarray:
    """Row norms of U_k, i.e. ``||U_k^T delta_i||_2`` for every node."""
    return np.sqrt(np.einsum("ij,ij->i", basis.vectors, basis.vectors))


def weighted_coherence(basis: SpectralBasis, p: SamplingDistribution) -> float:
    """``max_i p_i^{-1/2} ||U_k^T delta_i||_2``; never smaller than sqrt(k)."""
    if p.n != basis.n:
        raise ValueError(f"distribution has {p.n} entries, basis has {basis.n} rows")
    sq = np.einsum("ij,ij->i", basis.vectors, basis.vectors)
    return float(np.sqrt(np.max(sq / p.p)))


def optimal_distribution(basis: SpectralBasis) -> SamplingDistribution:
    """Squared local coherences divided by k."""
    sq = np.einsum("ij,ij->i", basis.vectors, basis.vectors)
    return SamplingDistribution.from_weights(sq)


def uniform_distribution(n: int) -> SamplingDistribution:
    return SamplingDistribution(np.full(n, 1.0 / n))


def rip_constants(basis: SpectralBasis, omega: "SampleSet", p: SamplingDistribution) -> tuple[float, float]:
    """Lower and upper RIP constants of ``m^-1/2 M P^-1/2`` on span(U_k).

    Works on the ``k x k`` Gram matrix of the re-weighted sampled rows of U_k.
    """
    idx = np.asarray(omega.indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= basis.n):
        raise ValueError("sample indices out of range")
    m, k = idx.size, basis.k
    if m == 0:
        return 1.0, -1.0
    B = basis.vectors[idx] / np.sqrt(p.p[idx])[:, None]
    A = (B.T @ B) / m
    ev = np.linalg.eigvalsh(A)
    lower = 1.0 - float(ev[0])
    upper = float(ev[-1]) - 1.0
    if m < k:
        lower = 1.0
    return lower, upper


def sample_count_bound(nu_squared: float, k: int, delta: float, epsilon: float) -> int:
    """Smallest integer m with ``m >= 3/delta**2 * nu**2 * log(2k/epsilon)``."""
    if not (0 < delta < 1 and 0 < epsilon < 1):
        raise ValueError("delta and epsilon must lie in (0, 1)")
    if k < 1 or nu_squared <= 0:
        raise ValueError("k must be positive and nu_squared positive")
    return int(math.ceil(3.0 / delta**2 * nu_squared * math.log(2.0 * k / epsilon)))


def save_distribution(p: SamplingDistribution, path: str | os.PathLike, comment: str | None = None) -> None:
    _csv.write_rows(
        path,
        ["node_index", "probability"],
        ((i, float(v)) for i, v in enumerate(p.p)),
        comment=comment,
    )


def load_distribution(path: str | os.PathLike) -> SamplingDistribution:
    header, rows = _csv.read_rows(path)
    if header[:2] != ["node_index", "probability"]:
        raise ValueError(f"{path}: expected header node_index,probability")
    idx = np.array([int(r[0]) for r in rows])
    vals = np.array([float(r[1]) for r in rows])
    p = np.empty(idx.size)
    if sorted(idx.tolist()) != list(range(idx.size)):
        raise ValueError(f"{path}: node indices must be 0..n-1")
    p[idx] = vals
    return SamplingDistribution(p)
