"""Random node sampling, noisy measurements and the P_Omega^{-1/2} re-weighting."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _csv
from .spectral import SamplingDistribution

__all__ = [
    "SampleSet",
    "Measurement",
    "ReweightedOperator",
    "draw_with_replacement",
    "draw_without_replacement_uniform",
    "measure",
    "measure_with_noise",
    "reweighted_operator",
    "save_sample_set",
    "load_sample_set",
    "save_measurement",
    "load_measurement",
]


@dataclass(frozen=True)
class SampleSet:
    """Ordered multiset of sampled nodes together with their sampling probabilities.

    ``probs[j]`` is the probability of node ``indices[j]`` under the
    distribution the set was drawn from.
    """

    indices: np.ndarray
    probs: np.ndarray
    n: int
    with_replacement: bool = True

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        pr = np.asarray(self.probs, dtype=float).ravel()
        if idx.shape != pr.shape:
            raise ValueError("indices and probs must have the same length")
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.n:
                raise ValueError(f"sample indices must lie in [0, {self.n})")
            if np.any(pr <= 0):
                raise ValueError("per-sample probabilities must be positive")
        if not self.with_replacement and np.unique(idx).size != idx.size:
            raise ValueError("a set drawn without replacement cannot contain repeats")
        idx.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probs", pr)

    @property
    def m(self) -> int:
        return self.indices.size

    def __len__(self) -> int:
        return self.m

    def distinct(self) -> np.ndarray:
        return np.unique(self.indices)

    def effective_rate(self) -> float:
        """Fraction of distinct nodes measured."""
        return self.distinct().size / self.n


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    sample_set: SampleSet
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        y = np.asarray(self.values, dtype=float)
        if y.shape[0] != self.sample_set.m:
            raise ValueError(f"{y.shape[0]} values for {self.sample_set.m} samples")
        object.__setattr__(self, "values", y)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_with_replacement(p: SamplingDistribution, m: int, seed=None) -> SampleSet:
    """``m`` i.i.d. draws with ``P(omega_j = i) = p_i``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    rng = _rng(seed)
    idx = rng.choice(p.n, size=m, replace=True, p=p.p) if m else np.empty(0, dtype=np.int64)
    return SampleSet(idx, p.p[idx], p.n, with_replacement=True)


def draw_without_replacement_uniform(n: int, m: int, seed=None) -> SampleSet:
    """Uniform random ``m``-subset; every sample carries probability 1/n.

    Only the uniform distribution is supported here: no embedding guarantee
    is known for non-uniform sampling without replacement.
    """
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    rng = _rng(seed)
    idx = rng.permutation(n)[:m]
    return SampleSet(idx, np.full(m, 1.0 / n), n, with_replacement=False)


def measure(x: np.ndarray, omega: SampleSet, sigma: float = 0.0, seed=None) -> Measurement:
    """``y_j = x[omega_j] + eta_j`` with fresh i.i.d. N(0, sigma^2) noise per sample."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = x[omega.indices].copy()
    if sigma > 0:
        rng = _rng(seed)
        y += sigma * rng.standard_normal(y.shape)
    return Measurement(y, omega, float(sigma))


def measure_with_noise(x: np.ndarray, omega: SampleSet, noise: np.ndarray) -> Measurement:
    """Deterministic variant: add an explicit per-sample noise vector."""
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape[0] != omega.m:
        raise ValueError("noise must have one entry per sample")
    return Measurement(x[omega.indices] + noise, omega, float("nan"))


class ReweightedOperator:
    """The map ``v -> P_Omega^{-1/2} v`` on sample space and its adjoint into node space.

    ``adjoint`` computes ``M^T P_Omega^{-1/2} v``; repeated nodes accumulate.
    """

    def __init__(self, omega: SampleSet):
        self.omega = omega
        self.weights = 1.0 / np.sqrt(omega.probs)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.weights * v if v.ndim == 1 else self.weights[:, None] * v

    def sample(self, x: np.ndarray) -> np.ndarray:
        """``P_Omega^{-1/2} M x``."""
        return self.apply(np.asarray(x)[self.omega.indices])

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        wv = self.apply(v)
        if wv.ndim == 1:
            return np.bincount(self.omega.indices, weights=wv, minlength=self.omega.n)
        out = np.zeros((self.omega.n, wv.shape[1]))
        np.add.at(out, self.omega.indices, wv)
        return out

    def node_weights(self) -> np.ndarray:
        """Diagonal of ``M^T P_Omega^{-1} M``: count_i / p_i at sampled nodes, 0 elsewhere."""
        return np.bincount(self.omega.indices, weights=self.weights**2, minlength=self.omega.n)

    def operator_norm(self) -> float:
        """Exact ``||M P^{-1/2}||_2 = max_i sqrt(count_i / p_i)``."""
        if self.omega.m == 0:
            return 0.0
        return float(np.sqrt(self.node_weights().max()))


def reweighted_operator(omega: SampleSet) -> ReweightedOperator:
    return ReweightedOperator(omega)


def save_sample_set(omega: SampleSet, path: str | os.PathLike, comment: str | None = None) -> None:
    meta = f"n={omega.n} with_replacement={int(omega.with_replacement)}"
    comment = f"{comment}\n{meta}" if comment else meta
    _csv.write_rows(
        path,
        ["position", "node_index", "probability"],
        ((j, int(i), float(p)) for j, (i, p) in enumerate(zip(omega.indices, omega.probs))),
        comment=comment,
    )


def _read_meta(path) -> dict[str, str]:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    meta[key] = val
    return meta


def load_sample_set(path: str | os.PathLike, n: int | None = None) -> SampleSet:
    header, rows = _csv.read_rows(path)
    if header[:3] != ["position", "node_index", "probability"]:
        raise ValueError(f"{path}: expected header position,node_index,probability")
    rows = sorted(rows, key=lambda r: int(r[0]))
    idx = np.array([int(r[1]) for r in rows], dtype=np.int64)
    pr = np.array([float(r[2]) for r in rows])
    meta = _read_meta(path)
    if n is None:
        if "n" not in meta:
            raise ValueError(f"{path}: node count unknown; pass n explicitly")
        n = int(meta["n"])
    wr = meta.get("with_replacement", "1") != "0"
    return SampleSet(idx, pr, n, with_replacement=wr)


def save_measurement(y: Measurement, path: str | os.PathLike, comment: str | None = None) -> None:
    omega = y.sample_set
    meta = f"n={omega.n} with_replacement={int(omega.with_replacement)} sigma={y.noise_sigma!r}"
    comment = f"{comment}\n{meta}" if comment else meta
    _csv.write_rows(
        path,
        ["position", "node_index", "probability", "value"],
        (
            (j, int(i), float(p), float(v))
            for j, (i, p, v) in enumerate(zip(omega.indices, omega.probs, y.values))
        ),
        comment=comment,
    )


def load_measurement(path: str | os.PathLike, n: int | None = None) -> Measurement:
    header, rows = _csv.read_rows(path)
    if header[:4] != ["position", "node_index", "probability", "value"]:
        raise ValueError(f"{path}: expected header position,node_index,probability,value")
    rows = sorted(rows, key=lambda r: int(r[0]))
    meta = _read_meta(path)
    if n is None:
        if "n" not in meta:
            raise ValueError(f"{path}: node count unknown; pass n explicitly")
        n = int(meta["n"])
    omega = SampleSet(
        np.array([int(r[1]) for r in rows], dtype=np.int64),
        np.array([float(r[2]) for r in rows]),
        n,
        with_replacement=meta.get("with_replacement", "1") != "0",
    )
    sigma = float(meta.get("sigma", "nan"))
    return Measurement(np.array([float(r[3]) for r in rows]), omega, sigma)
