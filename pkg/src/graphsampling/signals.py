"""Test signals on graphs."""

from __future__ import annotations

import os

import numpy as np

from . import _csv
from .spectral import SpectralBasis

__all__ = ["random_bandlimited", "project_bandlimited", "save_signal", "load_signal"]


def random_bandlimited(basis: SpectralBasis, seed=None) -> np.ndarray:
    """Unit-norm signal ``U_k g`` with standard Gaussian Fourier coefficients ``g``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = basis.vectors @ rng.standard_normal(basis.k)
    return x / np.linalg.norm(x)


def project_bandlimited(basis: SpectralBasis, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection ``U_k U_k^T x`` onto the k-bandlimited subspace."""
    U = basis.vectors
    return U @ (U.T @ np.asarray(x, dtype=float))


def save_signal(x: np.ndarray, path: str | os.PathLike, comment: str | None = None) -> None:
    _csv.write_rows(path, ["node_index", "value"], ((i, float(v)) for i, v in enumerate(x)), comment=comment)


def load_signal(path: str | os.PathLike) -> np.ndarray:
    header, rows = _csv.read_rows(path)
    if header[:2] != ["node_index", "value"]:
        raise ValueError(f"{path}: expected header node_index,value")
    idx = np.array([int(r[0]) for r in rows])
    x = np.empty(idx.size)
    x[idx] = [float(r[1]) for r in rows]
    return x
