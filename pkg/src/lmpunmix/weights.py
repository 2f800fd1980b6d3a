"""Data-driven weights: the sparsity weight and neighbor similarity weights."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .types import HyperCube, NeighborGraph, grid_neighbors


class DegenerateNormalizerWarning(UserWarning):
    """A pixel's similarity sum was <= 0; uniform weights were used instead."""


@dataclass(frozen=True)
class WeightSet:
    lam: float
    graph: NeighborGraph

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam!r}")


def sparsity_lambda(Y) -> float:
    """Sparsity weight averaged over bands.

    For each band vector ``x`` (one value per pixel) the Hoyer-type measure
    ``(sqrt(N) - |x|_1 / |x|_2) / sqrt(N - 1)`` is computed; the weight is
    the sum over bands divided by ``sqrt(L)``.  The result lies in
    ``[0, sqrt(L)]``.
    """
    X = Y.data if isinstance(Y, HyperCube) else np.asarray(Y, dtype=float)
    L, N = X.shape
    if N < 2:
        raise ValueError("sparsity weight needs at least two pixels")
    l2 = np.sqrt(np.sum(X * X, axis=1))
    zero = np.flatnonzero(l2 == 0)
    if zero.size:
        raise ValueError(f"band {int(zero[0])} is identically zero")
    l1 = np.sum(np.abs(X), axis=1)
    per_band = (np.sqrt(N) - l1 / l2) / np.sqrt(N - 1)
    # a constant band gives l1/l2 == sqrt(N) up to rounding; clamp that noise
    per_band = np.maximum(per_band, 0.0)
    per_band[np.isclose(l1 / l2, np.sqrt(N), rtol=1e-14, atol=0)] = 0.0
    return float(np.sum(per_band) / np.sqrt(L))


def spectral_similarity(yk, yj) -> float:
    """Cosine of the angle between two spectra (not clamped)."""
    yk = np.asarray(yk, dtype=float)
    yj = np.asarray(yj, dtype=float)
    nk, nj = np.linalg.norm(yk), np.linalg.norm(yj)
    if nk == 0 or nj == 0:
        raise ValueError("similarity of a zero vector is undefined")
    return float(yk @ yj / (nk * nj))


def similarity_weights(Y: HyperCube, adjacency: str = "8") -> NeighborGraph:
    """Normalized cosine similarities between each pixel and its grid neighbors."""
    if not Y.has_grid:
        raise ValueError("cube has no grid geometry; cannot build neighborhoods")
    X = Y.data
    norms = np.linalg.norm(X, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"pixel {int(zero[0])} has an all-zero spectrum")
    U = X / norms
    nbrs = grid_neighbors(Y.width, Y.height, adjacency)
    weights = []
    for k, nb in enumerate(nbrs):
        if nb.size == 0:
            weights.append(np.zeros(0))
            continue
        theta = U[:, nb].T @ U[:, k]
        total = theta.sum()
        if total <= 0:
            warnings.warn(
                f"pixel {k}: similarity sum {total:.3g} <= 0, using uniform weights",
                DegenerateNormalizerWarning,
                stacklevel=2,
            )
            weights.append(np.full(nb.size, 1.0 / nb.size))
        else:
            weights.append(theta / total)
    return NeighborGraph(tuple(nbrs), tuple(weights), Y.width, Y.height, adjacency)


def compute_weights(Y: HyperCube, adjacency: str = "8", lam=None) -> WeightSet:
    """Weights for one run; ``lam=None`` derives the sparsity weight from ``Y``."""
    lam = sparsity_lambda(Y) if lam is None else float(lam)
    return WeightSet(lam, similarity_weights(Y, adjacency))
