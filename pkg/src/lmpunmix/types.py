"""Core matrix containers shared by every module.

Shapes follow the linear mixing model ``Y = A S + V``:

* ``Y`` is ``L x N`` (bands by pixels),
* ``A`` is ``L x c`` (bands by endmembers),
* ``S`` is ``c x N`` (endmembers by pixels).

Pixels are linearized row-major over the image grid: pixel ``k`` lives at
row ``k // width`` and column ``k % width``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

ASC_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes do not line up."""


class InvariantError(ValueError):
    """Raised when a container violates one of its value constraints.

    ``constraint`` names the violated rule and ``index`` locates the
    offending column/row when there is one.
    """

    def __init__(self, constraint: str, message: str, index: Optional[int] = None):
        self.constraint = constraint
        self.index = index
        loc = f" (index {index})" if index is not None else ""
        super().__init__(f"{constraint}: {message}{loc}")


def _as_matrix(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HyperCube:
    """Observed spectra, one column per pixel.

    ``width``/``height`` are optional; when given, ``width * height`` must
    equal the pixel count.  Neighborhood construction needs them.
    """

    data: np.ndarray
    width: Optional[int] = None
    height: Optional[int] = None
    band_wavelengths: Optional[Sequence[float]] = None

    def __post_init__(self):
        arr = _as_matrix(self.data, "HyperCube.data")
        object.__setattr__(self, "data", arr)
        L, N = arr.shape
        if L < 1 or N < 1:
            raise DimensionError("HyperCube needs at least one band and one pixel")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0][1])
            raise InvariantError("finite", "non-finite value in cube", bad)
        if (self.width is None) != (self.height is None):
            raise DimensionError("width and height must be given together")
        if self.width is not None and self.width * self.height != N:
            raise DimensionError(
                f"width*height = {self.width * self.height} does not match N = {N}"
            )
        if self.band_wavelengths is not None:
            wl = tuple(float(w) for w in self.band_wavelengths)
            if len(wl) != L:
                raise DimensionError(f"{len(wl)} wavelengths for {L} bands")
            object.__setattr__(self, "band_wavelengths", wl)

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.data.shape[1]

    @property
    def has_grid(self) -> bool:
        return self.width is not None


@dataclass(frozen=True)
class SignatureMatrix:
    """Endmember spectra as columns (``L x c``), entrywise nonnegative."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data, "SignatureMatrix.data")
        object.__setattr__(self, "data", arr)
        if not np.all(np.isfinite(arr)):
            raise InvariantError("finite", "non-finite signature entry")
        neg = np.argwhere(arr < 0)
        if neg.size:
            raise InvariantError("nonnegative", "negative signature entry", int(neg[0][1]))
        zero_cols = np.flatnonzero(~np.any(arr > 0, axis=0))
        if zero_cols.size:
            raise InvariantError("nonzero-column", "all-zero endmember", int(zero_cols[0]))

    @property
    def n_endmembers(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AbundanceMatrix:
    """Fractional abundances (``c x N``); each column lies on the simplex."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data, "AbundanceMatrix.data")
        object.__setattr__(self, "data", arr)
        check_simplex_columns(arr)

    @property
    def n_endmembers(self) -> int:
        return self.data.shape[0]


def check_simplex_columns(S: np.ndarray, tol: float = ASC_TOL) -> None:
    """Raise :class:`InvariantError` unless every column is on the simplex."""
    if not np.all(np.isfinite(S)):
        col = int(np.argwhere(~np.isfinite(S))[0][1])
        raise InvariantError("finite", "non-finite abundance", col)
    bad = np.argwhere((S < 0) | (S > 1))
    if bad.size:
        raise InvariantError("ANC", "abundance outside [0, 1]", int(bad[0][1]))
    sums = S.sum(axis=0)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if off.size:
        col = int(off[0])
        raise InvariantError("ASC", f"column sums to {sums[col]:.12g}", col)


@dataclass(frozen=True)
class NeighborGraph:
    """Per-pixel neighbor lists (self excluded) with aligned weights."""

    neighbors: tuple
    weights: tuple
    width: int
    height: int
    adjacency: str = "8"

    def __post_init__(self):
        nb = tuple(np.asarray(n, dtype=int) for n in self.neighbors)
        wt = tuple(np.asarray(w, dtype=float) for w in self.weights)
        if len(nb) != len(wt):
            raise DimensionError("neighbors and weights have different lengths")
        for k, (n, w) in enumerate(zip(nb, wt)):
            if n.shape != w.shape:
                raise DimensionError(f"pixel {k}: {n.size} neighbors, {w.size} weights")
            if np.any(n == k):
                raise InvariantError("no-self", "pixel listed as its own neighbor", k)
            if w.size and (np.any(w < 0) or abs(w.sum() - 1.0) > ASC_TOL):
                raise InvariantError("weights", "weights must be >= 0 and sum to 1", k)
        object.__setattr__(self, "neighbors", nb)
        object.__setattr__(self, "weights", wt)

    @property
    def n_pixels(self) -> int:
        return len(self.neighbors)

    def offsets(self):
        return grid_offsets(self.adjacency)

    def dense_weights(self) -> np.ndarray:
        """``N x N`` matrix with ``P[k, j] = rho_kj``."""
        N = self.n_pixels
        P = np.zeros((N, N))
        for k, (n, w) in enumerate(zip(self.neighbors, self.weights)):
            P[k, n] = w
        return P


def grid_offsets(adjacency: str):
    """(drow, dcol) offsets for the named adjacency."""
    if adjacency == "4":
        return [(-1, 0), (0, -1), (0, 1), (1, 0)]
    if adjacency == "8":
        return [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    raise ValueError(f"adjacency must be '4' or '8', got {adjacency!r}")


def grid_neighbors(width: int, height: int, adjacency: str = "8"):
    """Neighbor index arrays for every pixel of a row-major grid."""
    offs = grid_offsets(adjacency)
    out = []
    for k in range(width * height):
        r, c = divmod(k, width)
        nb = [
            (r + dr) * width + (c + dc)
            for dr, dc in offs
            if 0 <= r + dr < height and 0 <= c + dc < width
        ]
        out.append(np.array(nb, dtype=int))
    return out


@dataclass(frozen=True)
class UnmixConfig:
    """All scalar settings of the distributed LMP unmixer.

    ``lam=None`` means the sparsity weight is computed from the data.
    """

    p: float = 2.0
    q1: float = 2.0
    q2: float = 1.0
    mu: float = 0.02
    eta: float = 0.1
    lam: Optional[float] = None
    c: int = 6
    max_iter: int = 200
    epsilon: float = 1e-8
    init: str = "vca-fcls"
    adjacency: str = "8"
    seed: int = 0

    def __post_init__(self):
        for name in ("p", "q1", "q2", "epsilon"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be >= 0, got {self.mu!r}")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be >= 0 or None, got {self.lam!r}")
        if int(self.c) != self.c or self.c < 1:
            raise ValueError(f"c must be a positive integer, got {self.c!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if self.init not in ("random", "vca-fcls"):
            raise ValueError(f"init must be 'random' or 'vca-fcls', got {self.init!r}")
        grid_offsets(self.adjacency)

    def with_(self, **changes) -> "UnmixConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q1": self.q1, "q2": self.q2, "mu": self.mu,
            "eta": self.eta, "lam": self.lam, "c": self.c,
            "max_iter": self.max_iter, "epsilon": self.epsilon,
            "init": self.init, "adjacency": self.adjacency, "seed": self.seed,
        }


def validate_dimensions(Y: HyperCube, A: SignatureMatrix, S: AbundanceMatrix) -> None:
    """Check that ``(Y, A, S)`` form a consistent mixing triple.

    Container invariants are enforced on construction, so only shapes are
    checked here.  Raises :class:`DimensionError` on mismatch.
    """
    L, N = Y.data.shape
    if A.data.shape[0] != L:
        raise DimensionError(f"A has {A.data.shape[0]} bands, Y has {L}")
    c = A.data.shape[1]
    if S.data.shape != (c, N):
        raise DimensionError(f"S has shape {S.data.shape}, expected {(c, N)}")
