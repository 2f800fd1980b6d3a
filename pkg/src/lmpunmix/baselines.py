"""Comparison and initialization methods.

* plain NMF (Lee-Seung multiplicative updates),
* L1/2-regularized NMF,
* distributed unmixing without the sparsity term,
* VCA endmember extraction,
* FCLS abundance estimation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import nnls

from .simplex import project_simplex
from .types import AbundanceMatrix, HyperCube, SignatureMatrix, UnmixConfig
from .unmixer import MU_FLOOR, UnmixResult, unmix
from .weights import sparsity_lambda

DELTA = 1e-12
# sum-to-one row weight, relative to the largest signature entry
ASC_WEIGHT = 1e3
# abundances below this are candidates for removal from the FCLS support
SUPPORT_TOL = np.sqrt(np.finfo(float).eps)


class InitializationError(ValueError):
    pass


@dataclass
class FactorizationResult:
    """Output of the NMF-family baselines.

    ``S`` is only constrained to be nonnegative, so it is kept as a plain
    array rather than an :class:`AbundanceMatrix`.
    """

    A: SignatureMatrix
    S: np.ndarray
    iterations_run: int
    residual_trace: List[float] = field(default_factory=list)
    stop_reason: str = "max-iter"

    def __iter__(self):
        yield self.A
        yield self.S


def _data(Y) -> np.ndarray:
    return np.asarray(getattr(Y, "data", Y), dtype=float)


def _random_factors(X, c, seed):
    rng = np.random.default_rng(seed)
    L, N = X.shape
    A = rng.uniform(0.0, 1.0, (L, c)) * max(float(X.max()), DELTA)
    S = rng.dirichlet(np.ones(c), size=N).T
    return A, S


def _multiplicative_nmf(X, c, T, eps, seed, lam, init):
    if c > min(X.shape):
        raise ValueError(f"c = {c} exceeds min(L, N) = {min(X.shape)}")
    if init is None:
        A, S = _random_factors(X, c, seed)
    else:
        A, S = (np.array(_data(m)) for m in init)
    Xp = np.maximum(X, 0.0)
    trace = []
    prev = np.linalg.norm(X - A @ S)
    reason = "max-iter"
    for _ in range(T):
        den = A.T @ A @ S
        if lam:
            den = den + 0.5 * lam * np.maximum(S, DELTA) ** -0.5
        S = S * (A.T @ Xp) / np.maximum(den, MU_FLOOR)
        A = A * (Xp @ S.T) / np.maximum(A @ (S @ S.T), MU_FLOOR)
        res = float(np.linalg.norm(X - A @ S))
        trace.append(res)
        if abs(res - prev) < eps:
            reason = "cost-delta"
            break
        prev = res
    return FactorizationResult(SignatureMatrix(A), S, len(trace), trace, reason)


def nmf(Y, c: int, T: int = 200, eps: float = 1e-8, seed: int = 0, init=None) -> FactorizationResult:
    """Lee-Seung multiplicative NMF minimizing ``||Y - AS||_F^2``.

    ``init`` optionally supplies ``(A0, S0)``.  Negative data entries (noise)
    are clipped to zero in the update numerators.
    """
    return _multiplicative_nmf(_data(Y), c, T, eps, seed, 0.0, init)


def l_half_nmf(Y, c: int, T: int = 200, eps: float = 1e-8, seed: int = 0,
               lam: Optional[float] = None, init=None) -> FactorizationResult:
    """NMF with an ``L_1/2`` abundance penalty ``lam * sum S^(1/2)``.

    The abundance update becomes
    ``S <- S * (A^T Y) / (A^T A S + lam/2 S^(-1/2))``.  ``lam=None`` uses
    :func:`~lmpunmix.weights.sparsity_lambda` of the data.
    """
    X = _data(Y)
    if lam is None:
        lam = sparsity_lambda(X)
    return _multiplicative_nmf(X, c, T, eps, seed, float(lam), init)


def distributed_unmix(Y: HyperCube, cfg: UnmixConfig, init=None) -> UnmixResult:
    """Distributed unmixing with the sparsity term switched off."""
    return unmix(Y, cfg.with_(lam=0.0), init=init)


def vca(Y, c: int, seed: int = 0) -> SignatureMatrix:
    """Vertex component analysis (PCA projection branch).

    The data are projected onto their ``c-1`` leading principal directions
    and lifted with a constant coordinate; each endmember is the pixel with
    the largest absolute projection on a random direction orthogonal to the
    endmembers found so far.  Returns the selected observed pixels (clipped
    at zero).
    """
    X = _data(Y)
    L, N = X.shape
    if not 1 <= c <= min(L, N):
        raise ValueError(f"c must be in [1, {min(L, N)}], got {c}")
    mean = X.mean(axis=1, keepdims=True)
    Xo = X - mean
    if not np.any(np.abs(Xo) > 1e-14 * max(1.0, float(np.abs(X).max()))):
        raise InitializationError("data have zero variance")
    U = np.linalg.svd(Xo @ Xo.T / N)[0]
    if c == 1:
        proj = U[:, 0] @ Xo
        return SignatureMatrix(np.maximum(X[:, [int(np.argmax(np.abs(proj)))]], 0.0))
    xp = U[:, : c - 1].T @ Xo
    lift = np.max(np.linalg.norm(xp, axis=0))
    y = np.vstack([xp, np.full((1, N), lift)])

    rng = np.random.default_rng(seed)
    E = np.zeros((c, c))
    E[-1, 0] = 1.0
    idx = np.zeros(c, dtype=int)
    for i in range(c):
        w = rng.random(c)
        f = w - E @ np.linalg.pinv(E) @ w
        f /= np.linalg.norm(f)
        v = f @ y
        idx[i] = int(np.argmax(np.abs(v)))
        E[:, i] = y[:, idx[i]]
    A = np.maximum(X[:, idx], 0.0)
    # a noisy pixel can clip to all zeros; nudge so the column stays usable
    dead = ~np.any(A > 0, axis=0)
    A[:, dead] = DELTA
    return SignatureMatrix(A)


def _eq_ls(A, y, P):
    """Least squares on support ``P`` subject to the entries summing to one."""
    Ap = A[:, P]
    k = len(P)
    if k == 1:
        return np.ones(1)
    if k == 2:
        # s = (t, 1 - t) with t the projection of y - a2 onto a1 - a2
        d = Ap[:, 0] - Ap[:, 1]
        dd = d @ d
        if dd > 0:
            t = d @ (y - Ap[:, 1]) / dd
            return np.array([t, 1.0 - t])
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Ap.T @ Ap
    K[:k, k] = K[k, :k] = 1.0
    rhs = np.append(Ap.T @ y, 1.0)
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


def _fcls_pixel(A, y, Aug, scale, tol=1e-12):
    c = A.shape[1]
    s0, _ = nnls(Aug, np.append(y, scale))
    s = project_simplex(s0)
    P = list(np.flatnonzero(s > 0))
    for _ in range(8 * c):
        z = np.zeros(c)
        z[P] = _eq_ls(A, y, P)
        if np.all(z[P] > 0):
            s = z
            g = A.T @ (A @ s - y)
            nu = -np.mean(g[P])
            pi = g + nu
            pi[P] = np.inf
            j = int(np.argmin(pi))
            if pi[j] >= -tol * max(1.0, np.abs(g).max()):
                break
            P = sorted(P + [j])
            continue
        # step toward z until the first support entry hits zero
        neg = [i for i in P if z[i] <= 0]
        alpha = min(s[i] / (s[i] - z[i]) for i in neg)
        s = s + alpha * (z - s)
        P = [i for i in P if s[i] > 1e-15]
        s[[i for i in range(c) if i not in P]] = 0.0
    s = np.maximum(s, 0.0)
    s /= s.sum()
    # rounding can leave ulp-sized entries on a support that should be smaller
    small = (s > 0) & (s < SUPPORT_TOL)
    if np.any(small):
        Q = list(np.flatnonzero(s >= SUPPORT_TOL))
        t = np.zeros(c)
        t[Q] = _eq_ls(A, y, Q)
        if np.all(t[Q] > 0):
            t /= t.sum()
            r_s, r_t = A @ s - y, A @ t - y
            if r_t @ r_t <= r_s @ r_s + 1e-15 * max(1.0, y @ y):
                s = t
    return s


def fcls(Y, A) -> AbundanceMatrix:
    """Fully constrained least squares abundances, one pixel at a time.

    A weighted sum-to-one row is appended and solved with NNLS; the support
    found that way seeds an exact active-set refinement of the constrained
    problem ``min ||y - A s|| s.t. s >= 0, sum(s) = 1``.
    """
    X = _data(Y)
    Ad = _data(A)
    if X.ndim == 1:
        X = X[:, None]
    scale = ASC_WEIGHT * max(float(np.abs(Ad).max()), DELTA)
    Aug = np.vstack([Ad, np.full((1, Ad.shape[1]), scale)])
    S = np.column_stack([_fcls_pixel(Ad, X[:, k], Aug, scale) for k in range(X.shape[1])])
    return AbundanceMatrix(S)
