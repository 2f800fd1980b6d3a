"""Sparsity-constrained distributed LMP unmixing.

Each pixel is a node of a multitask network whose neighbors are its grid
neighbors.  One sweep of the algorithm:

1. multiplicative update of the signatures ``A``;
2. for every pixel, an LMP gradient step on the abundances with a neighbor
   coupling term and an ``L_q`` sparsity term, followed by projection onto
   the probability simplex.

All pixels read the abundances of the previous sweep (Jacobi order), so the
result does not depend on pixel ordering.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .simplex import project_simplex_columns
from .types import AbundanceMatrix, HyperCube, SignatureMatrix, UnmixConfig, NeighborGraph
from .weights import WeightSet, compute_weights

log = logging.getLogger(__name__)

# floor inside |.| and norm denominators raised to negative powers
DELTA = 1e-12
# floor on the multiplicative-update denominator
MU_FLOOR = 1e-12


class NumericalError(FloatingPointError):
    """Non-finite value produced during the iteration."""


@dataclass
class UnmixResult:
    A: SignatureMatrix
    S: AbundanceMatrix
    iterations_run: int
    cost_trace: List[float]
    stop_reason: str
    lam: float = 0.0
    initial_cost: float = float("nan")
    A_init: Optional[np.ndarray] = field(default=None, repr=False)
    S_init: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        assert len(self.cost_trace) == self.iterations_run
        assert self.stop_reason in ("max-iter", "cost-delta")


class PaddedNeighbors:
    """Neighbor lists padded to a fixed width for vectorized sweeps.

    ``index[k]`` holds the neighbors of pixel ``k`` (padding points at ``k``
    itself) and ``weight[k]`` the aligned weights (zero on padding).
    """

    def __init__(self, graph: NeighborGraph):
        N = graph.n_pixels
        m = max((n.size for n in graph.neighbors), default=0)
        self.index = np.tile(np.arange(N)[:, None], (1, max(m, 1)))
        self.weight = np.zeros((N, max(m, 1)))
        for k, (n, w) in enumerate(zip(graph.neighbors, graph.weights)):
            self.index[k, : n.size] = n
            self.weight[k, : n.size] = w


def _as_array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=float)


def _norm_q(D: np.ndarray, q: float, axis=0) -> np.ndarray:
    if q == 2.0:
        return np.sqrt(np.sum(D * D, axis=axis))
    if q == 1.0:
        return np.sum(np.abs(D), axis=axis)
    return np.sum(np.abs(D) ** q, axis=axis) ** (1.0 / q)


def _lq_direction(D: np.ndarray, q: float) -> np.ndarray:
    """Gradient of ``||d||_q`` along axis 0: ``d |d|^(q-2) / ||d||_q^(q-1)``.

    ``|.|`` and the norm are floored at ``DELTA`` so the expression stays
    defined at zero for ``q < 2``.
    """
    norm = np.maximum(_norm_q(D, q), DELTA)
    if q == 2.0:
        return D / norm
    mag = np.maximum(np.abs(D), DELTA)
    return D * mag ** (q - 2.0) / norm ** (q - 1.0)


def objective(Y, A, S, weights: WeightSet, cfg: UnmixConfig) -> float:
    """Global cost: ``||Y - AS||_F^p`` plus neighbor and sparsity penalties."""
    Yd, Ad, Sd = _as_array(Y), _as_array(A), _as_array(S)
    fit = np.linalg.norm(Yd - Ad @ Sd) ** cfg.p
    nb = PaddedNeighbors(weights.graph) if cfg.eta else None
    return _objective(Yd, Ad, Sd, nb, weights.lam, cfg, fit=fit)


def _objective(Y, A, S, nb: Optional[PaddedNeighbors], lam, cfg, fit=None) -> float:
    if fit is None:
        fit = np.linalg.norm(Y - A @ S) ** cfg.p
    neigh = 0.0
    if cfg.eta and nb is not None:
        D = S[:, :, None] - S[:, nb.index]
        neigh = cfg.eta * float(np.sum(nb.weight * _norm_q(D, cfg.q1)))
    sparse = 0.0
    if lam:
        sparse = lam * float(np.sum(_norm_q(S, cfg.q2)))
    J = float(fit) + neigh + sparse
    if not np.isfinite(J):
        raise NumericalError("objective is not finite")
    return J


def fidelity_direction(Y, A, S, p: float) -> np.ndarray:
    """``A^T (|E|^(p-2) * E)`` with ``E = Y - A S``, elementwise over bands.

    Equals ``-(1/p)`` times the gradient of ``sum |E|^p`` with respect to ``S``.
    """
    Y, A, S = _as_array(Y), _as_array(A), _as_array(S)
    E = Y - A @ S
    if p == 2.0:
        return A.T @ E
    return A.T @ (np.maximum(np.abs(E), DELTA) ** (p - 2.0) * E)


def _abundance_update(Y, A, S, nb: Optional[PaddedNeighbors], lam, cfg) -> np.ndarray:
    # overflow is detected below and raised with the pixel index
    with np.errstate(over="ignore", invalid="ignore"):
        V = _unprojected_update(Y, A, S, nb, lam, cfg)
    if not np.all(np.isfinite(V)):
        col = int(np.argwhere(~np.isfinite(V))[0][1])
        raise NumericalError(f"abundance update not finite at pixel {col}")
    return project_simplex_columns(V)


def _unprojected_update(Y, A, S, nb, lam, cfg) -> np.ndarray:
    V = S + cfg.mu * fidelity_direction(Y, A, S, cfg.p)
    if cfg.eta and nb is not None:
        # c x N x m differences to each neighbor
        D = S[:, :, None] - S[:, nb.index]
        # sign as in the published recursion: pushes s_k away from s_j
        push = np.sum(nb.weight * _lq_direction(D, cfg.q1), axis=2)
        V = V + cfg.mu * cfg.eta * push
    if lam:
        V = V - cfg.mu * lam * _lq_direction(S, cfg.q2)
    return V


def abundance_step(Y, A, S, weights: WeightSet, cfg: UnmixConfig) -> AbundanceMatrix:
    """One projected LMP abundance sweep over all pixels.

    Per pixel ``k`` with residual ``e = y_k - A s_k``::

        s_k <- P[ s_k + mu A^T(|e|^(p-2) e)
                  + mu eta sum_j rho_kj g_q1(s_k - s_j)
                  - mu lam g_q2(s_k) ]

    with ``g_q(d) = d |d|^(q-2) / ||d||_q^(q-1)`` (the gradient of
    ``||d||_q``) and ``P`` the simplex projection.  Note the ``+`` on the
    neighbor term: it is the published update, not a descent step on the
    neighbor penalty of :func:`objective`.  Neighbor values come from the
    input ``S``.
    """
    Yd, Ad, Sd = _as_array(Y), _as_array(A), _as_array(S)
    nb = PaddedNeighbors(weights.graph) if cfg.eta else None
    return AbundanceMatrix(_abundance_update(Yd, Ad, Sd, nb, weights.lam, cfg))


def _signature_update(Y, A, S) -> np.ndarray:
    num = Y @ S.T
    den = np.maximum(A @ (S @ S.T), MU_FLOOR)
    # Y can carry slightly negative noisy values; keep A in the nonnegative orthant
    return A * np.maximum(num, 0.0) / den


def signature_step(Y, A, S) -> SignatureMatrix:
    """Multiplicative update ``A <- A * (Y S^T) / (A S S^T)``."""
    return SignatureMatrix(_signature_update(_as_array(Y), _as_array(A), _as_array(S)))


def should_stop(J_new: float, J_old: float, eps: float) -> bool:
    return abs(J_new - J_old) < eps


def initialize(Y: HyperCube, cfg: UnmixConfig):
    """Starting ``(A, S)`` arrays for the configured initialization."""
    from .baselines import InitializationError, fcls, vca

    X = Y.data
    c = cfg.c
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        A0 = rng.uniform(0.0, 1.0, (X.shape[0], c)) * max(float(X.max()), DELTA)
        S0 = rng.dirichlet(np.ones(c), size=X.shape[1]).T
        return A0, S0
    try:
        A0 = vca(Y, c, seed=cfg.seed).data
    except ValueError as exc:
        raise InitializationError(f"VCA failed: {exc}") from exc
    S0 = fcls(Y, A0).data
    return np.array(A0), np.array(S0)


def unmix(Y: HyperCube, cfg: UnmixConfig, init=None, weights: Optional[WeightSet] = None) -> UnmixResult:
    """Estimate signatures and abundances from the observed cube.

    Parameters
    ----------
    Y : HyperCube
        Observed data with grid geometry.
    cfg : UnmixConfig
        Algorithm settings; ``cfg.lam=None`` derives the sparsity weight.
    init : tuple of arrays, optional
        ``(A0, S0)`` to start from instead of ``cfg.init``.
    weights : WeightSet, optional
        Precomputed weights (recomputed from ``Y`` when omitted).

    Returns
    -------
    UnmixResult
    """
    L, N = Y.data.shape
    if cfg.c > min(L, N):
        raise ValueError(f"c = {cfg.c} exceeds min(L, N) = {min(L, N)}")
    if weights is None:
        if cfg.eta:
            weights = compute_weights(Y, cfg.adjacency, cfg.lam)
        else:
            # no neighbor coupling: geometry is not needed
            from .weights import sparsity_lambda
            lam = sparsity_lambda(Y) if cfg.lam is None else float(cfg.lam)
            weights = WeightSet(lam, NeighborGraph((), (), 0, 0, cfg.adjacency))
    lam = weights.lam
    if init is None:
        A, S = initialize(Y, cfg)
    else:
        A, S = (np.array(_as_array(x)) for x in init)
    A_init, S_init = A.copy(), S.copy()
    X = Y.data
    nb = PaddedNeighbors(weights.graph) if cfg.eta else None

    J_old = J_init = _objective(X, A, S, nb, lam, cfg)
    trace: List[float] = []
    reason = "max-iter"
    for it in range(1, cfg.max_iter + 1):
        try:
            A = _signature_update(X, A, S)
            S = _abundance_update(X, A, S, nb, lam, cfg)
            J = _objective(X, A, S, nb, lam, cfg)
        except NumericalError as exc:
            raise NumericalError(f"iteration {it}: {exc}") from exc
        trace.append(J)
        if should_stop(J, J_old, cfg.epsilon):
            reason = "cost-delta"
            break
        J_old = J
    log.debug("unmix stopped after %d iterations (%s)", len(trace), reason)
    return UnmixResult(
        A=SignatureMatrix(A),
        S=AbundanceMatrix(S),
        iterations_run=len(trace),
        cost_trace=trace,
        stop_reason=reason,
        lam=lam,
        initial_cost=J_init,
        A_init=A_init,
        S_init=S_init,
    )
