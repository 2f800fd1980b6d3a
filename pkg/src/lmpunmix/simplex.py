"""Euclidean projection onto the probability simplex."""
from __future__ import annotations

import numpy as np

# per-entry rounding allowance on the column sum for the feasibility shortcut
FEASIBLE_SLACK = 4 * np.finfo(float).eps


def project_simplex(v) -> np.ndarray:
    """Nearest point of ``{w : w >= 0, sum(w) = 1}`` to ``v``.

    Sort-and-threshold: with ``u`` sorted descending, the support size is the
    largest ``r`` with ``u_r > (sum(u_1..u_r) - 1) / r`` and the output is
    ``max(v - tau, 0)`` for that threshold ``tau``.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    return project_simplex_columns(v[:, None])[:, 0]


def project_simplex_columns(V) -> np.ndarray:
    """Project every column of a ``c x N`` matrix onto the simplex."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("expected a c x N matrix with c >= 1")
    if not np.all(np.isfinite(V)):
        raise ValueError("cannot project non-finite values")
    c = V.shape[0]
    # already feasible columns are their own projection (exact idempotence)
    keep = (V.min(axis=0) >= 0.0) & (np.abs(V.sum(axis=0) - 1.0) <= FEASIBLE_SLACK * c)
    # the projection is shift invariant; working relative to the column max
    # makes exactly representable shifts give bit-identical results
    V0 = V - V.max(axis=0)
    # stable sort so ties are ordered by index
    U = -np.sort(-V0, axis=0, kind="stable")
    css = np.cumsum(U, axis=0) - 1.0
    r = np.arange(1, c + 1)[:, None]
    cond = U - css / r > 0
    # cond is True on a prefix; its length is the support size
    rho = c - np.argmax(cond[::-1], axis=0)
    tau = css[rho - 1, np.arange(V.shape[1])] / rho
    W = np.maximum(V0 - tau, 0.0)
    # remove rounding drift so columns sum to one
    W /= W.sum(axis=0, keepdims=True)
    W[:, keep] = V[:, keep]
    return W
