"""Step-size stability bound and empirical convergence probes.

The mean-error bound for the abundance recursion is::

    0 < mu < 2 / (max_k lambda_max(R_k) + 2 eta - lam)

Two readings of ``R_k`` are computed:

``literal``
    ``R_k = sum_{l in N_k^-} R_a`` with ``R_a = E{a a^T}`` the band average
    of ``a_l^T a_l`` over the rows ``a_l`` of ``A``, i.e. ``A^T A / L``.
    The maximum over ``k`` is attained at the pixel with most neighbors.
``single-node``
    ``R_k = A^T A``, the Hessian of the per-pixel data term, independent of
    the neighborhood.

The reported ``mu_bound`` uses the literal reading.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .types import NeighborGraph, UnmixConfig
from .unmixer import NumericalError, unmix
from .weights import compute_weights


class BoundError(ValueError):
    def __init__(self, max_eigen: float, eta: float, lam: float):
        self.terms = (max_eigen, eta, lam)
        super().__init__(
            f"bound denominator is not positive: max_eigen={max_eigen:.6g}, "
            f"2*eta={2 * eta:.6g}, lambda={lam:.6g}"
        )


def _A(A) -> np.ndarray:
    return np.asarray(getattr(A, "data", A), dtype=float)


def node_covariances(A, graph: NeighborGraph, mode: str = "literal") -> List[np.ndarray]:
    """``R_k`` for every pixel under the chosen reading."""
    Ad = _A(A)
    G = Ad.T @ Ad
    if mode == "single-node":
        return [G] * max(graph.n_pixels, 1)
    if mode != "literal":
        raise ValueError(f"unknown mode {mode!r}")
    Ra = G / Ad.shape[0]
    return [n.size * Ra for n in graph.neighbors]


def max_node_eigenvalue(A, graph: NeighborGraph, mode: str = "literal") -> float:
    Ad = _A(A)
    lam_max = float(np.linalg.eigvalsh(Ad.T @ Ad)[-1])
    if mode == "single-node":
        return lam_max
    if mode != "literal":
        raise ValueError(f"unknown mode {mode!r}")
    deg = max((n.size for n in graph.neighbors), default=0)
    # R_k is a nonnegative multiple of one matrix, so its top eigenvalue scales
    return deg * lam_max / Ad.shape[0]


def step_size_bound(A, graph: NeighborGraph, eta: float, lam: float, mode: str = "literal") -> float:
    """Upper limit on the abundance step size for mean-error stability."""
    top = max_node_eigenvalue(A, graph, mode)
    denom = top + 2.0 * eta - lam
    if not denom > 0:
        raise BoundError(top, eta, lam)
    return 2.0 / denom


@dataclass
class Probe:
    mu: float
    converged: bool
    final_cost: float
    initial_cost: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "mu": self.mu,
            "converged": self.converged,
            "final_cost": self.final_cost,
            "initial_cost": self.initial_cost,
            "degenerate": self.degenerate,
        }


@dataclass
class StabilityReport:
    mu_bound: float
    max_eigen: float
    eta: float
    lam: float
    mu_bound_single_node: float = float("nan")
    max_eigen_single_node: float = float("nan")
    empirical: List[Probe] = field(default_factory=list)

    def to_dict(self):
        return {
            "mu_bound": self.mu_bound,
            "max_eigen": self.max_eigen,
            "eta": self.eta,
            "lambda": self.lam,
            "mu_bound_single_node": self.mu_bound_single_node,
            "max_eigen_single_node": self.max_eigen_single_node,
            "empirical": [p.to_dict() for p in self.empirical],
        }

    @classmethod
    def from_dict(cls, d):
        # float() also reads the "nan"/"inf" strings used for non-finite JSON values
        return cls(
            mu_bound=float(d["mu_bound"]),
            max_eigen=float(d["max_eigen"]),
            eta=float(d["eta"]),
            lam=float(d["lambda"]),
            mu_bound_single_node=float(d["mu_bound_single_node"]),
            max_eigen_single_node=float(d["max_eigen_single_node"]),
            empirical=[Probe(**p) for p in d.get("empirical", [])],
        )


def stability_report(A, graph: NeighborGraph, eta: float, lam: float) -> StabilityReport:
    """Both readings of the bound.

    A reading whose denominator is not positive is reported as NaN (e.g. the
    literal reading on a graph without neighbors, where the sum is empty);
    :class:`BoundError` is raised only when neither reading is usable.
    """
    top = max_node_eigenvalue(A, graph, "literal")
    top1 = max_node_eigenvalue(A, graph, "single-node")
    d, d1 = top + 2.0 * eta - lam, top1 + 2.0 * eta - lam
    if not (d > 0 or d1 > 0):
        raise BoundError(top, eta, lam)
    return StabilityReport(
        mu_bound=2.0 / d if d > 0 else float("nan"),
        max_eigen=top,
        eta=eta,
        lam=lam,
        mu_bound_single_node=2.0 / d1 if d1 > 0 else float("nan"),
        max_eigen_single_node=top1,
    )


def is_converged(trace: Sequence[float], initial: float, window: int = 10, rel: float = 0.01) -> bool:
    """Finite, below the starting cost, and flat over the last ``window`` sweeps."""
    t = np.asarray(trace, dtype=float)
    if t.size == 0 or not np.all(np.isfinite(t)) or not np.isfinite(initial):
        return False
    if not t[-1] < initial:
        return False
    tail = t[-window:]
    return bool(tail.max() - tail.min() < rel * abs(initial))


def convergence_probe(scene, cfg: UnmixConfig, mu_list: Sequence[float], n_iter: int = 100,
                      A=None) -> StabilityReport:
    """Run a short unmix for each step size and label it converged or not.

    The analytic bound is evaluated with ``A`` (default: the scene's true
    signatures) and the neighbor graph of the observed cube.
    """
    Y = scene.cube
    weights = compute_weights(Y, cfg.adjacency, cfg.lam)
    report = stability_report(scene.true_A if A is None else A, weights.graph, cfg.eta, weights.lam)
    for mu in mu_list:
        run_cfg = cfg.with_(mu=float(mu), max_iter=n_iter, epsilon=1e-300)
        try:
            res = unmix(Y, run_cfg, weights=weights)
            init = res.initial_cost
            ok = is_converged(res.cost_trace, init)
            final = res.cost_trace[-1]
        except NumericalError:
            ok, final, init = False, float("inf"), float("nan")
        report.empirical.append(Probe(float(mu), ok, float(final), float(init), degenerate=(mu == 0)))
    return report
