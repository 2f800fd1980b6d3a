"""Spectral and abundance angle distances with optimal endmember matching."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.optimize import linear_sum_assignment


def _half_angle(Uh, Vh) -> np.ndarray:
    # 2 atan2(|u - v|, |u + v|) on unit vectors: accurate near 0 and pi,
    # exactly 0 for identical directions, no domain clamp needed
    return 2.0 * np.arctan2(np.linalg.norm(Uh - Vh, axis=0), np.linalg.norm(Uh + Vh, axis=0))


def _angle(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("angle with a zero vector is undefined")
    return float(_half_angle((u / nu)[:, None], (v / nv)[:, None])[0])


def sad(a, a_hat) -> float:
    """Spectral angle distance (radians)."""
    return _angle(a, a_hat)


def aad(s, s_hat) -> float:
    """Abundance angle distance (radians)."""
    return _angle(s, s_hat)


def column_angles(U, V) -> np.ndarray:
    """Angle between matching columns; columns with zero norm score pi/2."""
    # fixed memory order: numpy's reduction order depends on the layout
    U = np.ascontiguousarray(U, dtype=float)
    V = np.ascontiguousarray(V, dtype=float)
    nu = np.linalg.norm(U, axis=0)
    nv = np.linalg.norm(V, axis=0)
    ok = (nu > 0) & (nv > 0)
    out = np.full(U.shape[1], np.pi / 2)
    out[ok] = _half_angle(U[:, ok] / nu[ok], V[:, ok] / nv[ok])
    return out


def sad_matrix(A_true, A_est) -> np.ndarray:
    """``M[i, j]`` = SAD between true column ``i`` and estimated column ``j``."""
    At = np.ascontiguousarray(getattr(A_true, "data", A_true), dtype=float)
    Ae = np.ascontiguousarray(getattr(A_est, "data", A_est), dtype=float)
    Ut = At / np.linalg.norm(At, axis=0)
    Ue = Ae / np.linalg.norm(Ae, axis=0)
    return np.stack([_half_angle(Ut, Ue[:, [j]]) for j in range(Ue.shape[1])], axis=1)


def match_endmembers(A_true, A_est) -> np.ndarray:
    """Assignment of estimated to true endmembers minimizing total SAD.

    Returns ``m`` with ``m[j]`` the true index matched to estimated column
    ``j``.
    """
    M = sad_matrix(A_true, A_est)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"endmember counts differ: {M.shape}")
    rows, cols = linear_sum_assignment(M)
    m = np.empty(M.shape[1], dtype=int)
    m[cols] = rows
    return m


def rms(values) -> float:
    # sorted so the result does not depend on the order of the values
    v = np.sort(np.asarray(values, dtype=float).ravel())
    return float(np.sqrt(np.mean(v * v)))


@dataclass
class EvalReport:
    per_endmember_sad: List[float]
    per_pixel_aad: List[float]
    rms_sad: float
    rms_aad: float
    mean_sad: float
    mean_aad: float
    matching: List[int] = field(default_factory=list)

    def to_dict(self, include_pixels: bool = False) -> dict:
        d = {
            "per_endmember_sad": list(self.per_endmember_sad),
            "rms_sad": self.rms_sad,
            "rms_aad": self.rms_aad,
            "mean_sad": self.mean_sad,
            "mean_aad": self.mean_aad,
            "matching": list(self.matching),
        }
        if include_pixels:
            d["per_pixel_aad"] = list(self.per_pixel_aad)
        return d


def evaluate(true_A, true_S, est_A, est_S) -> EvalReport:
    """Match endmembers, then score signatures (SAD) and abundances (AAD).

    Estimated abundance rows are reordered with the same matching as the
    signatures before pixel-wise AAD is computed.
    """
    At = np.asarray(getattr(true_A, "data", true_A), dtype=float)
    St = np.asarray(getattr(true_S, "data", true_S), dtype=float)
    Ae = np.asarray(getattr(est_A, "data", est_A), dtype=float)
    Se = np.asarray(getattr(est_S, "data", est_S), dtype=float)
    if At.shape != Ae.shape or St.shape != Se.shape:
        raise ValueError(
            f"shape mismatch: A {At.shape} vs {Ae.shape}, S {St.shape} vs {Se.shape}"
        )
    m = match_endmembers(At, Ae)
    A_al = np.empty(Ae.shape)
    S_al = np.empty(Se.shape)
    A_al[:, m] = Ae
    S_al[m, :] = Se
    sads = column_angles(At, A_al)
    aads = column_angles(St, S_al)
    return EvalReport(
        per_endmember_sad=[float(x) for x in sads],
        per_pixel_aad=[float(x) for x in aads],
        rms_sad=rms(sads),
        rms_aad=rms(aads),
        mean_sad=float(np.mean(np.sort(sads))),
        mean_aad=float(np.mean(np.sort(aads))),
        matching=[int(x) for x in m],
    )


def evaluate_scene(scene, result) -> EvalReport:
    return evaluate(scene.true_A, scene.true_S, result.A, result.S)
