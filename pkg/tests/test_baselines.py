import numpy as np
import pytest

from lmpunmix.baselines import InitializationError, distributed_unmix, fcls, l_half_nmf, nmf, vca
from lmpunmix.metrics import match_endmembers, sad_matrix
from lmpunmix.types import HyperCube, UnmixConfig
from lmpunmix.unmixer import unmix
from oracles import constrained_ls_enumeration, simplex_grid_search, simplex_projection_kkt


def _nonneg_instance(rng, L=8, c=3, N=30):
    A = rng.uniform(0.05, 1.0, (L, c))
    S = rng.dirichlet(np.ones(c), size=N).T
    return A, S


# --- NMF ----------------------------------------------------------------------

def test_nmf_fixed_point(rng):
    A, S = _nonneg_instance(rng)
    r = nmf(A @ S, 3, T=20, init=(A, S))
    assert max(r.residual_trace) < 1e-12


def test_nmf_rank_one():
    rng = np.random.default_rng(1)
    Y = np.outer(rng.uniform(0.1, 1, 10), rng.uniform(0.1, 1, 15))
    r = nmf(Y, 1, T=500)
    U, s, Vt = np.linalg.svd(Y)
    best = np.linalg.norm(Y - s[0] * np.outer(U[:, 0], Vt[0]))
    assert r.residual_trace[-1] < best + 1e-6


def test_nmf_monotone(rng):
    for _ in range(20):
        Y = rng.random((6, 12))
        r = nmf(Y, 3, T=50, eps=0, seed=int(rng.integers(1000)))
        t = np.array(r.residual_trace)
        assert np.all(np.diff(t) <= 1e-12)


def test_nmf_unpacks_and_is_nonnegative(rng):
    A, S = nmf(rng.random((5, 9)), 2, T=10)
    assert np.all(A.data >= 0) and np.all(S >= 0)


def test_nmf_seeded(rng):
    Y = rng.random((5, 9))
    a, b = nmf(Y, 2, T=10, seed=4), nmf(Y, 2, T=10, seed=4)
    assert np.array_equal(a.S, b.S) and a.residual_trace == b.residual_trace


def test_l_half_zero_lambda_is_nmf(rng):
    Y = rng.random((6, 20))
    a = nmf(Y, 3, T=40, seed=2)
    b = l_half_nmf(Y, 3, T=40, seed=2, lam=0.0)
    assert a.residual_trace == b.residual_trace
    assert np.array_equal(a.A.data, b.A.data) and np.array_equal(a.S, b.S)


def test_l_half_sparser_with_large_lambda():
    rng = np.random.default_rng(5)
    A, S = _nonneg_instance(rng, L=10, c=4, N=200)
    Y = A @ S
    from lmpunmix.weights import sparsity_lambda
    lam = 10 * sparsity_lambda(Y)
    frac = lambda X: np.mean(X < 1e-3)
    assert frac(l_half_nmf(Y, 4, T=300, seed=0, lam=lam).S) > frac(l_half_nmf(Y, 4, T=300, seed=0, lam=0.0).S)


def test_l_half_zero_entry_stays_zero(rng):
    A, S = _nonneg_instance(rng)
    S[1, 4] = 0.0
    r = l_half_nmf(rng.random((8, 30)), 3, T=5, lam=0.5, init=(A, S))
    assert r.S[1, 4] == 0.0


# --- distributed -----------------------------------------------------------------

def _scene(rng, w=5, h=5):
    A, S = _nonneg_instance(rng, L=12, c=3, N=w * h)
    return HyperCube(A @ S + 0.002 * rng.random((12, w * h)), width=w, height=h)


def test_distributed_is_unmix_without_sparsity(rng):
    cube = _scene(rng)
    cfg = UnmixConfig(p=2, q1=2, c=3, max_iter=15)
    a = distributed_unmix(cube, cfg)
    b = unmix(cube, cfg.with_(lam=0.0))
    assert np.array_equal(a.A.data, b.A.data) and np.array_equal(a.S.data, b.S.data)
    assert a.cost_trace == b.cost_trace


def test_distributed_without_coupling_is_per_pixel(rng):
    cube = _scene(rng)
    cfg = UnmixConfig(p=2, eta=0.0, c=3, max_iter=1)
    r = distributed_unmix(cube, cfg)
    A = r.A.data
    S0 = r.S_init
    expected = np.column_stack([
        simplex_projection_kkt(S0[:, k] + 0.02 * A.T @ (cube.data[:, k] - A @ S0[:, k]))
        for k in range(cube.n_pixels)
    ])
    assert np.max(np.abs(r.S.data - expected)) < 1e-12


# --- VCA --------------------------------------------------------------------------

def test_vca_recovers_planted_pure_pixels():
    rng = np.random.default_rng(11)
    A, S = _nonneg_instance(rng, L=30, c=4, N=200)
    S[:, :4] = np.eye(4)
    A_hat = vca(A @ S, 4, seed=0).data
    m = match_endmembers(A, A_hat)
    M = sad_matrix(A, A_hat)
    assert all(M[m[j], j] < 0.05 for j in range(4))


def test_vca_single_endmember(rng):
    X = rng.random((6, 20))
    a = vca(X, 1).data[:, 0]
    Xo = X - X.mean(axis=1, keepdims=True)
    u = np.linalg.svd(Xo @ Xo.T)[0][:, 0]
    assert np.array_equal(a, X[:, np.argmax(np.abs(u @ Xo))])


def test_vca_deterministic_and_errors(rng):
    X = rng.random((6, 20))
    assert np.array_equal(vca(X, 3, seed=2).data, vca(X, 3, seed=2).data)
    with pytest.raises(InitializationError):
        vca(np.ones((4, 10)), 2)
    with pytest.raises(ValueError):
        vca(X, 7)


# --- FCLS -------------------------------------------------------------------------

def test_fcls_indicator(rng):
    A = rng.uniform(0.1, 1, (7, 4))
    S = fcls(A, A).data
    assert np.array_equal(S, np.eye(4))


def test_fcls_two_way_mixture(rng):
    A = rng.uniform(0.1, 1, (7, 2))
    s = fcls(0.5 * A[:, :1] + 0.5 * A[:, 1:], A).data[:, 0]
    # y itself is rounded, so agreement is to machine precision
    assert np.allclose(s, [0.5, 0.5], rtol=0, atol=1e-15)


def test_fcls_matches_support_enumeration(rng):
    for _ in range(30):
        c = int(rng.integers(2, 6))
        A = rng.uniform(0, 1, (8, c))
        y = rng.uniform(0, 1, 8)
        s = fcls(y, A).data[:, 0]
        best, _ = constrained_ls_enumeration(A, y)
        assert np.sum((A @ s - y) ** 2) <= best + 1e-10


def test_fcls_grid_oracle(rng):
    for _ in range(10):
        A = rng.uniform(0, 1, (6, 3))
        y = A @ rng.dirichlet([1, 1, 1]) + 0.05 * rng.normal(size=6)
        s = fcls(y, A).data[:, 0]
        f_grid, _ = simplex_grid_search(A, y)
        assert np.sum((A @ s - y) ** 2) <= f_grid + 1e-8


def test_fcls_on_simplex(rng):
    A = rng.uniform(0, 1, (5, 3))
    S = fcls(rng.normal(size=(5, 40)), A).data
    assert np.all(S >= 0) and np.allclose(S.sum(axis=0), 1.0, atol=1e-12)
