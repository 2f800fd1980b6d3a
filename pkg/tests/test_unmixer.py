import numpy as np
import pytest

from lmpunmix.baselines import InitializationError
from lmpunmix.metrics import evaluate
from lmpunmix.simplex import project_simplex_columns
from lmpunmix.types import AbundanceMatrix, HyperCube, NeighborGraph, SignatureMatrix, UnmixConfig
from lmpunmix.unmixer import (NumericalError, abundance_step, fidelity_direction, objective,
                              should_stop, signature_step, unmix)
from lmpunmix.weights import WeightSet, compute_weights
from oracles import (abundance_update_reference, central_difference_gradient, objective_reference,
                     simplex_projection_kkt)


def _instance(rng, L=5, c=3, w=3, h=3, noise=0.05):
    A = rng.uniform(0.1, 1.0, (L, c))
    S = rng.dirichlet(np.ones(c), size=w * h).T
    Y = A @ S + noise * rng.normal(size=(L, w * h))
    cube = HyperCube(np.abs(Y) + 1e-3, width=w, height=h)
    return cube, A, S


def _no_neighbors(lam=0.0, N=1):
    return WeightSet(lam, NeighborGraph(((),) * N, ((),) * N, N, 1))


def _project_kkt(v):
    return simplex_projection_kkt(v)


# --- objective ------------------------------------------------------------------

def test_objective_zero_residual(rng):
    A = rng.random((4, 2))
    S = rng.dirichlet([1, 1], size=3).T
    cfg = UnmixConfig(eta=0.0, lam=0.0, c=2)
    assert objective(A @ S, A, S, _no_neighbors(0.0, 3), cfg) == pytest.approx(0.0, abs=1e-28)


def test_objective_unit_sparsity():
    A = np.array([[0.3], [0.7]])
    cfg = UnmixConfig(eta=0.0, q2=1.0, c=1)
    assert objective(A, A, np.array([[1.0]]), _no_neighbors(1.0), cfg) == 1.0


@pytest.mark.parametrize("p,q1,q2", [(2, 2, 2), (1.75, 2, 1), (1.5, 1, 1.5)])
def test_objective_matches_reference(rng, p, q1, q2):
    cube, A, S = _instance(rng)
    w = compute_weights(cube, lam=0.3)
    cfg = UnmixConfig(p=p, q1=q1, q2=q2, eta=0.2, lam=0.3, c=3)
    ref = objective_reference(cube.data, A, S, w.graph.neighbors, w.graph.weights, 0.2, 0.3, p, q1, q2)
    assert objective(cube, A, S, w, cfg) == pytest.approx(ref, rel=1e-12)


# --- abundance step -------------------------------------------------------------

def test_reduces_to_projected_gradient(rng):
    for _ in range(20):
        cube, A, S = _instance(rng)
        cfg = UnmixConfig(p=2.0, eta=0.0, lam=0.0, mu=0.05, c=3)
        out = abundance_step(cube, A, S, compute_weights(cube, lam=0.0), cfg).data
        E = cube.data - A @ S
        expected = np.column_stack([simplex_projection_kkt(v) for v in (S + 0.05 * A.T @ E).T])
        assert np.max(np.abs(out - expected)) < 1e-12


def test_zero_step_keeps_abundances(rng):
    cube, A, S = _instance(rng)
    cfg = UnmixConfig(p=1.75, mu=0.0, c=3)
    out = abundance_step(cube, A, S, compute_weights(cube), cfg).data
    assert np.max(np.abs(out - S)) < 1e-15


@pytest.mark.parametrize("p,q1,q2,tol", [(2, 2, 2, 1e-10), (1.75, 2, 1, 1e-9), (1.5, 1.5, 1.2, 1e-9)])
def test_matches_term_by_term_reference(rng, p, q1, q2, tol):
    for _ in range(5):
        cube, A, S = _instance(rng)
        w = compute_weights(cube, lam=0.4)
        cfg = UnmixConfig(p=p, q1=q1, q2=q2, mu=0.05, eta=0.3, c=3)
        out = abundance_step(cube, A, S, w, cfg).data
        ref = abundance_update_reference(cube.data, A, S, w.graph.neighbors, w.graph.weights,
                                         0.05, 0.3, 0.4, p, q1, q2, _project_kkt)
        assert np.max(np.abs(out - ref)) < tol


def test_two_pixel_reference(rng):
    A = rng.uniform(0.1, 1, (4, 2))
    S = np.array([[0.3, 0.8], [0.7, 0.2]])
    cube = HyperCube(A @ S + 0.01, width=2, height=1)
    w = compute_weights(cube, lam=0.2)
    cfg = UnmixConfig(p=2, q1=2, q2=2, mu=0.1, eta=0.5, c=2)
    ref = abundance_update_reference(cube.data, A, S, w.graph.neighbors, w.graph.weights,
                                     0.1, 0.5, 0.2, 2, 2, 2, _project_kkt)
    assert np.max(np.abs(abundance_step(cube, A, S, w, cfg).data - ref)) < 1e-12


def test_output_on_simplex_and_defined_at_zero(rng):
    cube, A, _ = _instance(rng)
    S = np.zeros((3, 9))
    S[0] = 1.0
    cfg = UnmixConfig(p=1.5, q1=1.2, q2=1.0, c=3)
    out = abundance_step(cube, A, S, compute_weights(cube), cfg)
    assert isinstance(out, AbundanceMatrix)


def test_no_coupling_is_order_independent(rng):
    cube, A, S = _instance(rng, w=4, h=2)
    cfg = UnmixConfig(p=1.75, eta=0.0, lam=0.2, c=3)
    w = WeightSet(0.2, NeighborGraph(((),) * 8, ((),) * 8, 4, 2))
    perm = rng.permutation(8)
    out = abundance_step(cube, A, S, w, cfg).data
    cube_p = HyperCube(cube.data[:, perm], width=2, height=4)
    out_p = abundance_step(cube_p, A, S[:, perm], w, cfg).data
    assert np.array_equal(out[:, perm], out_p)


def test_non_finite_update_reported(rng):
    cube, A, S = _instance(rng)
    cfg = UnmixConfig(mu=1e308, c=3)
    with pytest.raises(NumericalError, match="pixel"):
        abundance_step(cube, A * 1e10, S, compute_weights(cube), cfg)


@pytest.mark.parametrize("p", [2.0, 1.75, 1.3])
def test_fidelity_gradient(rng, p):
    cube, A, S = _instance(rng, noise=0.3)
    y = cube.data[:, 0]
    # data term of the update is -(1/p) d/ds sum |y - A s|^p
    f = lambda s: np.sum(np.abs(y - A @ s) ** p)
    s0 = S[:, 0]
    g = fidelity_direction(y[:, None], A, s0[:, None], p)[:, 0]
    fd = -central_difference_gradient(f, s0) / p
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5
    if p == 2.0:
        half = lambda s: 0.5 * np.sum((y - A @ s) ** 2)
        assert np.allclose(g, -central_difference_gradient(half, s0), rtol=1e-5, atol=1e-9)


# --- signature step -------------------------------------------------------------

def test_signature_fixed_point(rng):
    A = rng.uniform(0.1, 1, (4, 2))
    S = rng.dirichlet([1, 1], size=6).T
    out = signature_step(A @ S, A, S).data
    assert np.allclose(out, A, rtol=1e-12, atol=0)


def test_signature_zero_absorbed(rng):
    A = rng.uniform(0.1, 1, (4, 2))
    A[2, 1] = 0.0
    S = rng.dirichlet([1, 1], size=6).T
    Y = rng.random((4, 6))
    assert signature_step(Y, A, S).data[2, 1] == 0.0


def test_signature_step_decreases_residual(rng):
    for _ in range(50):
        A = rng.uniform(0.1, 1, (4, 2))
        S = rng.dirichlet([1, 1], size=6).T
        Y = np.abs(A @ S + 0.05 * rng.normal(size=(4, 6)))
        A0 = A * rng.uniform(0.5, 1.5, A.shape)
        before = np.linalg.norm(Y - A0 @ S) ** 2
        after = np.linalg.norm(Y - signature_step(Y, A0, S).data @ S) ** 2
        assert after < before


# --- stopping rule ---------------------------------------------------------------

def test_should_stop():
    assert should_stop(1.0, 1.0, 1e-8)
    assert not should_stop(1.0, 2.0, 1e-8)
    assert should_stop(1.0, 1.0 + 5e-9, 1e-8)


# --- full driver ------------------------------------------------------------------

def _noiseless_scene(seed=3, c=2):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.05, 1.0, (20, c))
    S = rng.dirichlet(np.ones(c) * 0.7, size=64).T
    return HyperCube(A @ S, width=8, height=8), A, S


def test_improves_on_initialization():
    cube, A, S = _noiseless_scene()
    cfg = UnmixConfig(p=2, q1=2, q2=2, mu=0.02, eta=0.1, c=2, max_iter=200, init="random", seed=1)
    res = unmix(cube, cfg)
    start = evaluate(A, S, res.A_init, project_simplex_columns(res.S_init)).rms_sad
    end = evaluate(A, S, res.A, res.S).rms_sad
    assert end < start


def test_single_iteration_trace():
    cube, _, _ = _noiseless_scene()
    res = unmix(cube, UnmixConfig(c=2, max_iter=1))
    assert res.iterations_run == 1 and len(res.cost_trace) == 1 and res.stop_reason == "max-iter"


def test_iterates_respect_constraints():
    cube, _, _ = _noiseless_scene(c=3)
    cfg = UnmixConfig(p=1.75, c=3, init="random")
    for T in (1, 2, 5):
        res = unmix(cube, cfg.with_(max_iter=T))
        assert np.all(res.A.data >= 0)
        assert np.all(res.S.data >= 0) and np.allclose(res.S.data.sum(axis=0), 1, atol=1e-12)


def test_cost_delta_stop():
    cube, _, _ = _noiseless_scene()
    res = unmix(cube, UnmixConfig(c=2, epsilon=1e6))
    assert res.stop_reason == "cost-delta" and res.iterations_run == 1


def test_deterministic():
    cube, _, _ = _noiseless_scene()
    cfg = UnmixConfig(p=1.75, c=2, max_iter=20, init="random", seed=7)
    a, b = unmix(cube, cfg), unmix(cube, cfg)
    assert np.array_equal(a.A.data, b.A.data) and np.array_equal(a.S.data, b.S.data)
    assert a.cost_trace == b.cost_trace


def test_eta_zero_needs_no_grid():
    cube, _, _ = _noiseless_scene()
    flat = HyperCube(cube.data)
    res = unmix(flat, UnmixConfig(c=2, eta=0.0, max_iter=3))
    assert res.iterations_run == 3
    with pytest.raises(ValueError):
        unmix(flat, UnmixConfig(c=2, max_iter=3))


def test_initialization_failure():
    cube = HyperCube(np.ones((5, 9)), width=3, height=3)
    with pytest.raises(InitializationError):
        unmix(cube, UnmixConfig(c=2))


def test_too_many_endmembers():
    cube, _, _ = _noiseless_scene()
    with pytest.raises(ValueError):
        unmix(cube, UnmixConfig(c=30))


def test_divergence_reported_with_iteration():
    cube, _, _ = _noiseless_scene()
    with pytest.raises(NumericalError, match="iteration"):
        unmix(HyperCube(cube.data * 1e150, width=8, height=8),
              UnmixConfig(c=2, mu=1e150, max_iter=50))
