import numpy as np
import pytest

from lmpunmix.types import (AbundanceMatrix, DimensionError, HyperCube, InvariantError, NeighborGraph,
                            SignatureMatrix, UnmixConfig, grid_neighbors, validate_dimensions)


def test_consistent_triple_ok():
    A = SignatureMatrix(np.ones((3, 2)))
    S = AbundanceMatrix(np.full((2, 4), 0.5))
    Y = HyperCube(A.data @ S.data)
    validate_dimensions(Y, A, S)


def test_band_mismatch():
    Y = HyperCube(np.ones((4, 4)))
    A = SignatureMatrix(np.ones((3, 2)))
    S = AbundanceMatrix(np.full((2, 4), 0.5))
    with pytest.raises(DimensionError):
        validate_dimensions(Y, A, S)


def test_pixel_mismatch():
    Y = HyperCube(np.ones((3, 4)))
    A = SignatureMatrix(np.ones((3, 2)))
    S = AbundanceMatrix(np.full((2, 5), 0.5))
    with pytest.raises(DimensionError):
        validate_dimensions(Y, A, S)


def test_asc_violation_names_column():
    S = np.full((2, 4), 0.5)
    S[:, 2] = [0.4, 0.4]
    with pytest.raises(InvariantError) as exc:
        AbundanceMatrix(S)
    assert exc.value.constraint == "ASC"
    assert exc.value.index == 2


def test_negative_abundance_rejected():
    S = np.array([[1.2, 0.5], [-0.2, 0.5]])
    with pytest.raises(InvariantError) as exc:
        AbundanceMatrix(S)
    assert exc.value.constraint == "ANC"
    assert exc.value.index == 0


def test_asc_tolerance():
    S = np.array([[0.5, 0.5 + 5e-10], [0.5, 0.5]])
    AbundanceMatrix(S)
    with pytest.raises(InvariantError):
        AbundanceMatrix(np.array([[0.5, 0.5 + 5e-9], [0.5, 0.5]]))


def test_signature_constraints():
    with pytest.raises(InvariantError):
        SignatureMatrix(np.array([[1.0, -1.0], [1.0, 1.0]]))
    with pytest.raises(InvariantError) as exc:
        SignatureMatrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert exc.value.index == 1


def test_cube_geometry():
    with pytest.raises(DimensionError):
        HyperCube(np.ones((2, 6)), width=4, height=2)
    with pytest.raises(DimensionError):
        HyperCube(np.ones((2, 6)), width=3)
    with pytest.raises(InvariantError):
        HyperCube(np.array([[1.0, np.nan]]))
    cube = HyperCube(np.ones((2, 6)), width=3, height=2, band_wavelengths=[0.5, 0.6])
    assert cube.n_bands == 2 and cube.n_pixels == 6 and cube.has_grid


def test_containers_are_read_only():
    cube = HyperCube(np.ones((2, 2)))
    with pytest.raises(ValueError):
        cube.data[0, 0] = 3.0


def test_row_major_neighbors():
    nb = grid_neighbors(3, 2, "4")
    # pixel 4 is row 1, col 1
    assert sorted(nb[4]) == [1, 3, 5]
    assert sorted(grid_neighbors(3, 2, "8")[4]) == [0, 1, 2, 3, 5]
    assert [n.size for n in grid_neighbors(3, 3, "8")] == [3, 5, 3, 5, 8, 5, 3, 5, 3]


def test_neighbor_graph_invariants():
    with pytest.raises(InvariantError):
        NeighborGraph(([0],), ([1.0],), 1, 1)
    with pytest.raises(InvariantError):
        NeighborGraph(([1], [0]), ([0.7], [1.0]), 2, 1)
    g = NeighborGraph(([1], [0]), ([1.0], [1.0]), 2, 1)
    assert np.array_equal(g.dense_weights(), [[0, 1], [1, 0]])


@pytest.mark.parametrize("field,value", [
    ("p", 0.0), ("q1", -1.0), ("mu", -0.1), ("eta", np.inf), ("lam", -1.0),
    ("c", 0), ("max_iter", 0), ("init", "svd"), ("adjacency", "6"), ("epsilon", 0.0),
])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        UnmixConfig(**{field: value})


def test_config_defaults():
    cfg = UnmixConfig()
    assert cfg.mu == 0.02 and cfg.eta == 0.1 and cfg.lam is None
    assert cfg.with_(mu=0.0).mu == 0.0
    assert UnmixConfig(**cfg.to_dict()) == cfg
