import numpy as np
import pytest

from treelet import (
    Coefficients,
    InputError,
    basis_at_level,
    build_tree,
    forward,
    inverse,
    population_covariance,
    sample,
    top_k_features,
    transform_rows,
)
from treelet.models import BlockModelSpec


def test_orthonormality_and_round_trip_every_level():
    rng = np.random.default_rng(0)
    for trial in range(10):
        p = int(rng.integers(3, 16))
        x = rng.standard_normal((25, p))
        tree = build_tree(x, "correlation")
        for lvl in range(1, p):
            basis = basis_at_level(tree, lvl)
            gram = basis.loadings.T @ basis.loadings
            assert np.abs(gram - np.eye(p)).max() < 1e-10
            z = x @ basis.loadings
            assert np.abs(z @ basis.loadings.T - x).max() < 1e-10


def test_perfectly_correlated_pair_loadings():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    tree = build_tree(x, "correlation")
    basis = basis_at_level(tree, 1)
    r = 1.0 / np.sqrt(2.0)
    assert basis.kinds == ("scaling", "detail")
    assert np.allclose(basis.loadings[:, 0], [r, r], atol=1e-15)
    # detail column is (-sin, cos); cos(pi/4) beats sin(pi/4) by one ulp in
    # doubles, so the sign convention anchors on the second entry
    assert np.allclose(basis.loadings[:, 1], [-r, r], atol=1e-15)
    assert basis.loadings[1, 1] > 0


def test_sign_convention_largest_entry_positive():
    rng = np.random.default_rng(1)
    for trial in range(10):
        x = rng.standard_normal((30, 8))
        tree = build_tree(x, "correlation")
        for lvl in (1, 4, 7):
            basis = basis_at_level(tree, lvl)
            for j in range(8):
                col = basis.loadings[:, j]
                assert col[np.argmax(np.abs(col))] > 0


def test_column_partition_matches_level():
    x = np.random.default_rng(2).standard_normal((20, 9))
    tree = build_tree(x, "correlation")
    for lvl in range(1, 9):
        basis = basis_at_level(tree, lvl)
        assert basis.level == lvl
        assert basis.kinds.count("scaling") == 9 - lvl
        assert basis.kinds.count("detail") == lvl
        assert list(basis.scaling_indices) == tree.active_at(lvl)
        retired = [r.detail_index for r in tree.rotations[:lvl]]
        assert list(basis.detail_indices) == retired
        for j, kind in enumerate(basis.kinds):
            if kind == "detail":
                assert basis.origin_levels[j] >= 1
            else:
                assert basis.origin_levels[j] == 0


def test_full_level_has_single_scaling_function():
    x = np.random.default_rng(3).standard_normal((20, 7))
    tree = build_tree(x, "correlation")
    basis = basis_at_level(tree, "full")
    assert basis.level == 6
    assert basis.kinds.count("scaling") == 1


def test_detail_columns_nest_across_levels():
    # the level-l details are exactly the first l details of level l+1
    x = np.random.default_rng(4).standard_normal((25, 10))
    tree = build_tree(x, "correlation")
    for lvl in range(1, 9):
        lo = basis_at_level(tree, lvl)
        hi = basis_at_level(tree, lvl + 1)
        for slot in lo.detail_indices:
            assert np.array_equal(lo.loadings[:, slot], hi.loadings[:, slot])
            assert lo.origin_levels[slot] == hi.origin_levels[slot]


def test_exchangeable_block_equal_scaling_loadings():
    spec = BlockModelSpec(p=4, partition=((0, 1, 2, 3),), within_corr=0.9)
    tree = build_tree(population_covariance(spec, "covariance"))
    basis = basis_at_level(tree, "full")
    phi = basis.loadings[:, basis.scaling_indices[0]]
    assert phi.max() - phi.min() < 1e-10
    assert np.allclose(phi, 0.5, atol=1e-10)


def test_transform_rows_equals_dense_multiply():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((40, 11))
    tree = build_tree(x, "correlation")
    y = rng.standard_normal((7, 11))
    for lvl in (1, 5, 10):
        basis = basis_at_level(tree, lvl)
        assert np.abs(transform_rows(tree, y, lvl) - y @ basis.loadings).max() < 1e-10
    with pytest.raises(InputError):
        transform_rows(tree, y, 3, basis_at_level(tree, 2))
    with pytest.raises(InputError):
        transform_rows(tree, y[:, :5], 3)


def test_forward_inverse_split():
    x = np.random.default_rng(6).standard_normal((30, 6))
    tree = build_tree(x, "correlation")
    basis = basis_at_level(tree, 4)
    co = forward(basis, x[3])
    assert co.s.shape == (2,) and co.d.shape == (4,)
    assert np.abs(inverse(basis, co) - x[3]).max() < 1e-12
    # energy splits across the two coefficient blocks
    assert co.s @ co.s + co.d @ co.d == pytest.approx(x[3] @ x[3], rel=1e-12)
    with pytest.raises(InputError):
        forward(basis, x[3, :4])
    with pytest.raises(InputError):
        inverse(basis, Coefficients(s=co.s[:1], d=co.d))


def test_top_k_two_blocks_selects_both_block_sums():
    spec = BlockModelSpec(p=6, partition=((0, 1, 2), (3, 4, 5)),
                          within_corr=0.9, seed=13)
    dm = sample(spec, 2000)
    tree = build_tree(dm, "correlation")
    fs = top_k_features(tree, dm, "full", 2)
    assert fs.k == 2 and fs.level == 5
    covered = set()
    for col in range(2):
        w = np.abs(fs.loadings[:, col])
        block = frozenset(np.argsort(-w)[:3].tolist())
        assert block in ({0, 1, 2}, {3, 4, 5})
        covered.add(block)
    assert len(covered) == 2
    assert fs.variances[0] >= fs.variances[1]
    assert fs.coefficients.shape == (2000, 2)
    z = transform_rows(tree, dm.values, "full")
    assert np.array_equal(fs.coefficients, z[:, fs.indices])


def test_top_k_tie_break_by_slot_index():
    x = np.zeros((10, 5))
    tree = build_tree(np.random.default_rng(7).standard_normal((10, 5)), "correlation")
    fs = top_k_features(tree, x, 2, 3)
    assert list(fs.indices) == [0, 1, 2]


def test_top_k_validation():
    x = np.random.default_rng(8).standard_normal((12, 4))
    tree = build_tree(x, "correlation")
    with pytest.raises(InputError):
        top_k_features(tree, x, "full", 0)
    with pytest.raises(InputError):
        top_k_features(tree, x, "full", 5)
    with pytest.raises(InputError):
        top_k_features(tree, x[:, :3], "full", 2)


def test_basis_level_validation():
    x = np.random.default_rng(9).standard_normal((12, 4))
    tree = build_tree(x, "correlation")
    for bad in (0, 4, -1, "half"):
        with pytest.raises(InputError):
            basis_at_level(tree, bad)
