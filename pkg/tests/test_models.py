import numpy as np
import pytest

from treelet import (
    InputError,
    build_tree,
    loglog_slope,
    min_sample_experiment,
    population_covariance,
    recovery_score,
    sample,
    similarity,
)
from treelet.build import RotationRecord, TreeletTree
from treelet.models import BlockModelSpec

TWO_BLOCKS_4 = ((0, 1), (2, 3))


def make_tree(p, merges):
    """Hand-built tree from (alpha, beta, sum) triples; angles are irrelevant
    to recovery scoring."""
    rots = tuple(
        RotationRecord(level=k + 1, alpha=a, beta=b, theta=0.0,
                       sum_index=s, detail_index=b if s == a else a)
        for k, (a, b, s) in enumerate(merges)
    )
    retired = {r.detail_index for r in rots}
    return TreeletTree(p=p, measure="covariance", rotations=rots,
                       root_active=frozenset(set(range(p)) - retired),
                       similarities=np.zeros(len(rots)))


def test_spec_validation_errors():
    with pytest.raises(InputError, match="p >= 2"):
        BlockModelSpec(p=1, partition=((0,),), within_corr=0.5)
    with pytest.raises(InputError, match="cover 0..p-1"):
        BlockModelSpec(p=3, partition=((0, 1),), within_corr=0.5)
    with pytest.raises(InputError, match="cover 0..p-1"):
        BlockModelSpec(p=3, partition=((0, 1), (1, 2)), within_corr=0.5)
    with pytest.raises(InputError, match="empty block"):
        BlockModelSpec(p=2, partition=((0, 1), ()), within_corr=0.5)
    with pytest.raises(InputError, match="within_corr"):
        BlockModelSpec(p=2, partition=((0, 1),), within_corr=1.5)
    with pytest.raises(InputError, match="across_corr"):
        BlockModelSpec(p=2, partition=((0,), (1,)), within_corr=0.0,
                       across_corr=float("nan"))
    with pytest.raises(InputError, match="variances"):
        BlockModelSpec(p=4, partition=((0, 1), (2, 3)), within_corr=0.5,
                       variances=(1.0, 2.0, 3.0))
    with pytest.raises(InputError, match="finite and positive"):
        BlockModelSpec(p=2, partition=((0, 1),), within_corr=0.5,
                       variances=(1.0, 0.0))
    with pytest.raises(InputError, match="noise_sd"):
        BlockModelSpec(p=2, partition=((0, 1),), within_corr=0.5,
                       noise_sd=-0.1)


def test_spec_rejects_indefinite_correlation():
    # Equicorrelation -0.9 on a 3-block has eigenvalue 1 + 2(-0.9) = -0.8.
    with pytest.raises(InputError, match="positive semidefinite"):
        BlockModelSpec(p=3, partition=((0, 1, 2),), within_corr=-0.9)


def test_block_of_maps_interleaved_partition():
    spec = BlockModelSpec(p=5, partition=((0, 2), (1, 3, 4)), within_corr=0.5)
    assert spec.block_of().tolist() == [0, 1, 0, 1, 1]


def test_population_covariance_hand_checked_entries():
    spec = BlockModelSpec(p=4, partition=TWO_BLOCKS_4, within_corr=0.5,
                          across_corr=0.1, variances=(1.0, 4.0, 9.0, 16.0),
                          noise_sd=0.5)
    cov = population_covariance(spec).cov
    assert cov[0, 1] == pytest.approx(0.5 * np.sqrt(1.0 * 4.0), abs=1e-15)
    assert cov[2, 3] == pytest.approx(0.5 * np.sqrt(9.0 * 16.0), abs=1e-15)
    assert cov[0, 2] == pytest.approx(0.1 * np.sqrt(1.0 * 9.0), abs=1e-15)
    assert cov[1, 3] == pytest.approx(0.1 * np.sqrt(4.0 * 16.0), abs=1e-15)
    # Noise adds sd^2 to the diagonal only.
    assert np.allclose(np.diag(cov), np.array([1.0, 4.0, 9.0, 16.0]) + 0.25)
    assert np.array_equal(cov, cov.T)


def test_population_correlation_measure_normalizes():
    # The stored matrix is always covariance; the measure changes how
    # similarity reads it, recovering the spec correlations exactly.
    spec = BlockModelSpec(p=4, partition=TWO_BLOCKS_4, within_corr=0.7,
                          variances=(1.0, 4.0, 9.0, 16.0))
    st = population_covariance(spec, measure="correlation")
    assert st.cov[0, 1] == pytest.approx(0.7 * 2.0, abs=1e-15)
    assert similarity(st, 0, 1) == pytest.approx(0.7, abs=1e-12)
    assert similarity(st, 0, 2) == pytest.approx(0.0, abs=0)


def test_sample_is_deterministic_per_seed():
    spec = BlockModelSpec(p=6, partition=((0, 1, 2), (3, 4, 5)),
                          within_corr=0.8, noise_sd=0.3, seed=42)
    a = sample(spec, 40).values
    b = sample(spec, 40).values
    assert a.tobytes() == b.tobytes()
    other = sample(BlockModelSpec(p=6, partition=((0, 1, 2), (3, 4, 5)),
                                  within_corr=0.8, noise_sd=0.3, seed=43), 40)
    assert not np.array_equal(a, other.values)
    with pytest.raises(InputError, match="n >= 2"):
        sample(spec, 1)


def test_sample_singular_block_gives_exactly_proportional_columns():
    # within_corr 1 with variances (1, 4): the rank-one factor makes the
    # second column exactly twice the first, float for float.
    spec = BlockModelSpec(p=2, partition=((0, 1),), within_corr=1.0,
                          variances=(1.0, 4.0), seed=11)
    x = sample(spec, 50).values
    assert np.array_equal(x[:, 1], 2.0 * x[:, 0])


def test_sample_matches_population_at_scale():
    spec = BlockModelSpec(p=4, partition=TWO_BLOCKS_4, within_corr=0.6,
                          noise_sd=0.2, seed=0)
    x = sample(spec, 200_000).values
    emp = np.cov(x, rowvar=False, bias=True)
    assert np.allclose(emp, population_covariance(spec).cov, atol=0.03)


def test_recovery_perfect_on_population_trees():
    for parts in (2, 4):
        blocks = tuple(tuple(range(b * (8 // parts), (b + 1) * (8 // parts)))
                       for b in range(parts))
        spec = BlockModelSpec(p=8, partition=blocks, within_corr=0.9)
        tree = build_tree(population_covariance(spec))
        assert recovery_score(tree, blocks) == 1.0


def test_recovery_zero_on_fully_mixed_tree():
    tree = make_tree(4, [(0, 2, 0), (1, 3, 1), (0, 1, 0)])
    assert recovery_score(tree, TWO_BLOCKS_4) == 0.0


def test_recovery_partial_credit():
    # First merge respects block 0; the second crosses blocks. needed = 2.
    tree = make_tree(4, [(0, 1, 0), (0, 2, 0), (0, 3, 0)])
    assert recovery_score(tree, TWO_BLOCKS_4) == 0.5


def test_recovery_allows_completed_blocks_to_merge_early():
    # Blocks 0 and 1 complete and join each other before block 2 assembles;
    # each block is still a connected subtree, so the score stays 1.
    tree = make_tree(6, [(0, 1, 0), (2, 3, 2), (0, 2, 0), (4, 5, 4)])
    assert recovery_score(tree, ((0, 1), (2, 3), (4, 5))) == 1.0


def test_recovery_single_block_accepts_any_tree():
    tree = make_tree(4, [(0, 2, 0), (0, 3, 0), (0, 1, 0)])
    assert recovery_score(tree, ((0, 1, 2, 3),)) == 1.0


def test_recovery_rejects_bad_partition():
    tree = make_tree(4, [(0, 1, 0)])
    with pytest.raises(InputError, match="cover 0..p-1"):
        recovery_score(tree, ((0, 1), (2,)))


def test_min_sample_finds_threshold_on_easy_model():
    res = min_sample_experiment([4], {"n_blocks": 2, "within_corr": 0.95},
                                trials=8, seed=1, n_cap=256)
    n_star = res.n_star[4]
    assert n_star == 5
    frac = {r.n: r.recovered_fraction for r in res.rows}
    assert frac[n_star] >= res.target
    assert frac[n_star - 1] < res.target
    assert all(r.trials == 8 and r.p == 4 for r in res.rows)


def test_min_sample_censors_at_cap():
    res = min_sample_experiment([16],
                                {"n_blocks": 2, "within_corr": 0.2,
                                 "noise_sd": 2.0},
                                trials=3, seed=5, n_cap=4)
    assert res.n_star == {16: None}
    assert res.rows and all(r.n <= 4 for r in res.rows)


def test_min_sample_validates_inputs():
    ok = {"n_blocks": 2, "within_corr": 0.9}
    with pytest.raises(InputError, match="target"):
        min_sample_experiment([4], ok, target=0.0, trials=2)
    with pytest.raises(InputError, match="trials"):
        min_sample_experiment([4], ok, trials=0)
    with pytest.raises(InputError, match="unknown template field"):
        min_sample_experiment([4], dict(ok, seed=3), trials=2)
    with pytest.raises(InputError, match="missing \\['within_corr'\\]"):
        min_sample_experiment([4], {"n_blocks": 2}, trials=2)
    with pytest.raises(InputError, match="1 <= n_blocks <= p"):
        min_sample_experiment([2], {"n_blocks": 4, "within_corr": 0.9},
                              trials=2)


def test_loglog_slope_recovers_power_law():
    xs = np.array([4.0, 16.0, 64.0, 256.0])
    assert loglog_slope(xs, 3.0 * xs ** 0.7) == pytest.approx(0.7, abs=1e-12)
