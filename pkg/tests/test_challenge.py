import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from conftest import make_base
from metareduce.challenge import (
    DISTINGUISHABLE,
    INDISTINGUISHABLE,
    UNTESTABLE,
    IndistinguishabilityMatrix,
    best_groups,
    challenge_table,
    classify,
    indistinguishability_matrix,
    is_indistinguishable,
    random_top_hit_probability,
    skewness,
    welch_p,
)
from metareduce.errors import InputError, UndefinedChallenge, UntestableSample


def _welch_oracle(a, b):
    """Two-sided Welch p-value by direct quadrature of the t density."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    log_norm = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi)

    def density(x):
        return math.exp(log_norm - (df + 1) / 2 * math.log1p(x * x / df))

    inner, _ = integrate.quad(density, 0.0, abs(t), epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 - 2.0 * inner


def test_skewness_anchors():
    assert skewness([0, 1, 2, 3, 4]) == 0.5
    assert skewness([0.25, 0.5, 0.75]) == 0.5
    assert skewness([0, 0, 0, 1]) == 0.25
    assert skewness([0, 1, 0.8, 0.8]) == pytest.approx(0.65, abs=1e-12)
    with pytest.raises(UndefinedChallenge):
        skewness([0.3, 0.3])
    with pytest.raises(UndefinedChallenge):
        skewness([0.3])


def test_skewness_is_affine_invariant():
    rng = np.random.default_rng(1)
    for _ in range(200):
        means = rng.uniform(0, 1, int(rng.integers(2, 20)))
        scale, shift = rng.uniform(0.1, 10), rng.uniform(-5, 5)
        assert skewness(list(means * scale + shift)) == pytest.approx(skewness(list(means)), abs=1e-12)


def test_top_heavy_profiles_are_hard():
    # A few strong predictors, the bulk close to the worst one
    automl_like = [0.02, 0.05, 0.40, 0.41, 0.42, 0.43, 0.44, 0.45, 0.46, 0.47, 0.48, 0.50]
    default_like = [0.03, 0.08, 0.15, 0.38, 0.40, 0.41, 0.42, 0.43, 0.44, 0.45, 0.46, 0.50]
    assert classify(skewness(automl_like)) == "hard"
    assert classify(skewness(default_like)) == "hard"
    assert classify(0.25) == "easy"
    assert classify(0.5) == "balanced"


def test_welch_matches_quadrature_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.normal(rng.uniform(0.1, 0.3), rng.uniform(0.005, 0.05), int(rng.integers(2, 12)))
        b = rng.normal(rng.uniform(0.1, 0.3), rng.uniform(0.005, 0.05), int(rng.integers(2, 12)))
        assert welch_p(a, b) == pytest.approx(_welch_oracle(a, b), abs=1e-9)


def test_welch_symmetry_and_shift_invariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.uniform(0, 0.5, 8)
        b = rng.uniform(0, 0.5, 6)
        assert welch_p(a, b) == pytest.approx(welch_p(b, a), abs=1e-12)
        assert welch_p(a + 0.25, b + 0.25) == pytest.approx(welch_p(a, b), abs=1e-12)


def test_welch_conventions():
    assert welch_p([0.1, 0.2, 0.3], [0.1, 0.2, 0.3]) == 1.0
    assert welch_p([0.0] * 5, [1.0] * 5) == 0.0
    assert welch_p([0.2] * 3, [0.2] * 4) == 1.0
    with pytest.raises(UntestableSample):
        welch_p([0.1], [0.1, 0.2])


def test_alpha_rules():
    assert is_indistinguishable(0.5, 0.05)
    assert not is_indistinguishable(0.01, 0.05)
    assert not is_indistinguishable(0.5, 0.05, "literal")
    assert is_indistinguishable(0.97, 0.05, "literal")


def _clustered_base():
    return make_base({
        "d1": {
            "A": [0.100, 0.110, 0.120, 0.130],
            "B": [0.105, 0.115, 0.125, 0.135],
            "C": [0.500, 0.510, 0.520, 0.530],
            "D": [0.300, None, None, None],
        }
    }, folds=4)


def test_matrix_is_block_diagonal_with_untestable_rows():
    matrix = indistinguishability_matrix(_clustered_base(), "d1")
    assert matrix.order == ["A", "B", "D", "C"]
    assert matrix.cell("A", "B") == INDISTINGUISHABLE
    assert matrix.cell("A", "C") == DISTINGUISHABLE
    assert matrix.cell("B", "C") == DISTINGUISHABLE
    assert matrix.cell("C", "C") == INDISTINGUISHABLE
    assert all(matrix.cell("D", p) == UNTESTABLE for p in matrix.order)
    assert all(matrix.cell(p, "D") == UNTESTABLE for p in matrix.order)
    assert matrix.means == sorted(matrix.means)


def test_matrix_of_one_distribution_is_all_ones():
    base = make_base({"d1": {p: [0.1, 0.2, 0.3] for p in ("A", "B", "C")}}, folds=3)
    matrix = indistinguishability_matrix(base, "d1")
    assert all(v == INDISTINGUISHABLE for row in matrix.cells for v in row)
    assert best_groups(matrix).groups == [["A", "B", "C"]]


def test_groups_follow_the_anchor_rule():
    groups = best_groups(indistinguishability_matrix(_clustered_base(), "d1"))
    assert groups.groups == [["A", "B"], ["C"]]
    assert groups.unclassified == ["D"]
    assert (groups.best_group_size, groups.second_group_size) == (2, 1)

    chain = IndistinguishabilityMatrix(
        dataset_id="d", base_id="b", order=["A", "B", "C"], means=[0.1, 0.2, 0.3],
        cells=[[1, 1, 0], [1, 1, 1], [0, 1, 1]], alpha=0.05
    )
    assert best_groups(chain).groups == [["A", "B"], ["C"]]

    alone = IndistinguishabilityMatrix(
        dataset_id="d", base_id="b", order=["A", "B", "C"], means=[0.1, 0.2, 0.3],
        cells=[[1, 0, 0], [0, 1, 1], [0, 1, 1]], alpha=0.05
    )
    assert best_groups(alone).best_group_size == 1


def _brute_hit(n, g, k):
    hits = sum(1 for subset in itertools.combinations(range(n), k) if min(subset) < g)
    return Fraction(hits, math.comb(n, k))


def test_hit_probability_matches_enumeration():
    assert random_top_hit_probability(10, 2, 3, exact=True) == Fraction(8, 15)
    for n in range(1, 13):
        for g in range(1, n + 1):
            for k in range(1, n + 1):
                assert random_top_hit_probability(n, g, k, exact=True) == _brute_hit(n, g, k)


def test_hit_probability_properties():
    assert random_top_hit_probability(30, 30, 4) == 1.0
    assert random_top_hit_probability(30, 5, 30) == 1.0
    assert random_top_hit_probability(30, 5, 1) == pytest.approx(5 / 30)
    by_k = [random_top_hit_probability(30, 5, k) for k in range(1, 31)]
    assert by_k == sorted(by_k)
    by_g = [random_top_hit_probability(30, g, 4) for g in range(1, 31)]
    assert by_g == sorted(by_g)
    with pytest.raises(InputError):
        random_top_hit_probability(10, 0, 3)
    with pytest.raises(InputError):
        random_top_hit_probability(10, 2, 11)


def test_challenge_table_on_sample(automl_base, default_base, sample_manifest):
    rows = challenge_table(automl_base, default_base, [1, 4, 8, 10])
    assert [row.dataset_id for row in rows] == sample_manifest.datasets
    for row in rows:
        assert 0.0 <= row.skewness_a <= 1.0
        assert 0.0 <= row.skewness_b <= 1.0
        assert row.best_group_size >= 1
        assert row.hit_probabilities[1] == pytest.approx(row.best_group_size / 8)
        assert row.hit_probabilities[8] == 1.0
        assert row.hit_probabilities[10] is None

    alone = challenge_table(automl_base, None, [4])
    assert all(row.skewness_b is None for row in alone)
