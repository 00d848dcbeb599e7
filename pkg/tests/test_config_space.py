import itertools
import math
from collections import Counter

import pytest
from scipy import stats

from conftest import make_base
from metareduce.errors import EmptyPool, InputError, MalformedLabel, MissingLandmarkResult, RosterError
from metareduce.landmarking import LandmarkResult
from metareduce.meta.synth import planted_hierarchy_surface
from metareduce.ranking import build_ranking
from metareduce.schema import SchemaValidationError
from metareduce.space.components import ComponentKind, ComponentSpec, Dependency, Pipeline, Roster
from metareduce.space.strategies import (
    ReducedSpace,
    StrategyLabel,
    apply_strategy,
    close_dependencies,
    parse_labels,
    space_size,
)


def _roster():
    """P0..P5 plain, `Bag` meta-predictor, kernel `K6` hosted by P6, `PCA` preprocessor."""
    components = [ComponentSpec(id=f"P{i}") for i in range(7)]
    components.append(ComponentSpec(
        id="Bag", kind=ComponentKind.META_PREDICTOR, dependency=Dependency(kind="needs_base_learner")
    ))
    components.append(ComponentSpec(
        id="K6", kind=ComponentKind.KERNEL, dependency=Dependency(kind="needs_host_predictor", host="P6")
    ))
    components.append(ComponentSpec(id="PCA", kind=ComponentKind.PREPROCESSOR))
    return Roster(components=components)


@pytest.fixture
def table():
    base = make_base({
        "d1": {"P2": [0.1, 0.1], "P0": [0.2, 0.2], "P1": [0.3, 0.3]},
        "d2": {"P2": [0.3, 0.3], "P0": [0.1, 0.1], "P1": [0.2, 0.2]},
    }, folds=2)
    return build_ranking(base)


def test_label_parsing():
    label = StrategyLabel.parse("O1-k4")
    assert (label.family, label.base_index, label.k) == ("O", 1, 4)
    assert StrategyLabel.parse("M2-k10").base_slot == 1
    assert StrategyLabel.parse("R-k4:seed=7").seed == 7
    assert StrategyLabel.parse("avatar").k is None
    for text in ("O1-k4", "M2-k10", "L1-k8", "R-k4", "R-k4:seed=7", "baseline", "avatar", "r30"):
        assert StrategyLabel.parse(text).text == text
    assert [l.text for l in parse_labels("O1-k4, baseline")] == ["O1-k4", "baseline"]
    assert StrategyLabel.parse("L1-k8").strategy_type == "landmarked"
    for bad in ("X1-k4", "O0-k4", "O1-4", "R-k4:seed=", ""):
        with pytest.raises(MalformedLabel):
            StrategyLabel.parse(bad)


def test_oracle_takes_the_target_dataset_top_k(table):
    space = apply_strategy("O-k2", table, dataset_id="d1")
    assert space.predictor_pool == ["P2", "P0"]
    assert space.k_requested == 2
    assert space.closure_added == []
    assert space.landmark_cost == 0.0
    assert apply_strategy("O-k2", table, dataset_id="d2").predictor_pool == ["P0", "P1"]
    with pytest.raises(InputError):
        apply_strategy("O-k2", table)


def test_oracle_pools_are_prefix_monotone(table):
    pools = [apply_strategy(f"O-k{k}", table, dataset_id="d1").predictor_pool for k in (1, 2, 3)]
    for smaller, larger in zip(pools, pools[1:]):
        assert larger[:len(smaller)] == smaller


def test_leaderboard_with_full_k_is_the_full_roster():
    table = build_ranking(planted_hierarchy_surface().to_meta_base())
    assert len(table.predictors) == 30
    full = apply_strategy("M-k30", table)
    baseline = apply_strategy("baseline", table)
    assert full.predictor_pool == table.leaderboard_order()
    assert set(full.predictor_pool) == set(baseline.predictor_pool) == set(table.predictors)
    for label in ("O-k30", "R-k30"):
        assert set(apply_strategy(label, table, dataset_id="t1", rng_seed=1).predictor_pool) == set(table.predictors)


def test_every_family_at_full_k_matches_baseline(table):
    baseline = apply_strategy("baseline", table, dataset_id="d1")
    neighbour = LandmarkResult(dataset_id="d1", most_similar="d2", coefficient=0.4, landmark_cost=3.0)
    spaces = [
        apply_strategy("O-k3", table, dataset_id="d1"),
        apply_strategy("M-k3", table, dataset_id="d1"),
        apply_strategy("L-k3", table, landmark_result=neighbour, dataset_id="d1"),
    ] + [apply_strategy(f"R-k3:seed={seed}", table, dataset_id="d1") for seed in range(10)]
    for space in spaces:
        assert sorted(space.final_pool) == sorted(baseline.final_pool)
        assert space.closure_added == baseline.closure_added == []


def test_k_outside_roster(table):
    with pytest.raises(MalformedLabel):
        apply_strategy("M-k4", table)


def test_landmarked_needs_a_result(table):
    with pytest.raises(MissingLandmarkResult):
        apply_strategy("L-k2", table, dataset_id="d1")
    result = LandmarkResult(dataset_id="d1", most_similar="d2", coefficient=0.7, landmark_cost=12.5)
    space = apply_strategy("L-k2", table, landmark_result=result, dataset_id="d1")
    assert space.predictor_pool == ["P0", "P1"]
    assert space.landmark_cost == 12.5


def test_random_is_seeded(table):
    first = apply_strategy("R-k2", table, rng_seed=7).predictor_pool
    assert apply_strategy("R-k2", table, rng_seed=7).predictor_pool == first
    assert apply_strategy("R-k2:seed=7", table, rng_seed=99).predictor_pool == first
    with pytest.raises(InputError):
        apply_strategy("R-k2", table)


def test_random_subsets_are_uniform():
    base = make_base({"d1": {f"P{i}": [0.1 * (i + 1)] * 2 for i in range(6)}}, folds=2)
    table = build_ranking(base)
    draws = Counter(
        frozenset(apply_strategy("R-k2", table, rng_seed=seed).predictor_pool) for seed in range(10_000)
    )
    assert len(draws) == math.comb(6, 2)
    assert stats.chisquare(list(draws.values())).pvalue > 0.001


def test_controls(table):
    baseline = apply_strategy("baseline", table)
    avatar = apply_strategy("avatar", table)
    assert baseline.predictor_pool == avatar.predictor_pool == table.leaderboard_order()
    assert not baseline.validity_filter
    assert avatar.validity_filter

    prior = Pipeline(structure=("PCA", "P1"), configs=("default", "default"))
    r30 = apply_strategy("r30", table, dataset_id="d1", prior_best=prior)
    assert r30.predictor_pool == ["P1"]
    assert r30.prior_best == prior
    with pytest.raises(InputError):
        apply_strategy("r30", table, dataset_id="d1")


def test_reduced_space_round_trips_through_json(table):
    space = apply_strategy("O-k2", table, dataset_id="d1")
    assert ReducedSpace.from_json(space.to_json()) == space


def test_closure_adds_best_ranked_base_learner():
    roster = _roster()
    ranking = ["Bag", "K6", "P3", "P1", "P0", "P2", "P4", "P5", "P6"]
    final, added = close_dependencies(["Bag"], ranking, roster)
    assert added == ["P3"]
    assert final == ["Bag", "P3"]


def test_closure_adds_kernel_host():
    final, added = close_dependencies(["K6"], ["K6", "P3", "P6"], _roster())
    assert added == ["P6"]
    assert set(final) == {"K6", "P6"}


def test_one_addition_can_satisfy_several_members():
    roster = _roster()
    ranking = ["K6", "Bag", "P6", "P3", "P0"]
    final, added = close_dependencies(["Bag", "K6"], ranking, roster)
    assert added == ["P6"]
    again, added_again = close_dependencies(final, ranking, roster)
    assert again == final
    assert added_again == []


def test_plain_pool_needs_no_closure():
    final, added = close_dependencies(["P1", "P2"], ["P1", "P2"], _roster())
    assert (final, added) == (["P1", "P2"], [])


def test_closure_failures():
    with pytest.raises(EmptyPool):
        close_dependencies([], [], _roster())
    lonely = Roster(components=[
        ComponentSpec(id="Bag", kind=ComponentKind.META_PREDICTOR, dependency=Dependency(kind="needs_base_learner"))
    ])
    with pytest.raises(RosterError):
        close_dependencies(["Bag"], ["Bag"], lonely)


def test_strategy_applies_closure_without_counting_it(table):
    roster = Roster(components=[
        ComponentSpec(id="P0"),
        ComponentSpec(id="P1"),
        ComponentSpec(id="P2", kind=ComponentKind.META_PREDICTOR, dependency=Dependency(kind="needs_base_learner")),
    ])
    space = apply_strategy("O-k1", table, dataset_id="d1", roster=roster)
    assert space.predictor_pool == ["P2"]
    assert space.k_requested == 1
    assert space.closure_added == ["P0"]
    assert space.final_pool == ["P2", "P0"]


def test_component_and_pipeline_validation():
    with pytest.raises(SchemaValidationError):
        ComponentSpec(id="Bag", kind=ComponentKind.META_PREDICTOR)
    with pytest.raises(SchemaValidationError):
        ComponentSpec(id="K", kind=ComponentKind.KERNEL, dependency=Dependency(kind="needs_base_learner"))
    with pytest.raises(SchemaValidationError):
        Pipeline(structure=tuple(f"C{i}" for i in range(8)), configs=("default",) * 8)
    with pytest.raises(SchemaValidationError):
        Pipeline(structure=("P1",), configs=())

    roster = _roster()
    Pipeline(structure=("PCA", "P1"), configs=("a", "b")).check_against(roster)
    with pytest.raises(RosterError):
        Pipeline(structure=("P1", "PCA"), configs=("a", "b")).check_against(roster)
    with pytest.raises(RosterError):
        Pipeline(structure=("K6",), configs=("a",)).check_against(roster)
    with pytest.raises(RosterError):
        Pipeline(structure=("Nope",), configs=("a",)).check_against(roster)


def _enumerate(roster, max_len, allow_repeats=False):
    preprocessors = roster.preprocessors
    slots = [c.id for c in roster.components if c.kind is not ComponentKind.PREPROCESSOR]
    count = 0
    for length in range(max_len):
        chains = (itertools.product(preprocessors, repeat=length) if allow_repeats
                  else itertools.permutations(preprocessors, length))
        count += sum(1 for _ in chains) * len(slots)
    return count


def test_space_size_examples():
    assert space_size(Roster.plain(["P1"]), max_len=1) == 1
    two_pre = Roster(components=[
        ComponentSpec(id="A", kind=ComponentKind.PREPROCESSOR),
        ComponentSpec(id="B", kind=ComponentKind.PREPROCESSOR),
        ComponentSpec(id="P1"),
    ])
    assert space_size(two_pre, max_len=2) == 3
    with pytest.raises(InputError):
        space_size(two_pre, max_len=0)


@pytest.mark.parametrize("n_pre,n_pred,max_len,repeats", [
    (1, 1, 3, False), (2, 2, 3, False), (3, 1, 4, False), (2, 2, 4, True), (3, 1, 3, True),
])
def test_space_size_matches_enumeration(n_pre, n_pred, max_len, repeats):
    roster = Roster(components=[
        *[ComponentSpec(id=f"F{i}", kind=ComponentKind.PREPROCESSOR) for i in range(n_pre)],
        *[ComponentSpec(id=f"P{i}") for i in range(n_pred)],
    ])
    assert space_size(roster, max_len=max_len, allow_repeats=repeats) == _enumerate(roster, max_len, repeats)


def test_space_size_discretization_and_overflow():
    roster = Roster(components=[
        *[ComponentSpec(id=f"F{i}", kind=ComponentKind.PREPROCESSOR) for i in range(30)],
        *[ComponentSpec(id=f"P{i}") for i in range(30)],
    ])
    small = space_size(roster, max_len=2, discretization={"preprocessor": 10, "predictor": 100})
    assert small == (1 + 30 * 10) * 30 * 100
    huge = space_size(roster, max_len=7, discretization={"preprocessor": 1000, "predictor": 10 ** 6})
    assert isinstance(huge, str)
    assert int(huge) > 8 * 10 ** 11
    assert int(huge) == sum(math.perm(30, n) * 1000 ** n for n in range(7)) * 30 * 10 ** 6
