import math
import random

import numpy as np
import pytest

from evoreg.genome import Gene, GeneticTopology, Genotype
from evoreg.regress import RegressionModel, ols_fit
from evoreg.scores import (
    SIMILARITY_CAP,
    WORST_MIN_SCORE,
    NormalizationState,
    ObjectiveSpec,
    objective_score,
    round_significant,
    selection_direction,
    selection_scores,
    survival_scores,
    transform_scores,
)
from tests.test_regress import make_dataset, make_phenotypes


def model_stub(r2=0.5, t_stats=(3.0,), with_intercept=False, se=1.0, s=2.0):
    return RegressionModel(
        member_ids=tuple(f"id{i}" for i in range(len(t_stats))),
        with_intercept=with_intercept,
        coefficients=tuple(1.0 for _ in t_stats),
        t_stats=tuple(t_stats),
        r2=r2,
        se_s=se,
        s=s,
        df=10,
    )


def test_objective_spec_defaults_and_direction():
    assert ObjectiveSpec("se").s == 2.0
    assert ObjectiveSpec("r2").s == 1.0
    assert ObjectiveSpec("se").direction == "min"
    assert ObjectiveSpec("hr").direction == "min"
    assert ObjectiveSpec("r2").direction == "max"
    assert ObjectiveSpec("mt").direction == "max"
    with pytest.raises(ValueError):
        ObjectiveSpec("hr", 1.0)
    with pytest.raises(ValueError):
        ObjectiveSpec("r2", -1.0)
    with pytest.raises(ValueError):
        ObjectiveSpec("nope")


def test_objective_exact_fit_se_and_r2():
    x = np.arange(12.0)
    y = 2 * x + 1
    model = ols_fit(make_phenotypes([x]), make_dataset(y), True)
    assert objective_score(model, ObjectiveSpec("se", 2.0)) == pytest.approx(
        0.0, abs=1e-16
    )
    assert objective_score(model, ObjectiveSpec("r2", 1.0)) == pytest.approx(1.0)


def test_objective_se_uses_exponent():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0.5, 0.5, -0.5, -0.5]) + x
    model = ols_fit(make_phenotypes([x]), make_dataset(y), True, s=1.0)
    expected = float(np.sum(np.abs(model.residuals)))
    assert objective_score(model, ObjectiveSpec("se", 1.0)) == pytest.approx(expected)


def test_objective_mt_power_mean_of_equal_values():
    for s in (0.5, 1.0, 2.0, 3.0):
        model = model_stub(t_stats=(4.2, -4.2, 4.2))
        assert objective_score(model, ObjectiveSpec("mt", s)) == pytest.approx(4.2)


def test_objective_mt_monotone_in_exponent():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        ts = tuple(rng.uniform(0.1, 8.0, size=3))
        model = model_stub(t_stats=ts)
        s1, s2 = sorted(rng.uniform(0.2, 5.0, size=2))
        m1 = objective_score(model, ObjectiveSpec("mt", s1))
        m2 = objective_score(model, ObjectiveSpec("mt", s2))
        assert m1 <= m2 + 1e-12


def test_objective_mt_uses_slopes_only():
    with_icpt = model_stub(t_stats=(99.0, 2.0, 4.0), with_intercept=True)
    bare = model_stub(t_stats=(2.0, 4.0), with_intercept=False)
    for s in (1.0, 2.0):
        spec = ObjectiveSpec("mt", s)
        assert objective_score(with_icpt, spec) == pytest.approx(
            objective_score(bare, spec)
        )


def test_objective_hr_direct_value():
    model = model_stub(r2=0.5)
    assert objective_score(model, ObjectiveSpec("hr", 2.0)) == pytest.approx(1.0)


def test_objective_hr_boundaries():
    for s in (0.5, 2.0, 3.0):
        assert objective_score(model_stub(r2=0.0), ObjectiveSpec("hr", s)) == \
            pytest.approx(0.0, abs=1e-12)
        assert objective_score(model_stub(r2=1.0), ObjectiveSpec("hr", s)) == \
            pytest.approx(0.0, abs=1e-12)


# --- selection scores ------------------------------------------------------------


def test_selection_nalive_counts_memberships():
    models = [
        ((0, 1), model_stub()),
        ((0, 2), model_stub()),
        ((1, 2), model_stub()),
    ]
    fs = selection_scores(4, models, "nalive", ObjectiveSpec("r2"))
    assert fs.tolist() == [2.0, 2.0, 2.0, 0.0]


def test_selection_zero_model_worst_value_for_direction():
    fs = selection_scores(3, [((0, 1), model_stub())], "min", ObjectiveSpec("se"))
    assert fs[2] == WORST_MIN_SCORE
    fs = selection_scores(3, [((0, 1), model_stub())], "max", ObjectiveSpec("r2"))
    assert fs[2] == 0.0


def test_selection_empty_model_set_flags_worst():
    fs = selection_scores(3, [], "avg", ObjectiveSpec("r2"))
    assert fs.tolist() == [0.0, 0.0, 0.0]


def test_selection_aggregates_match_membership_oracle():
    models = [
        ((0, 1), model_stub(r2=0.9)),
        ((0, 2), model_stub(r2=0.5)),
        ((1, 2), model_stub(r2=0.7)),
    ]
    spec = ObjectiveSpec("r2", 1.0)
    # brute-force membership oracle
    expected_avg = {0: (0.9 + 0.5) / 2, 1: (0.9 + 0.7) / 2, 2: (0.5 + 0.7) / 2}
    avg = selection_scores(3, models, "avg", spec)
    for i in range(3):
        assert avg[i] == pytest.approx(expected_avg[i])
    assert selection_scores(3, models, "min", spec).tolist() == [0.5, 0.7, 0.5]
    assert selection_scores(3, models, "max", spec).tolist() == [0.9, 0.9, 0.7]


def test_selection_direction_mapping():
    assert selection_direction("nalive", ObjectiveSpec("se")) == "max"
    assert selection_direction("avg", ObjectiveSpec("se")) == "min"
    assert selection_direction("avg", ObjectiveSpec("mt")) == "max"


# --- transform pipeline ------------------------------------------------------------


def test_transform_affine_endpoints():
    state = NormalizationState(0.0, 1.0)
    table = transform_scores([2.0, 3.0, 4.0], state)
    assert table.fs.tolist() == [0.0, 0.5, 1.0]


def test_transform_normalization_uses_running_references():
    state = NormalizationState(0.0, 1.0)
    transform_scores([2.0, 4.0], state)
    table = transform_scores([3.0, 5.0], state)  # extends the running max
    assert state.global_min == 2.0 and state.global_max == 5.0
    assert table.fs.tolist() == [(3 - 2) / 3, 1.0]


def test_transform_degenerate_normalization():
    state = NormalizationState(0.0, 1.0)
    table = transform_scores([7.0, 7.0, 7.0], state)
    assert table.degenerate
    assert table.fs.tolist() == [0.0, 0.0, 0.0]


def test_transform_ranks_doubled_midranks():
    table = transform_scores([10.0, 20.0, 20.0, 30.0], use_ranks=True)
    assert table.fs.tolist() == [1.0, 4.0, 4.0, 7.0]
    assert all(float(v).is_integer() for v in table.fs)


def test_round_significant():
    assert round_significant(0.123456, 3) == 0.123
    assert round_significant(123456.0, 2) == 120000.0
    assert round_significant(0.0, 3) == 0.0
    assert round_significant(-0.0987, 2) == -0.099


def test_transform_rounding_step():
    table = transform_scores([0.123456, 0.123449], digits=4)
    assert table.distinct.tolist() == [0.1234, 0.1235]


def test_transform_groups_and_counts():
    table = transform_scores([5.0, 3.0, 3.0, 1.0])
    assert table.distinct.tolist() == [1.0, 3.0, 5.0]
    assert table.counts.tolist() == [1, 2, 1]
    assert table.groups == ((3,), (1, 2), (0,))


def test_transform_ranks_preserve_argsort():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        raw = rng.normal(size=12)
        table = transform_scores(raw, use_ranks=True)
        assert np.array_equal(np.argsort(raw), np.argsort(table.fs))


def test_transform_normalization_preserves_argmax():
    rng = np.random.default_rng(9)
    for _ in range(200):
        raw = rng.normal(size=10)
        state = NormalizationState(-1.0, 1.0)
        table = transform_scores(raw, state)
        assert np.argmax(raw) == np.argmax(table.fs)
        assert np.argmin(raw) == np.argmin(table.fs)


def test_transform_rejects_bad_input():
    with pytest.raises(ValueError):
        transform_scores([])
    with pytest.raises(ValueError):
        transform_scores([1.0, math.nan])
    with pytest.raises(ValueError):
        transform_scores([1.0], direction="sideways")


# --- survival scores -----------------------------------------------------------------


def binary_genotypes(*indices):
    n = len(indices[0])
    topo = GeneticTopology(tuple(Gene(f"g{i}", ("a", "b")) for i in range(n)))
    return [Genotype(topo, idx) for idx in indices]


def test_survival_duplicates_hit_cap():
    gs = binary_genotypes((0, 0, 0), (0, 0, 0))
    vs = survival_scores(gs, [1.0, 1.0], q=1.0, r=1.0)
    assert vs.tolist() == [SIMILARITY_CAP, SIMILARITY_CAP]


def test_survival_maximally_distant_pair():
    gs = binary_genotypes((0, 0, 0), (1, 1, 1))
    vs = survival_scores(gs, [2.0, 2.0], q=1.0, r=1.0)
    assert vs.tolist() == [2.0, 2.0]


def test_survival_pair_symmetry_and_min_rule():
    gs = binary_genotypes((0, 0, 0), (0, 0, 1), (1, 1, 1))
    fs = [1.0, 2.0, 5.0]
    vs = survival_scores(gs, fs, q=1.0, r=1.0)

    def pair(i, j):
        vsp = abs(fs[i] - fs[j])
        d = [0, 1, 3]
        ncd_ij = {(0, 1): 1, (0, 2): 3, (1, 2): 2}[tuple(sorted((i, j)))]
        return 2.0 / (vsp + (ncd_ij / 3.0) ** 1.0)

    for i in range(3):
        expected = min(pair(i, j) for j in range(3) if j != i)
        assert vs[i] == pytest.approx(expected)


def test_survival_permutation_equivariance():
    rng = random.Random(4)
    topo = GeneticTopology(tuple(Gene(f"g{i}", ("a", "b")) for i in range(5)))
    gs = [Genotype(topo, tuple(rng.randrange(2) for _ in range(5)))
          for _ in range(6)]
    fs = [rng.uniform(0, 3) for _ in range(6)]
    base = survival_scores(gs, fs, q=2.0, r=0.5)
    perm = list(range(6))
    rng.shuffle(perm)
    permuted = survival_scores(
        [gs[i] for i in perm], [fs[i] for i in perm], q=2.0, r=0.5
    )
    for new_pos, old_pos in enumerate(perm):
        assert permuted[new_pos] == pytest.approx(base[old_pos])


def test_survival_needs_two_individuals():
    gs = binary_genotypes((0, 0, 0))
    with pytest.raises(ValueError):
        survival_scores(gs, [1.0], q=1.0, r=1.0)
