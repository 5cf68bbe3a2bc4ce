"""Tipicidad fuerte: conteos, test, probabilidades exactas y comprobaciones de sándwich y lema de Markov."""
import numpy as np
import pytest
from pytest import approx

from app.services.errors import BudgetExceededError, DimensionMismatchError, FactorizationError, TypicalityError
from app.services.probability import ProbabilityTable, bsc_channel, compose_chain, constant_channel, identity_channel
from app.services.typicality import (TypicalityParams, check_markov_lemma, check_sandwich_bounds, count_occurrences,
                                     exact_type_sequence, exact_typicality_probability, is_strongly_typical,
                                     monte_carlo_typicality_probability, sandwich_schedule)

from .conftest import fixed_joint_chain, xor_joint

UNIFORM = ProbabilityTable([0.5, 0.5], name='uniform')
COPY = ProbabilityTable([[0.5, 0.0], [0.0, 0.5]], name='copy')


def test_count_occurrences_examples():
    assert count_occurrences(np.array([0, 1, 1, 0]), 0) == 2
    assert count_occurrences(np.array([0, 0, 0, 0]), 0) == 4
    pairs = (np.array([0, 1, 0]), np.array([1, 0, 1]))
    assert count_occurrences(pairs, (0, 1)) == 2


def test_count_occurrences_symbol_outside_alphabet():
    with pytest.raises(DimensionMismatchError):
        count_occurrences(np.array([0, 1]), 3, sizes=(2,))


def test_exact_type_is_typical_for_any_epsilon():
    seq = np.array([0, 1] * 5)
    for eps in (1e-6, 0.01, 1.0):
        assert is_strongly_typical(seq, UNIFORM, TypicalityParams(eps, 10)).is_typical


def test_constant_sequence_not_typical():
    verdict = is_strongly_typical(np.zeros(4, dtype=int), UNIFORM, TypicalityParams(0.1, 4))
    assert not verdict.is_typical
    assert verdict.max_deviation == approx(1.0)


def test_six_zeros_out_of_ten_is_typical():
    seq = np.array([0] * 6 + [1] * 4)
    assert is_strongly_typical(seq, UNIFORM, TypicalityParams(0.5, 10)).is_typical


def test_typicality_monotone_in_epsilon():
    rng = np.random.default_rng(5)
    for _ in range(50):
        seq = rng.integers(0, 2, size=12)
        verdicts = [is_strongly_typical(seq, UNIFORM, TypicalityParams(e, 12)).is_typical for e in (0.2, 0.5, 1.0)]
        for a, b in zip(verdicts, verdicts[1:]):
            assert not a or b


def test_support_restricted_rejects_zero_probability_cells():
    law = ProbabilityTable([0.5, 0.5, 0.0], name='three')
    seq = np.array([0, 1, 0, 1, 2, 0, 1, 0])
    assert is_strongly_typical(seq, law, TypicalityParams(1.0, 8)).is_typical
    assert not is_strongly_typical(seq, law, TypicalityParams(1.0, 8, support_restricted=True)).is_typical


def test_length_mismatch_rejected():
    with pytest.raises(DimensionMismatchError):
        is_strongly_typical(np.array([0, 1, 0]), UNIFORM, TypicalityParams(0.5, 4))


def test_invalid_params():
    with pytest.raises(ValueError):
        TypicalityParams(0.0, 4)
    with pytest.raises(ValueError):
        TypicalityParams(0.1, 0)


def test_exact_probability_with_huge_epsilon_is_one():
    assert exact_typicality_probability(UNIFORM, TypicalityParams(2.5, 9)) == approx(1.0)


def test_exact_probability_copy_channel_is_two_to_minus_n():
    n = 8
    cond = exact_type_sequence(UNIFORM, n)
    prob = exact_typicality_probability(COPY, TypicalityParams(0.1, n), cond)
    assert prob == approx(2.0 ** -n, rel=1e-12)


def test_type_classes_match_enumeration(dsbs01):
    params = TypicalityParams(0.4, 8)
    cond = exact_type_sequence(dsbs01.marginal(0), 8)
    by_types = exact_typicality_probability(dsbs01, params, cond)
    by_enum = exact_typicality_probability(dsbs01, params, cond, method='enumerate')
    assert by_types == approx(by_enum, abs=1e-12)


def test_exact_matches_monte_carlo(dsbs01):
    params = TypicalityParams(0.4, 12)
    exact = exact_typicality_probability(dsbs01, params)
    est, sigma = monte_carlo_typicality_probability(dsbs01, params, trials=4000, seed=17)
    assert abs(est - exact) <= 3 * max(sigma, 1e-3)


def test_enumeration_budget():
    with pytest.raises(BudgetExceededError):
        exact_typicality_probability(UNIFORM, TypicalityParams(0.5, 30), method='enumerate')


def test_sandwich_independent_pair():
    law = ProbabilityTable(np.full((2, 2), 0.25), name='indep')
    cond = exact_type_sequence(law.marginal(0), 8)
    report = check_sandwich_bounds(law, cond, TypicalityParams(0.4, 8))
    assert report.mutual_information == approx(0.0, abs=1e-12)
    assert report.holds
    assert report.upper >= 1.0 - 1e-12


def test_sandwich_copy_channel_exact():
    cond = exact_type_sequence(UNIFORM, 8)
    report = check_sandwich_bounds(COPY, cond, TypicalityParams(0.1, 8))
    assert report.probability == approx(2.0 ** -8)
    assert report.mutual_information == approx(1.0)
    assert report.epsilon1 == approx(0.0, abs=1e-9)


def test_sandwich_shrinks_with_block_length(dsbs01):
    schedule = sandwich_schedule(dsbs01, [8, 12], 0.4)
    assert all(p.holds for p in schedule.points)
    assert schedule.shrinking
    assert schedule.points[0].probability == approx(25 / 256, rel=1e-9)
    assert schedule.points[1].epsilon1 < schedule.points[0].epsilon1


def test_sandwich_requires_typical_condition(dsbs01):
    cond = (np.zeros(8, dtype=int),)
    with pytest.raises(TypicalityError):
        check_sandwich_bounds(dsbs01, cond, TypicalityParams(0.4, 8))


def test_markov_lemma_identity_aux_never_fails(dsbs025):
    model = compose_chain(dsbs025, identity_channel(2), constant_channel(2))
    report = check_markov_lemma(model, 1.0, [8, 16], trials=300, seed=1, support_restricted=True)
    assert all(p.failures == 0 for p in report.points)
    assert report.points[0].conditioned > 0


@pytest.mark.slow
def test_markov_lemma_trend(dsbs025):
    model = compose_chain(dsbs025, bsc_channel(0.1), constant_channel(2))
    report = check_markov_lemma(model, 1.0, [8, 16, 24], trials=10_000, seed=3)
    assert report.monotone


def test_markov_lemma_with_independent_second_source():
    # Y2 independiente de (Y1, Z1): la terna sólo falla por fluctuación de sus celdas
    source = ProbabilityTable(np.outer([0.5, 0.5], [0.5, 0.5]), name='independent')
    model = compose_chain(source, bsc_channel(0.1), constant_channel(2))
    report = check_markov_lemma(model, 2.0, [8, 32, 64], trials=2000, seed=4)
    assert all(p.conditioned > 1000 for p in report.points)
    assert report.points[0].rate > 0.05
    assert report.points[-1].rate < 0.01
    assert report.monotone


def test_markov_lemma_rejects_non_chain_model():
    with pytest.raises(FactorizationError):
        check_markov_lemma(fixed_joint_chain(xor_joint()), 1.0, [8], trials=10, seed=0)
