import math

import numpy as np
import pytest
from pytest import approx

from app.services.codes_point import (CodeSizing, Codebook, choose_codebook_size, encode, generate_codebook,
                                      point_code_schedule, simulate_point_code)
from app.services.errors import BudgetExceededError, SizingError
from app.services.probability import ProbabilityTable, bsc_channel, identity_channel
from app.services.typicality import TypicalityParams

UNIFORM = ProbabilityTable([0.5, 0.5], name='uniform')
COPY = ProbabilityTable([[0.5, 0.0], [0.0, 0.5]], name='copy')


def _codebook(rows):
    return Codebook(codewords=np.array(rows, dtype=np.int64), marginal=np.array([0.5, 0.5]), seed=0)


def test_sizing_examples():
    s = choose_codebook_size(0.5, 0.05, 20)
    assert 12 <= s.log2_size <= 13
    assert s.codebook_size == 4096
    assert choose_codebook_size(0.0, 0.05, 20).codebook_size == 4


def test_sizing_budget_refusal():
    with pytest.raises(BudgetExceededError) as info:
        choose_codebook_size(1.0, 0.05, 40, budget=1 << 26)
    assert info.value.required >= 2.0 ** 44


def test_sizing_empty_window_reports_minimal_length():
    with pytest.raises(SizingError) as info:
        choose_codebook_size(0.3, 0.01, 1)
    assert info.value.minimal_n_prime is not None and info.value.minimal_n_prime > 1


def test_codebook_point_mass_and_seed():
    sizing = CodeSizing.fixed(32, 6)
    book = generate_codebook(sizing, np.array([0.0, 1.0]), seed=3)
    assert np.all(book.codewords == 1)
    a = generate_codebook(sizing, UNIFORM, seed=8)
    b = generate_codebook(sizing, UNIFORM, seed=8)
    assert np.array_equal(a.codewords, b.codewords)


def test_codebook_pooled_frequency():
    book = generate_codebook(CodeSizing.fixed(50_000, 20), UNIFORM, seed=2)
    assert abs(book.codewords.mean() - 0.5) < 0.005


def test_encode_picks_smallest_typical_index():
    y = np.array([0, 1, 0, 1])
    rows = [[1, 1, 1, 1], [0, 0, 0, 0], y, [1, 0, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0], y]
    res = encode(_codebook(rows), y, COPY, TypicalityParams(0.1, 4))
    assert res.index == 3 and res.covered


def test_encode_fallback_when_uncovered():
    res = encode(_codebook([[1, 0, 1, 0]]), np.array([0, 1, 0, 1]), COPY, TypicalityParams(0.1, 4))
    assert (res.index, res.covered) == (1, False)


def test_encode_atypical_input_never_covered():
    y = np.zeros(4, dtype=np.int64)
    res = encode(_codebook([[0, 0, 0, 0], [0, 1, 0, 1]]), y, COPY, TypicalityParams(0.1, 4))
    assert not res.covered


def test_rate_far_below_information_fails():
    report = simulate_point_code(UNIFORM, identity_channel(2), CodeSizing.fixed(2, 16), TypicalityParams(1.0, 16),
                                 trials=500, seed=4)
    assert report.failure_rate > 0.9


def test_identity_channel_reproduces_input():
    params = TypicalityParams(1.0, 8, support_restricted=True)
    report = simulate_point_code(UNIFORM, identity_channel(2), CodeSizing.fixed(4096, 8), params, trials=300, seed=6,
                                 distortion=1.0 - np.eye(2))
    assert report.failure_rate < 0.05
    assert report.mean_distortion <= report.failure_rate + 1e-12


def test_report_carries_analytic_bound():
    sizing = choose_codebook_size(1 - 0.468996, 0.125, 8)
    report = simulate_point_code(UNIFORM, bsc_channel(0.1), sizing, TypicalityParams(1.0, 8), trials=200, seed=1)
    assert report.analytic_bound is not None
    assert report.rate == approx(math.log2(sizing.codebook_size) / 8)


def test_simulation_is_thread_independent():
    sizing = CodeSizing.fixed(64, 8)
    a = simulate_point_code(UNIFORM, bsc_channel(0.1), sizing, TypicalityParams(1.0, 8), trials=120, seed=5, threads=1)
    b = simulate_point_code(UNIFORM, bsc_channel(0.1), sizing, TypicalityParams(1.0, 8), trials=120, seed=5, threads=3)
    assert a.failures == b.failures


@pytest.mark.slow
def test_schedule_failure_rate_nonincreasing():
    schedule = point_code_schedule(UNIFORM, bsc_channel(0.1), 0.75, 0.125, [8, 12, 16], trials=10_000, seed=7)
    rates = [p.failure_rate for p in schedule.points]
    # a n' = 8 falla sobre todo por entradas atípicas: lejos de 0 y de 1
    assert 0.1 < rates[0] < 0.9
    assert rates[-1] < rates[0]
    assert schedule.monotone
    assert len(schedule.rows()) == 3
