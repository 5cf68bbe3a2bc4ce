import numpy as np
import pytest
from pytest import approx

from app.services.codes_binned import (BinSizing, BinnedCodebook, attach_bins, binned_code_schedule, binned_decode,
                                       binned_encode, choose_bin_sizes, generate_binned_codebook,
                                       simulate_binned_code)
from app.services.codes_point import Codebook
from app.services.probability import ProbabilityTable, bsc_channel
from app.services.seeding import binomial_sigma, is_monotone_nonincreasing
from app.services.typicality import TypicalityParams

UNIFORM = ProbabilityTable([0.5, 0.5], name='uniform')
COPY = ProbabilityTable([[0.5, 0.0], [0.0, 0.5]], name='copy')
PARAMS = TypicalityParams(0.1, 4)


def _binned(rows, bins, k2):
    inner = Codebook(codewords=np.array(rows, dtype=np.int64), marginal=np.array([0.5, 0.5]), seed=0)
    return BinnedCodebook(inner=inner, bin_map=np.array(bins, dtype=np.int64), k2=k2, seed=0)


def test_sizing_example():
    s = choose_bin_sizes(0.6, 0.2, 0.05, 0.05, 20)
    assert (s.log2_k1, s.log2_k2) == (14, 12)
    assert s.rate == approx(0.6)
    assert s.rate <= s.rate_bound + 1e-12


def test_no_side_information_no_gain():
    s = choose_bin_sizes(0.6, 0.0, 0.05, 0.05, 20)
    assert s.k2 == s.k1


def test_gain_clamped_at_zero():
    s = choose_bin_sizes(0.6, 0.2, 0.05, 0.4, 20)
    assert s.k2 == s.k1


def test_single_bin():
    book = generate_binned_codebook(BinSizing.fixed(4, 0, 8), UNIFORM.mass, seed=1)
    assert np.all(book.bin_map == 1)


def test_same_seed_same_bins():
    a = generate_binned_codebook(BinSizing.fixed(6, 3, 8), UNIFORM.mass, seed=12)
    b = generate_binned_codebook(BinSizing.fixed(6, 3, 8), UNIFORM.mass, seed=12)
    assert np.array_equal(a.inner.codewords, b.inner.codewords)
    assert np.array_equal(a.bin_map, b.bin_map)


def test_equal_sizes_use_identity_bins():
    inner = generate_binned_codebook(BinSizing.fixed(5, 5, 8), UNIFORM.mass, seed=3)
    assert inner.bin_map.tolist() == list(range(1, 33))


def test_second_moment_of_bin_loads():
    book = generate_binned_codebook(BinSizing.fixed(14, 12, 8), UNIFORM.mass, seed=9)
    expected = 4.0 ** 2 + 4.0
    assert book.second_moment() == approx(expected, rel=0.05)


def test_encode_maps_codeword_to_its_bin():
    y = np.array([0, 1, 0, 1])
    rows = [[1, 1, 1, 1]] * 4 + [y.tolist()] + [[0, 0, 0, 0]]
    book = _binned(rows, [1, 2, 1, 2, 3, 1], 3)
    res = binned_encode(book, y, COPY, PARAMS)
    assert (res.codeword_index, res.bin_index, res.covered) == (5, 3, True)


def test_encode_ties_and_fallback():
    y = np.array([0, 1, 0, 1])
    rows = [[1, 1, 1, 1]] * 9
    rows[1] = rows[8] = y.tolist()
    book = _binned(rows, [2, 3, 1, 1, 1, 1, 1, 1, 2], 3)
    assert binned_encode(book, y, COPY, PARAMS).codeword_index == 2
    miss = _binned([[1, 1, 1, 1], [0, 0, 0, 0]], [2, 1], 2)
    res = binned_encode(miss, y, COPY, PARAMS)
    assert (res.codeword_index, res.bin_index, res.covered) == (1, 2, False)


def test_decode_unique_empty_and_multiple():
    y2 = np.array([0, 1, 1, 0])
    rows = [y2.tolist(), [1, 1, 1, 1], y2.tolist(), y2.tolist()]
    book = _binned(rows, [1, 1, 2, 2], 3)
    assert binned_decode(book, 1, y2, COPY, PARAMS).index == 1
    assert binned_decode(book, 3, y2, COPY, PARAMS).failure == 'none'
    assert binned_decode(book, 2, y2, COPY, PARAMS).failure == 'multiple'


def test_single_bin_forces_collisions(dsbs025):
    params = TypicalityParams(2.0, 12)
    report = simulate_binned_code(dsbs025, bsc_channel(0.1), BinSizing.fixed(10, 0, 12), params, trials=200, seed=2)
    assert report.tally.e3 / report.tally.trials > 0.5


def test_independent_side_info_without_binning_has_no_collisions():
    pair = ProbabilityTable(np.full((2, 2), 0.25), name='indep')
    report = simulate_binned_code(pair, bsc_channel(0.1), BinSizing.fixed(8, 8, 12), TypicalityParams(2.0, 12),
                                  trials=150, seed=3)
    assert report.tally.e3 == 0


def test_attach_bins_reuses_codewords():
    book = generate_binned_codebook(BinSizing.fixed(6, 6, 8), UNIFORM.mass, seed=4)
    rebinned = attach_bins(book.inner, 4, seed=4)
    assert rebinned.inner is book.inner
    assert rebinned.bin_loads().sum() == 64


@pytest.mark.slow
def test_schedule_error_nonincreasing_and_union_accounting(dsbs025):
    # Con epsilon=3.5 el codificador acepta la primera palabra del libro: la tasa depende del peso de
    # esa palabra, así que se promedia sobre 20 libros (10^4 ensayos por n').
    failures = np.zeros(3)
    trials = 0
    for seed in range(20):
        schedule = binned_code_schedule(dsbs025, bsc_channel(0.1), 3.5, 0.125, 0.5, [8, 12, 16],
                                        trials=500, seed=100 + seed)
        failures += [p.tally.overall for p in schedule.points]
        trials += 500
        assert all(p.tally.union_violations == 0 for p in schedule.points)
        assert all(p.tally.consistency_violations == 0 for p in schedule.points)
    rates = failures / trials
    assert trials == 10_000
    assert 0.02 < rates[0] < 0.5
    assert rates[-1] < rates[0]
    assert is_monotone_nonincreasing(rates, [binomial_sigma(f, trials) for f in failures])
