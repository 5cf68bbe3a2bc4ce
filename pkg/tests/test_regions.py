import math

import numpy as np
import pytest
from pytest import approx

from app.services.errors import BudgetExceededError, DimensionMismatchError
from app.services.optimizers import AuxSpec
from app.services.probability import ProbabilityTable, conditional_entropy, entropy
from app.services.regions import (Region, berger_yeung_region, check_containment, conditional_rd, hull_and_corners,
                                  joint_inner_region, partial_inner_region, region_from_corners, shannon_rd,
                                  side_info_region, single_letterization_check, wyner_ziv_rd, wyner_ziv_region)
from app.services.two_terminal import CornerRates, DistortionCriterion
from .conftest import h2

HAMMING = DistortionCriterion.hamming(2, 'x1')


def _x1_only_joint() -> DistortionCriterion:
    """Distorsión conjunta que solo mira la primera componente."""
    m = np.array([[float(a != c) for c in range(2) for _ in range(2)] for a in range(2) for _ in range(2)])
    return DistortionCriterion(m, 'joint', 1.0)


def _wz_dsbs_oracle(p: float, D: float) -> float:
    # envolvente convexa de h(p*b) - h(b) con el punto (p, 0), evaluada en D
    best = h2(p * (1 - D) + D * (1 - p)) - h2(D)
    for b in np.linspace(1e-6, D, 20001):
        lam = (p - D) / (p - b)
        best = min(best, lam * (h2(p * (1 - b) + b * (1 - p)) - h2(b)))
    return best


# -- Funciones de una terminal ----------------------------------------------------

@pytest.mark.parametrize('D', [0.05, 0.1, 0.25])
def test_shannon_uniform_binary(D):
    uniform = ProbabilityTable([0.5, 0.5], name='u')
    assert shannon_rd(uniform, HAMMING, D) == approx(1.0 - h2(D), abs=1e-4)


def test_shannon_beyond_max_distortion_is_zero():
    assert shannon_rd(ProbabilityTable([0.5, 0.5]), HAMMING, 0.6) == approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        shannon_rd(ProbabilityTable([0.5, 0.5]), HAMMING, -0.1)


def test_conditional_rd_dsbs(dsbs025):
    assert conditional_rd(dsbs025, HAMMING, 0.1) == approx(h2(0.25) - h2(0.1), abs=1e-3)


def test_side_info_ordering(dsbs025, small_aux):
    D = 0.1
    cond = conditional_rd(dsbs025, HAMMING, D)
    wz = wyner_ziv_rd(dsbs025, HAMMING, D, small_aux)
    plain = shannon_rd(dsbs025.marginal(0), HAMMING, D)
    assert cond - 1e-6 <= wz <= plain + 1e-3


def test_wyner_ziv_below_minimum_distortion(small_aux):
    # la distorsión mínima alcanzable es 0.2
    joint = ProbabilityTable(np.full((2, 2), 0.25))
    d = DistortionCriterion(np.array([[0.2, 1.0], [1.0, 0.2]]), 'x1', 1.0)
    assert math.isinf(wyner_ziv_rd(joint, d, 0.1, small_aux))


@pytest.mark.slow
@pytest.mark.parametrize('D', [0.05, 0.1])
def test_wyner_ziv_matches_dsbs_curve(dsbs025, D):
    oracle = _wz_dsbs_oracle(0.25, D)
    wz = wyner_ziv_rd(dsbs025, HAMMING, D, AuxSpec(seed=0))
    assert wz == approx(oracle, abs=1e-3)
    assert conditional_rd(dsbs025, HAMMING, D) <= wz + 1e-6
    assert wz <= 1.0 - h2(D) + 1e-6


# -- Regiones ---------------------------------------------------------------------

def test_side_info_region_contains_endpoints(dsbs01, small_aux):
    region = side_info_region(dsbs01, small_aux)
    assert region.coords == ('r1', 'r2')
    assert region.contains([conditional_entropy(dsbs01, 0, 1), entropy(dsbs01, 1)], tol=1e-6)
    assert region.contains([entropy(dsbs01, 0), 0.0], tol=1e-6)
    assert not region.contains([conditional_entropy(dsbs01, 0, 1) - 0.05, entropy(dsbs01, 1)])
    assert region.verify()


def test_wyner_ziv_region_rows_and_witnesses(dsbs025, small_aux):
    region = wyner_ziv_region(dsbs025, HAMMING, small_aux, targets=[0.1])
    assert region.coords == ('r1', 'd')
    rows = region.rows()
    assert len(rows) == len(region)
    assert set(rows[0]) == {'problem', 'order', 'r1', 'r2', 'd', 'witnessId'}
    assert all(r['witnessId'] in region.witnesses for r in rows)
    # X1 completa: tasa H(X1|X2), distorsión 0
    assert region.contains([conditional_entropy(dsbs025, 0, 1), 0.0], tol=1e-6)
    assert region.verify()


def test_berger_yeung_anchor_points(dsbs01, small_aux):
    region = berger_yeung_region(dsbs01, DistortionCriterion.hamming(2, 'x2'), small_aux)
    h1 = entropy(dsbs01, 0)
    assert region.contains([h1, conditional_entropy(dsbs01, 1, 0), 0.0], tol=1e-6)
    assert region.contains([h1, 0.0, 0.1], tol=1e-6)
    assert region.verify()


def test_joint_region_anchor_points(dsbs01, small_aux):
    region = joint_inner_region(dsbs01, DistortionCriterion.hamming(4, 'joint'), aux=small_aux)
    assert region.contains([0.0, 0.0, 0.55], tol=1e-6)
    assert region.contains([entropy(dsbs01, 0), conditional_entropy(dsbs01, 1, 0), 0.0], tol=1e-6)
    assert region.contains([conditional_entropy(dsbs01, 0, 1), entropy(dsbs01, 1), 0.0], tol=1e-6)


def test_joint_region_contains_partial(dsbs01, small_aux):
    partial = partial_inner_region(dsbs01, HAMMING, aux=small_aux)
    joint = joint_inner_region(dsbs01, _x1_only_joint(), aux=small_aux)
    assert check_containment(partial, joint, tol=1e-4).contained


def test_order_cap(dsbs01):
    with pytest.raises(BudgetExceededError):
        wyner_ziv_region(dsbs01, HAMMING, order=3)
    ternary = ProbabilityTable(np.full((3, 2), 1 / 6))
    with pytest.raises(BudgetExceededError):
        wyner_ziv_region(ternary, DistortionCriterion.hamming(3, 'x1'), order=2)


@pytest.mark.slow
def test_single_letterization_holds(dsbs025):
    report = single_letterization_check(dsbs025, HAMMING, [0.05, 0.1, 0.2], AuxSpec(seed=0))
    assert report.holds
    assert len(report.rows()) == 3


# -- Geometría ----------------------------------------------------------------------

def _segment() -> Region:
    return Region('test', 1, ('r1', 'r2'), np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]))


def test_minimize_and_violation():
    region = _segment()
    assert region.minimize({'r1': 1.0, 'r2': 1.0}) == approx(1.0)
    assert region.minimize('r1', {'r2': 0.25}) == approx(0.75)
    assert region.violation([0.2, 0.2]) == approx(0.3)
    assert region.contains([1.0, 1.0])
    with pytest.raises(DimensionMismatchError):
        region.violation([0.1, 0.2, 0.3])


def test_translation_containment():
    region = _segment()
    assert check_containment(region.translated({'r1': 0.1, 'r2': 0.1}), region).contained
    res = check_containment(region.translated({'r1': -0.1, 'r2': -0.1}), region)
    assert not res.contained
    assert res.worst_violation == approx(0.1, abs=1e-6)


def test_translation_in_one_rate_only():
    region = _segment()
    assert check_containment(region.translated({'r1': 0.1}), region).contained
    res = check_containment(region.translated({'r1': -0.1}), region)
    assert not res.contained
    assert res.worst_violation == approx(0.1, abs=1e-6)
    assert res.violations[0] == approx(0.1, abs=1e-6)


def test_side_info_region_translated_in_r1(dsbs01, small_aux):
    region = side_info_region(dsbs01, small_aux)
    assert check_containment(region.translated({'r1': 0.1}), region).contained
    res = check_containment(region.translated({'r1': -0.1}), region)
    assert not res.contained
    assert res.worst_violation == approx(0.1, abs=1e-6)


def test_hull_corners_skip_collinear_points():
    report = hull_and_corners(_segment())
    assert report.corners.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert report.corner_indices == (0, 1)


def test_empty_region():
    region = Region('test', 1, ('r1', 'd'), np.zeros((0, 2)))
    assert math.isinf(region.minimize('r1'))
    assert math.isinf(region.violation([0.0, 0.0]))
    assert region.rows() == []
    with pytest.raises(DimensionMismatchError):
        hull_and_corners(region)


def test_region_from_corners():
    region = region_from_corners(CornerRates((0.2, 0.5), (0.4, 0.3), 0.7), d=0.1)
    assert region.coords == ('r1', 'r2', 'd')
    assert region.contains([0.3, 0.4, 0.1])
    assert not region.contains([0.2, 0.3, 0.1])


# -- Par independiente ----------------------------------------------------------------

def test_independent_pair_side_info_is_useless(small_aux):
    pair = ProbabilityTable(np.full((2, 2), 0.25))
    assert wyner_ziv_rd(pair, HAMMING, 0.1, small_aux) == approx(1 - h2(0.1), abs=2e-3)


@pytest.mark.slow
def test_independent_pair_second_order():
    pair = ProbabilityTable(np.full((2, 2), 0.25))
    report = single_letterization_check(pair, HAMMING, [0.1, 0.25], AuxSpec(seed=0))
    assert report.holds
    for r1, r2 in zip(report.rates_first_order, report.rates_second_order):
        assert r2 >= r1 - report.tolerance
