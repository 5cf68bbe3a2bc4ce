import numpy as np
import pytest
from pytest import approx

from app.services.errors import DimensionMismatchError
from app.services.optimizers import (AuxSpec, best_index, bisect_slope, blahut_arimoto, corner_terms,
                                     distortion_range, exponentiated_gradient, information_bottleneck,
                                     parametric_rd, random_channels, side_info_am)
from app.services.probability import compose_chain, conditional_entropy, dsbs, entropy, random_chain_model
from app.services.seeding import binomial_sigma, derive_rng, is_monotone_nonincreasing, run_trials
from app.services.two_terminal import corner_rates
from .conftest import h2

HAMMING2 = 1.0 - np.eye(2)


# -- Blahut-Arimoto -------------------------------------------------------------------

def test_blahut_arimoto_binary_symmetric():
    sol = blahut_arimoto(np.array([0.5, 0.5]), HAMMING2, beta=2.0)
    assert sol.distortion == approx(1.0 / (1.0 + np.exp(2.0)), abs=1e-6)
    assert sol.rate == approx(1.0 - h2(sol.distortion), abs=1e-6)


def test_blahut_arimoto_mask_gives_lossless_rate():
    mask = np.eye(2, dtype=bool)
    sol = blahut_arimoto(np.array([0.3, 0.7]), HAMMING2, 0.0, mask=mask)
    assert sol.distortion == approx(0.0, abs=1e-12)
    assert sol.rate == approx(h2(0.3), abs=1e-6)


def test_blahut_arimoto_shape_check():
    with pytest.raises(DimensionMismatchError):
        blahut_arimoto(np.array([0.2, 0.3, 0.5]), HAMMING2, 1.0)


def test_distortion_range():
    assert distortion_range(np.array([0.3, 0.7]), HAMMING2) == approx((0.0, 0.3))


def test_parametric_rd_hits_target():
    rate, sols = parametric_rd([(1.0, np.array([0.5, 0.5]))], HAMMING2, 0.1)
    assert rate == approx(1.0 - h2(0.1), abs=1e-6)
    assert sols


# -- Información lateral y cuello de botella ------------------------------------------

def test_side_info_am_respects_bounds():
    p_ab = dsbs(0.25).mass
    cost = np.broadcast_to(HAMMING2[:, None, :], (2, 2, 2)).copy()
    q0 = random_channels(derive_rng(0, 5), 4, 2, 4)
    res = side_info_am(p_ab, cost, beta=6.0, q0=q0)
    for r in range(4):
        d = float(res.distortion[r])
        assert d <= 0.25 + 1e-9
        # nunca por debajo de la curva con información lateral en ambos extremos
        assert res.rate[r] >= h2(0.25) - h2(min(d, 0.25)) - 1e-9
        assert res.lagrangian[r] == approx(res.rate[r] * np.log(2) + 6.0 * d)


def test_information_bottleneck_data_processing():
    p = dsbs(0.1)
    q0 = random_channels(derive_rng(0, 6), 3, 2, 4)
    res = information_bottleneck(p.mass.T, 5.0, q0)
    for r in range(3):
        assert res.rate[r] <= entropy(p, 1) + 1e-9
        assert res.residual[r] >= conditional_entropy(p, 0, 1) - 1e-9
        assert res.residual[r] <= entropy(p, 0) + 1e-9


# -- Gradiente exponenciado -------------------------------------------------------------

@pytest.mark.parametrize('corner', [0, 1])
def test_corner_terms_match_corner_rates(corner):
    model = random_chain_model(seed=3, index=1)
    j = model.joint()
    c = corner_rates(model)
    rates = c.corner0 if corner == 0 else c.corner1
    terms = corner_terms(corner, 2.0, 0.5)
    value = sum(coef * entropy(j, axes) for axes, coef in terms.items())
    assert value == approx(2.0 * rates[0] + 0.5 * rates[1], abs=1e-10)
    with pytest.raises(ValueError):
        corner_terms(2)


def test_exponentiated_gradient_never_worsens():
    p12 = dsbs(0.1).mass
    rng = derive_rng(0, 9)
    q1 = random_channels(rng, 3, 2, 3)
    q2 = random_channels(rng, 3, 2, 3)
    res = exponentiated_gradient(p12, corner_terms(1), None, 0.0, q1, q2, max_iterations=200)
    for r in range(3):
        start = corner_rates(compose_chain(dsbs(0.1), q1[r], q2[r])).sum_rate
        assert res.objective[r] <= start + 1e-9
        assert np.allclose(res.q1[r].sum(axis=1), 1.0)


# -- Utilidades ---------------------------------------------------------------------------

def test_bisect_slope_brackets_target():
    above, below = bisect_slope(lambda b: (1.0 / b, b), 0.5, 0.1, 100.0)
    assert above < 2.0 <= below
    assert below == approx(2.0, rel=1e-6)
    assert bisect_slope(lambda b: (1.0 / b, b), 20.0, 0.1, 100.0) == (None, 0.1)


def test_best_index_breaks_ties_by_witness():
    assert best_index(np.array([1.0, 1.0, 2.0]), [np.array([0.5]), np.array([0.2]), np.array([0.0])]) == 1


def test_aux_spec_defaults_and_validation():
    spec = AuxSpec()
    assert spec.cards((2, 2)) == (4, 4)
    assert spec.sweep_points == 17
    with pytest.raises(ValueError):
        AuxSpec(grid_step=0.0)
    with pytest.raises(ValueError):
        AuxSpec(card_z1=0)


# -- Semillas y ensayos -------------------------------------------------------------------

def test_derive_rng_streams():
    a = derive_rng(7, 1, 2).random(4)
    assert np.array_equal(a, derive_rng(7, 1, 2).random(4))
    assert not np.array_equal(a, derive_rng(7, 1, 3).random(4))
    with pytest.raises(ValueError):
        derive_rng(None)


def test_run_trials_independent_of_threads():
    def trial(t):
        x = derive_rng(1, t).random()
        return {'sum': x, 'count': 1}

    one = run_trials(trial, 37, threads=1)
    many = run_trials(trial, 37, threads=4)
    assert one == many
    assert one['count'] == 37
    with pytest.raises(ValueError):
        run_trials(trial, 0)


def test_trend_helpers():
    assert binomial_sigma(10, 100) == approx(0.03)
    assert is_monotone_nonincreasing([0.5, 0.4, 0.42], [0.01] * 3)
    assert not is_monotone_nonincreasing([0.5, 0.4, 0.45], [0.01] * 3)
