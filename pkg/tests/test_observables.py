import numpy as np
import pytest

from conftest import dense_correlation
from ptising import ChainParams, InvalidParameters, NonPositiveStructureFactor
from ptising.observables import (
    CorrelationProfile,
    correlation_length,
    correlation_profile,
    normalize_params,
    order_parameter,
    structure_factor,
)
from ptising.spectra import diagonalize, full_spectrum


def _ground(p):
    return diagonalize(p, k=4).ground_vector


def _flat(n, c):
    return CorrelationProfile(n, np.full(n + 1, c, dtype=complex))


def _delta_like(n):
    v = np.zeros(n + 1)
    v[0] = v[-1] = 1
    return CorrelationProfile(n, v)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_product_state_profile(n):
    p = ChainParams(n, 1.0, 0.0, 0.6)
    prof = correlation_profile(_ground(p), p)
    assert prof.values[0] == pytest.approx(1.0, abs=1e-12)
    assert prof.values[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(prof.values[1:-1])) < 1e-12
    assert order_parameter(prof) < 1e-6


def test_strong_ferromagnet():
    p = ChainParams(6, 1.0, 200.0, 0.0)
    prof = correlation_profile(_ground(p), p)
    assert np.all(prof.values.real > 0.999)
    assert order_parameter(prof) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("j, g", [(0.8, 0.4), (-0.9, 0.3), (-0.8, 1.2)])
def test_matches_dense_operator_oracle(j, g):
    p = ChainParams(8, 1.0, j, g)
    v = _ground(p)
    prof = correlation_profile(v, p)
    np.testing.assert_allclose(prof.values, dense_correlation(v, 8), atol=1e-12)


def test_reference_site_wraps():
    p = ChainParams(6, 1.0, 0.5, 0.3)
    v = _ground(p)
    prof = correlation_profile(v, p, reference_site=4)
    np.testing.assert_allclose(prof.values, dense_correlation(v, 6, ref=3), atol=1e-12)


def test_renormalizes_with_warning():
    p = ChainParams(4, 1.0, 0.5, 0.3)
    v = _ground(p)
    with pytest.warns(RuntimeWarning):
        prof = correlation_profile(3 * v, p)
    assert prof.values[0] == pytest.approx(1.0)


def test_biorthogonal_variant():
    p = ChainParams(4, 1.0, 0.5, 0.3)
    s = full_spectrum(p, left=True)
    g = s.ground_index
    prof = correlation_profile(s.right_vectors[:, g], p, left=s.left_vectors[:, g])
    assert prof.values[0] == pytest.approx(1.0, abs=1e-12)
    assert prof.values[-1] == pytest.approx(1.0, abs=1e-12)


def test_bad_reference_site():
    p = ChainParams(4)
    with pytest.raises(InvalidParameters):
        correlation_profile(np.ones(16) / 4, p, reference_site=5)


def test_structure_factor_examples():
    assert structure_factor(_delta_like(8), 2 * np.pi / 8) == pytest.approx(2.0)
    assert structure_factor(_flat(8, 1.0), 2 * np.pi / 8) == pytest.approx(1.0)
    assert structure_factor(_flat(8, 1.0), 2 * np.pi / 8, include_endpoint=False) == pytest.approx(0.0, abs=1e-12)


def test_structure_factor_af_uses_modulus():
    p = ChainParams(8, 1.0, -0.9, 0.3)
    v = _ground(p)
    prof = correlation_profile(v, p)
    assert prof.af_mode
    c = np.abs(dense_correlation(v, 8))
    q = 2 * np.pi / 8
    assert structure_factor(prof, q) == pytest.approx(np.sum(np.cos(q * np.arange(9)) * c), abs=1e-12)


def test_correlation_length_examples():
    assert correlation_length(_delta_like(10)) == 0.0
    n = 10
    assert correlation_length(_flat(n, 1.0)) == pytest.approx(n / (2 * np.pi) * np.sqrt(n))


def test_correlation_length_nonpositive_s1():
    v = np.zeros(9)
    v[0] = 1
    v[1] = v[7] = -1
    with pytest.raises(NonPositiveStructureFactor):
        correlation_length(CorrelationProfile(8, v))


def test_hermitian_profile_symmetric_and_reference_free():
    p = ChainParams(8, 1.0, 0.7, 0.0)
    v = _ground(p)
    a = correlation_profile(v, p)
    b = correlation_profile(v, p, reference_site=3)
    assert np.max(np.abs(a.values.imag)) < 1e-10
    assert a.asymmetry() < 1e-10
    assert correlation_length(a) == pytest.approx(correlation_length(b), abs=1e-10)


def test_order_parameter_needs_even_n():
    with pytest.raises(InvalidParameters):
        order_parameter(CorrelationProfile(3, np.ones(4)))


def test_order_parameter_bounded():
    for j, g in [(-0.8, 1.2), (0.4, 1.5), (1.2, 0.2)]:
        p = ChainParams(8, 1.0, j, g)
        assert 0.0 <= order_parameter(correlation_profile(_ground(p), p)) <= 1.0


def test_profile_shape_checked():
    with pytest.raises(ValueError):
        CorrelationProfile(4, np.ones(4))


def test_normalize_params():
    assert normalize_params(ChainParams(2, 1.0, 1.0)).j_tilde == pytest.approx(0.707107, abs=1e-6)
    assert normalize_params(ChainParams(2, 1.0, 0.0, 0.21)).gamma_tilde == pytest.approx(0.21)
    np_ = normalize_params(ChainParams(2, 1.0, -1.0, 0.48375 * np.sqrt(2)))
    assert np_.gamma_tilde == pytest.approx(0.48375)
    assert np_.scale_energy(np.sqrt(2)) == pytest.approx(1.0)
