import math

import pytest

from bsinfer.core import DomainError
from bsinfer.specfun import (chisq_cdf, chisq_quantile, chisq_sf, delta_set, erf_family, normal_cdf,
                             normal_quantile, psi_set, student_t_cdf)


def test_erf_family_identities():
    erf, erfc, erfcx = erf_family(0.7)
    assert erf + erfc == pytest.approx(1.0, abs=1e-15)
    assert erfcx == pytest.approx(math.exp(0.49) * erfc, rel=1e-14)


def test_erfcx_does_not_overflow():
    # sqrt(2) / 0.01 would overflow the unscaled product
    erf, erfc, erfcx = erf_family(math.sqrt(2.0) / 0.01)
    assert erf == 1.0
    assert math.isfinite(erfcx)
    assert erfcx == pytest.approx(1.0 / (math.sqrt(math.pi) * math.sqrt(2.0) / 0.01), rel=1e-4)


@pytest.mark.parametrize('alpha', [0.05, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0])
def test_psi_and_delta_are_finite(alpha):
    psi = psi_set(alpha)
    delta = delta_set(alpha)
    assert all(math.isfinite(value) for value in psi + delta)
    assert psi.psi1 > 0
    assert delta.delta2 == pytest.approx(2.0 * delta.delta0 ** 2, rel=1e-14)


def test_psi1_small_shape_limit():
    # psi1 behaves like 1 + 4 / alpha^2 for small alpha
    alpha = 0.01
    assert psi_set(alpha).psi1 * alpha ** 2 / 4.0 == pytest.approx(1.0, rel=1e-3)


def test_psi3_is_derivative_of_psi1():
    alpha, h = 0.8, 1e-5
    derivative = (psi_set(alpha + h).psi1 - psi_set(alpha - h).psi1) / (2.0 * h)
    assert psi_set(alpha).psi3 == pytest.approx(-derivative / 4.0, rel=1e-6)


@pytest.mark.parametrize('alpha', [0.0, -1.0, float('inf'), float('nan')])
def test_bad_shape(alpha):
    with pytest.raises(DomainError):
        psi_set(alpha)


def test_normal_functions():
    assert normal_cdf(0.0) == 0.5
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, rel=1e-12)

    with pytest.raises(DomainError):
        normal_quantile(1.0)


def test_chisq_known_values():
    assert chisq_quantile(0.95, 1) == pytest.approx(3.841458820694124, rel=1e-10)
    assert chisq_quantile(0.95, 2) == pytest.approx(5.991464547107979, rel=1e-10)
    assert chisq_quantile(0.99, 2) == pytest.approx(9.210340371976184, rel=1e-10)
    assert chisq_cdf(chisq_quantile(0.9, 3), 3) == pytest.approx(0.9, abs=1e-12)
    assert chisq_sf(5.991464547107979, 2) == pytest.approx(0.05, rel=1e-10)
    assert chisq_quantile(0.0, 4) == 0.0


def test_chisq_sf_tail_precision():
    # 1 - cdf would lose every digit here
    assert 0 < chisq_sf(200.0, 2) < 1e-40
    assert chisq_sf(-3.0, 2) == 1.0


def test_chisq_domain():
    with pytest.raises(DomainError):
        chisq_cdf(-1.0, 2)

    with pytest.raises(DomainError):
        chisq_quantile(1.0, 2)

    with pytest.raises(DomainError):
        chisq_sf(1.0, 0.5)


def test_student_t():
    assert student_t_cdf(0.0, 4) == 0.5
    assert student_t_cdf(2.776445105197793, 4) == pytest.approx(0.975, abs=1e-10)


def test_erf_family_reference_values():
    assert erf_family(0.0) == (0.0, 1.0, 1.0)
    assert erf_family(1.0)[0] == pytest.approx(0.8427007929497149, rel=1e-14)
    erfcx = erf_family(20.0)[2]
    assert erfcx == pytest.approx(1.0 / (20.0 * math.sqrt(math.pi)) * (1.0 - 1.0 / 800.0 + 3.0 / 640000.0), rel=1e-7)


def test_psi_limits():
    large = psi_set(1e6)
    assert large.psi0 == pytest.approx(1.0, abs=1e-5)
    assert large.psi1 == pytest.approx(2.0, abs=1e-5)
    assert psi_set(0.01).psi0 == pytest.approx(0.01 / math.sqrt(2.0 * math.pi), rel=0.01)


def test_psi0_agrees_with_unscaled_product():
    for alpha in (0.4, 1.0, 3.0, 10.0):
        x = math.sqrt(2.0) / alpha
        naive = math.erfc(x) * math.exp(x * x)
        assert psi_set(alpha).psi0 == pytest.approx(naive, rel=1e-12)


@pytest.mark.parametrize('alpha', [10.0 ** k for k in range(-3, 4)] + [0.17, 0.5, 2.0])
def test_coefficient_invariants(alpha):
    psi = psi_set(alpha)
    delta = delta_set(alpha)
    assert psi.psi1 > 0
    assert 0 < psi.psi0 <= 1
    assert delta.delta0 > 0 and delta.delta2 > 0
    assert delta.delta2 == 2.0 * delta.delta0 * delta.delta0


def test_delta_small_shape_limits():
    delta = delta_set(0.01)
    assert delta.delta1 == pytest.approx(1.0, rel=0.01)
    assert delta.delta2 == pytest.approx(0.5, rel=0.01)
    assert delta.delta3 == pytest.approx(0.0, abs=0.01)


@pytest.mark.parametrize('alpha,rel', [(100.0, 0.05), (1e4, 0.01)])
def test_delta_large_shape_limits(alpha, rel):
    delta = delta_set(alpha)
    assert delta.delta1 == pytest.approx(1.0, rel=rel)
    assert delta.delta2 == pytest.approx(0.5, rel=rel)
    assert delta.delta3 == pytest.approx(-0.5, rel=rel)


def test_normal_round_trip():
    for x in (-6.0, -2.5, -0.3, 0.0, 1.7, 4.0):
        assert normal_quantile(normal_cdf(x)) == pytest.approx(x, abs=1e-10)
        assert normal_cdf(-x) == pytest.approx(1.0 - normal_cdf(x), abs=1e-15)


def test_chisq_round_trip():
    for df in range(1, 11):
        assert chisq_cdf(0.0, df) == 0.0

        for p in (0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99):
            assert chisq_cdf(chisq_quantile(p, df), df) == pytest.approx(p, abs=1e-9)


def test_student_t_properties():
    assert student_t_cdf(-1.3, 7) == pytest.approx(1.0 - student_t_cdf(1.3, 7), abs=1e-15)
    assert student_t_cdf(1.5, 1e6) == pytest.approx(normal_cdf(1.5), abs=1e-3)
    assert 1.0 - student_t_cdf(2.1506, 4) == pytest.approx(0.04895, abs=5e-5)

    with pytest.raises(DomainError):
        student_t_cdf(0.0, 0.5)
