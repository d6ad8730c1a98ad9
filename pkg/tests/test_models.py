import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moldgrowth.models import (
    DomainError,
    EnvPoint,
    HygroProps,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    diffusion_time_and_fourier,
    dt1_dm0,
    k1,
    k2,
    logistic_class,
    logistic_closed_form,
    logistic_rhs,
    logistic_sensitivity_m0,
    m_max,
    response_time_f,
    time_to_index_one,
    vtt_class,
    vtt_rhs,
)

from oracles import f_decimal, m_max_decimal

BAMBOO_PRIOR = VttClassParams(1.0, 2.0, 1.0, 7.0, -2.0, 0.75)


def test_response_time_reference_value():
    assert response_time_f(EnvPoint(22.0, 0.97)) == pytest.approx(233.6, abs=0.05)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 50.0), st.floats(0.3, 1.0))
def test_response_time_matches_decimal(T, phi):
    ref = float(f_decimal(T, phi))
    assert abs(response_time_f(EnvPoint(T, phi)) - ref) <= 1e-12 * ref


def test_response_time_is_decreasing_in_humidity():
    values = [response_time_f(EnvPoint(25.0, p)) for p in (0.75, 0.84, 0.97)]
    assert values[0] > values[1] > values[2]


def test_scaled_coefficients():
    c = ResponseCoeffs().scaled("b3", 0.99)
    assert c.b3 == pytest.approx(66.02 * 0.99)
    assert c.b0 == 168.0
    with pytest.raises(KeyError):
        ResponseCoeffs().scaled("b4", 1.0)


def test_m_max_prior_values():
    assert m_max(0.75, BAMBOO_PRIOR) == pytest.approx(1.0)
    assert m_max(0.84, BAMBOO_PRIOR) == pytest.approx(3.26, abs=0.005)
    assert m_max(0.97, BAMBOO_PRIOR) == pytest.approx(5.61, abs=0.005)


def test_m_max_medium_resistant_at_97():
    assert m_max(0.97, vtt_class("medium-resistant")) == pytest.approx(3.04, abs=0.01)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["very-vulnerable", "vulnerable", "medium-resistant", "resistant"]), st.floats(0.01, 1.0))
def test_m_max_matches_decimal_and_is_clamped(name, phi):
    p = vtt_class(name)
    ref = float(m_max_decimal(phi, p.A, p.B, p.C, p.phi_c))
    got = m_max(phi, p)
    assert 0.0 <= got <= 6.0
    assert abs(got - ref) <= 1e-12 * max(abs(ref), 1e-300) or got == ref


def test_k1_switch_and_k2_cutoff():
    p = vtt_class("very-vulnerable")
    assert k1(0.999, p) == 1.0 and k1(1.0, p) == 2.0
    assert k2(3.0, 3.0) == 0.0
    assert k2(4.0, 3.0) == 0.0
    assert k2(0.0, 3.0) == pytest.approx(1 - math.exp(-6.9))


def test_vtt_rhs_vanishes_at_m_max():
    env = EnvPoint(22.0, 0.97)
    p = vtt_class("medium-resistant")
    assert vtt_rhs(m_max(0.97, p), env, p) == 0.0
    assert vtt_rhs(0.0, env, p) > 0.0


def test_vtt_rhs_initial_rate():
    rate = vtt_rhs(0.0, EnvPoint(22.0, 0.97), vtt_class("medium-resistant"))
    assert rate == pytest.approx(7.4e-3, abs=0.05e-3)


def test_vtt_rhs_units():
    env = EnvPoint(22.0, 0.97)
    p = vtt_class("medium-resistant")
    expected = 24 * p.k11 * k2(0.0, m_max(0.97, p)) / response_time_f(env)
    assert vtt_rhs(0.0, env, p) == pytest.approx(expected)


@pytest.mark.parametrize("T,phi", [(0.0, 0.5), (-3.0, 0.5), (20.0, 0.0), (20.0, 1.2)])
def test_env_domain(T, phi):
    with pytest.raises(DomainError):
        EnvPoint(T, phi)


def test_class_lookup_errors():
    with pytest.raises(KeyError):
        vtt_class("unknown")
    with pytest.raises(KeyError):
        logistic_class("medium-resistant")


def test_logistic_params_validation():
    with pytest.raises(DomainError):
        LogisticParams(0.0, 0.1, 5.0)
    with pytest.raises(DomainError):
        LogisticParams(1e-3, 0.1, 7.0)
    with pytest.raises(DomainError):
        LogisticParams(3.0, 0.1, 2.0)
    LogisticParams(1e-3, -0.1, 5.0)  # decline is allowed


def test_logistic_closed_form_endpoints():
    p = LogisticParams(1e-3, 0.2, 5.51)
    assert logistic_closed_form(0.0, p) == pytest.approx(1e-3)
    assert logistic_closed_form(500.0, p) == pytest.approx(5.51)
    assert logistic_rhs(5.51, p) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 0.5), st.floats(0.01, 1.0), st.floats(1.5, 6.0), st.floats(0.0, 100.0))
def test_logistic_closed_form_satisfies_ode(m0, k, m_inf, t):
    p = LogisticParams(m0, k, m_inf)
    h = 1e-4
    deriv = (logistic_closed_form(t + h, p) - logistic_closed_form(t - h, p)) / (2 * h) if t > h else None
    if deriv is not None:
        m = logistic_closed_form(t, p)
        assert deriv == pytest.approx(logistic_rhs(m, p), rel=1e-5, abs=1e-9)


def test_logistic_sensitivity_m0_decays():
    p = LogisticParams(1e-3, 0.2, 5.51)
    assert logistic_sensitivity_m0(0.0, p) == pytest.approx(1.0)
    assert logistic_sensitivity_m0(200.0, p) < 1e-6


def test_time_to_index_one_and_derivative():
    p = LogisticParams(1e-3, 0.2, 5.51)
    t1 = time_to_index_one(p)
    assert 3.0 <= t1 <= 8.0
    assert logistic_closed_form(t1, p) == pytest.approx(1.0)
    h = 1e-9
    fd = (time_to_index_one(LogisticParams(1e-3 + h, 0.2, 5.51)) - time_to_index_one(LogisticParams(1e-3 - h, 0.2, 5.51))) / (2 * h)
    assert dt1_dm0(p) == pytest.approx(fd, rel=1e-5)
    assert dt1_dm0(p) < 0
    with pytest.raises(DomainError):
        time_to_index_one(LogisticParams(1e-3, 0.2, 0.9))


def test_logistic_classes_are_ordered():
    names = ["very-vulnerable", "vulnerable", "resistant", "very-resistant"]
    onsets = [time_to_index_one(logistic_class(n)) for n in names]
    assert onsets == sorted(onsets)
    assert onsets[-1] > 100


def test_diffusion_time_and_fourier():
    t_d, fo = diffusion_time_and_fourier(HygroProps(2e-11, 1e-4, 0.01, 24.0))
    assert t_d == pytest.approx(1e-4 * 1e-4 / 2e-11)
    assert fo == pytest.approx(24.0 / t_d)
    with pytest.raises(DomainError):
        HygroProps(0.0, 1.0, 1.0, 1.0)
