import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from srbp2d.kernels import ANALYTIC_MOLLIFIER
from srbp2d.rng import substream
from srbp2d.spectral import (RadialMultiplier, _double_resolvent_value,
                             _prefactored_resolvent_value,
                             _shifted_resolvent_value, ell_lambda, g_lambda,
                             g_of, gamma_weak_lambda, lemma_suite, m_lambda,
                             nuisance_I, region_indicator, replacement_gap,
                             weak_norm)

MOL = ANALYTIC_MOLLIFIER


# ------------------------------------------------------ scalar multipliers

def test_g_of_pinned_values():
    assert g_of(0.0) == 0.0
    assert g_of(1.0) == pytest.approx(math.sqrt(4 * math.pi + 1) - 1)


@given(st.floats(min_value=0.0, max_value=1e6))
@settings(max_examples=50, deadline=None)
def test_g_of_algebraic_identity(y):
    """g solves g(g + 2) = 4 pi y."""
    g = g_of(y)
    assert g >= 0
    assert g * (g + 2) == pytest.approx(4 * math.pi * y, rel=1e-10, abs=1e-10)


def test_g_of_rejects_negative():
    with pytest.raises(ValueError):
        g_of(-0.1)


def test_ell_lambda_decreasing_in_y():
    ys = np.linspace(0, 10, 50)
    vals = ell_lambda(ys, 1e-4, 0.5)
    assert np.all(np.diff(vals) < 0)


def test_g_lambda_accepts_vector_or_norm():
    lam, alpha = 1e-6, 1.0
    p = np.array([0.3, 0.4])
    assert g_lambda(p, lam, alpha) == pytest.approx(g_lambda(0.5, lam, alpha))


def test_g_lambda_at_zero_momentum():
    """At p = 0, ell = gamma^2 log(1 + 1/lambda) = alpha^2 exactly."""
    lam, alpha = 1e-5, 1.3
    assert g_lambda(0.0, lam, alpha) == pytest.approx(g_of(alpha**2))


# ------------------------------------------------------- tabulated multiplier

def test_radial_multiplier_interpolates_g():
    lam, alpha = 1e-4, 1.0
    tab = RadialMultiplier.g_table(lam, alpha)
    for r in (1e-5, 0.013, 0.7, 12.0, 900.0):
        assert tab(r) == pytest.approx(float(g_lambda(r, lam, alpha)),
                                       rel=1e-4, abs=1e-6)


def test_radial_multiplier_constant_extension():
    tab = RadialMultiplier.g_table(1e-4, 1.0, p_min=1e-3, p_max=10.0)
    assert tab(1e-9) == tab(1e-3)
    assert tab(1e6) == tab(10.0)


def test_radial_multiplier_refined_consistent():
    tab = RadialMultiplier.g_table(1e-4, 1.0)
    fine = tab.refined()
    r = np.geomspace(1e-5, 100.0, 37)
    assert np.allclose(tab(r), fine(r), rtol=1e-4, atol=2e-6)


# ------------------------------------------------------------ region cuts

def test_region_partition_and_asymmetry():
    rng = substream(0, 50)
    p = rng.normal(size=(100, 2))
    q = rng.normal(size=(100, 2))
    bulk = region_indicator("bulk", 1 / 3, p, q)
    nuis = region_indicator("nuisance", 1 / 3, p, q)
    full = region_indicator("full", 1 / 3, p, q)
    assert np.all(bulk + nuis == 1)
    assert np.all(full == 1)
    # threshold applies to the *second* argument: |p+q| = 1.2 sits
    # between |q|/3 = 1.0 and |p|/3 = 1.4
    p0 = np.array([-4.2, 0.0])
    q0 = np.array([3.0, 0.0])
    assert region_indicator("bulk", 1 / 3, p0, q0) == 1
    assert region_indicator("nuisance", 1 / 3, q0, p0) == 1


def test_region_validation():
    p = np.array([1.0, 0.0])
    with pytest.raises(ValueError):
        region_indicator("bulk", 1.5, p, p)
    with pytest.raises(ValueError):
        region_indicator("edge", 0.5, p, p)


# --------------------------------------------------------------- weak norm

def _weak_norm_closed_form(lam, gamma, s):
    """gamma^2 int_0^inf r e^{-s^2 r^2/2}/(lam + r^2/2) dr
    = gamma^2 e^{s^2 lam} E_1(s^2 lam)."""
    return gamma**2 * math.exp(s**2 * lam) * special.exp1(s**2 * lam)


@pytest.mark.parametrize("lam", [1e-2, 1e-5, 1e-9])
def test_weak_norm_closed_form(lam):
    got = weak_norm(lam, alpha=1.0)
    gamma = gamma_weak_lambda(lam, 1.0)
    assert got == pytest.approx(_weak_norm_closed_form(lam, gamma, MOL.s),
                                rel=1e-8)


def test_weak_norm_limit_is_alpha_squared():
    for alpha in (0.5, 1.0):
        assert weak_norm(1e-10, alpha=alpha) == pytest.approx(alpha**2,
                                                              rel=0.05)


def test_weak_norm_fixed_gamma_diverges_logarithmically():
    vals = [weak_norm(lam, gamma=1.0) for lam in (1e-3, 1e-5, 1e-7)]
    steps = np.diff(vals)
    # each factor-100 drop in lambda adds ~log(100)
    assert np.allclose(steps, math.log(100), rtol=0.05)


def test_weak_norm_validation():
    with pytest.raises(ValueError):
        weak_norm(0.0, alpha=1.0)
    with pytest.raises(ValueError):
        weak_norm(1e-4)


# ----------------------------------------------------------- diagonal kernel

def test_m_lambda_at_zero_matches_radial_quadrature():
    lam, alpha = 1e-3, 1.0
    gamma = gamma_weak_lambda(lam, alpha)

    def integrand(r):
        den = lam + 0.5 * r * r * (1.0 + float(g_lambda(r, lam, alpha)))
        return r * MOL.v_hat_radial(r) / den

    val, _ = integrate.quad(integrand, 0, 14.0 / MOL.s, limit=200)
    want = 2.0 * gamma**2 * math.pi * val
    got, err = m_lambda(0.0, lam, alpha, region="bulk")
    assert got == pytest.approx(want, rel=1e-3)
    assert err < 1e-3 * abs(got) + 1e-12


def test_m_lambda_regions_partition():
    lam, alpha = 1e-3, 1.0
    for pn in (0.5, 3.0):
        b, _ = m_lambda(pn, lam, alpha, region="bulk")
        nu, _ = m_lambda(pn, lam, alpha, region="nuisance")
        f, _ = m_lambda(pn, lam, alpha, region="full")
        assert b + nu == pytest.approx(f, rel=5e-4)
        assert nu >= 0


def test_m_lambda_validation():
    with pytest.raises(ValueError):
        m_lambda(1.0, 0.0, 1.0)


def test_replacement_gap_report():
    rep = replacement_gap(1e-3, 1.0)
    assert rep["sup_gap"] >= 0
    assert rep["sup_gap_over_gamma2"] == pytest.approx(
        rep["sup_gap"] / gamma_weak_lambda(1e-3, 1.0) ** 2)
    with pytest.raises(ValueError):
        replacement_gap(1e-3, 1.0, p_grid=np.geomspace(0.1, 1, 10))


# -------------------------------------------- integral-bound Monte Carlo

def test_shifted_resolvent_mc_matches_quadrature():
    """gamma^2 int V_hat(p)/(lam + |p+q|^2/2) dp by direct quadrature."""
    lam = 0.1
    q = np.array([0.5, 0.3])
    gamma2 = gamma_weak_lambda(lam, 1.0) ** 2

    def integrand(y, x):
        p = np.array([x, y])
        return MOL.v_hat(p) / (lam + 0.5 * np.sum((p + q) ** 2))

    want, _ = integrate.dblquad(integrand, -15, 15, -15, 15, epsabs=1e-10)
    want *= gamma2
    val, se = _shifted_resolvent_value(lam, q, substream(0, 60), 200000, MOL)
    assert abs(val - want) < 4 * se + 1e-6 * abs(want)


def test_double_resolvent_mc_matches_quadrature():
    lam = 0.2
    q = np.array([0.8, -0.2])
    r = np.array([-0.4, 0.6])

    def integrand(y, x):
        p = np.array([x, y])
        return lam * MOL.v_hat(p) / (
            (lam + np.sum((p + q) ** 2)) * (lam + np.sum((p + r) ** 2)))

    want, _ = integrate.dblquad(integrand, -15, 15, -15, 15, epsabs=1e-12)
    val, se = _double_resolvent_value(lam, q, r, substream(0, 61), 200000, MOL)
    assert abs(val - want) < 4 * se + 1e-6 * abs(want)


def test_prefactored_resolvent_mc_matches_quadrature():
    lam = 0.3
    p = np.array([2.0, 0.0])
    r = np.array([1.0, 0.5])
    pn = np.hypot(*p)

    def integrand(y, x):
        q = np.array([x, y])
        return pn * MOL.v_hat(q) / (
            max(np.hypot(*(q + r)), 1e-12) * (lam + np.sum(q * q) + pn**2))

    want, _ = integrate.dblquad(integrand, -15, 15, -15, 15, epsabs=1e-9)
    val, se = _prefactored_resolvent_value(lam, p, r, substream(0, 62),
                                           400000, MOL)
    assert abs(val - want) < 5 * se + 1e-4 * abs(want)


def test_lemma_suite_validation():
    with pytest.raises(ValueError):
        lemma_suite(n_draws=10)


# ----------------------------------------------------------- nuisance term

def test_nuisance_i_rotation_invariance():
    """I(p3) only depends on |p3| (rotation invariance of the integrand)."""
    lam = 1e-3
    th = 1.1
    p = np.array([2.0, 0.0])
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    v1, e1 = nuisance_I(p, lam, quad_samples=200000, seed=1)
    v2, e2 = nuisance_I(R @ p, lam, quad_samples=200000, seed=2)
    assert abs(v1 - v2) < 5 * (e1 + e2) + 1e-3


def test_nuisance_i_decays_in_tail():
    lam = 1e-3
    v_near, e_near = nuisance_I(np.array([1.5, 0.0]), lam,
                                quad_samples=100000, seed=3)
    v_far, e_far = nuisance_I(np.array([7.0, 0.0]), lam,
                              quad_samples=100000, seed=3)
    assert v_far + 3 * e_far < v_near


def test_nuisance_i_validation():
    with pytest.raises(ValueError):
        nuisance_I(np.array([1.0, 0.0]), 1e-3, quad_samples=100)
