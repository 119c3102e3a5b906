import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from hemimac.asymptotics import (
    alignment_limit,
    component_limits,
    delta_concentration_check,
    delta_norms_sq,
    error_term_ladder,
    error_term_log,
    exponent_estimate,
    gaussian_q,
    limit_report,
    ml_error_exponent,
    pairwise_error,
    retention_limit_at_zero,
    sum_rate_feasibility,
)
from hemimac.channel import derive_sizes
from hemimac.errors import ParameterError
from hemimac.harness import estimate_pairwise_error


def exponent_by_big_ints(n, d, beta, P):
    """-(1/n) log E_1 recomputed with integer binomials."""
    M, K = derive_sizes(n, d, beta)
    log_e1 = math.log(math.comb(K - 1, 0)) + math.log(math.comb(round((M - K) / 2), 1))
    return -(log_e1 - n * P / 4) / n


def test_alignment_values():
    assert alignment_limit(0) == 0
    assert alignment_limit(0.2) == pytest.approx(0.336071, abs=1e-6)
    assert alignment_limit(math.pi / 2) == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_retention_values():
    assert retention_limit_at_zero(0) == (0.5, 0.5)
    ret, pupe = retention_limit_at_zero(0.2)
    assert ret == pytest.approx(0.609095, abs=5e-6)
    assert pupe == pytest.approx(0.390905, abs=5e-6)
    c = alignment_limit(0.2)
    assert math.pi * (ret - 0.5) == pytest.approx(math.atan2(c, math.sqrt(1 - c * c)), abs=1e-15)
    assert math.pi * (ret - 0.5) == pytest.approx(0.342746, abs=5e-6)


@given(beta=st.floats(0, 10))
def test_retention_complement(beta):
    ret, pupe = retention_limit_at_zero(beta)
    assert ret + pupe == 1.0
    assert 0 <= alignment_limit(beta) < 1


def test_limits_monotone_and_continuous():
    betas = np.linspace(0, 10, 10_001)
    c = np.array([alignment_limit(b) for b in betas])
    r = np.array([retention_limit_at_zero(b)[0] for b in betas])
    assert np.all(np.diff(c) > 0) and np.all(np.diff(r) > 0)
    # the square-root start is steep but still continuous
    assert np.max(np.abs(np.diff(c))) < 0.05 and np.max(np.abs(np.diff(r))) < 0.02


def test_negative_beta_rejected():
    with pytest.raises(ParameterError):
        alignment_limit(-0.1)


def test_component_values():
    par, perp, nrm = component_limits(0.2, 1.0)
    assert par == pytest.approx(0.159577, abs=1e-6)
    assert perp == pytest.approx(0.2)
    assert nrm == pytest.approx(0.474831, abs=1e-6)
    with pytest.raises(ParameterError):
        component_limits(0.2, 0.0)


@given(beta=st.floats(1e-3, 5), P=st.floats(1e-3, 50))
def test_component_homogeneity(beta, P):
    a = component_limits(beta, P)
    b = component_limits(beta, 4 * P)
    assert b[0] == pytest.approx(2 * a[0], rel=1e-12)
    assert b[1] == pytest.approx(4 * a[1], rel=1e-12)
    assert b[2] == pytest.approx(2 * a[2], rel=1e-12)


def test_output_norm_small_beta():
    for beta in (1e-4, 1e-6, 1e-8):
        assert component_limits(beta, 2.0)[2] / math.sqrt(2.0 * beta) == pytest.approx(1, abs=1e-3)


def test_limit_report_fields():
    rep = limit_report(0.2, 1.0).as_dict()
    assert rep["c"] == pytest.approx(0.336071, abs=1e-6)
    assert rep["retention_at_zero"] + rep["pupe_prefilter_at_zero"] == 1.0
    assert rep["ml_exponent"] == 0.25
    assert all(math.isfinite(v) and v > 0 for v in rep.values())


def test_pairwise_values():
    assert pairwise_error(0) == (0.5, 1.0)
    q, ch = pairwise_error(200)
    assert q == pytest.approx(norm.sf(math.sqrt(200) / 2), rel=1e-10)
    assert q == pytest.approx(7.83e-13, rel=5e-3)
    assert ch == pytest.approx(1.389e-11, rel=1e-3)
    assert gaussian_q(2) == pytest.approx(0.02275, abs=1e-5)


def test_chernoff_dominance():
    args = np.random.default_rng(0).exponential(50, 10_000)
    assert sum(q > ch for q, ch in map(pairwise_error, args)) == 0


@given(x=st.floats(0, 1e4))
def test_chernoff_dominance_property(x):
    q, ch = pairwise_error(x)
    assert q <= ch


def test_pairwise_monte_carlo():
    freq, se = estimate_pairwise_error(16.0, n=16, draws=1_000_000, seed=9)
    assert freq == pytest.approx(gaussian_q(2), abs=5e-4)


@pytest.mark.parametrize("l,target,tol", [(1, 2.0, 0.1), (3, 6.0, 0.3)])
def test_delta_concentration(l, target, tol):
    assert delta_concentration_check(500, 1.0, l, 100, seed=l) == pytest.approx(target, abs=tol)


def test_delta_exact_expectation():
    assert delta_norms_sq(50, 1.0, 2, 10_000, seed=4).mean() == pytest.approx(200, abs=3)


def test_delta_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        delta_norms_sq(50, 1.0, 0, 10, seed=1)


def test_error_term_value():
    assert error_term_log(100, 2.5, 0.1, 1.0, 1) == pytest.approx(math.log(49995) - 25, abs=1e-9)
    assert error_term_log(100, 2.5, 0.1, 1.0, 1) == pytest.approx(-14.1803, abs=1e-4)


def test_error_term_range():
    with pytest.raises(ParameterError):
        error_term_log(100, 2.5, 0.1, 1.0, 0)
    with pytest.raises(ParameterError):
        error_term_log(100, 2.5, 0.1, 1.0, 11)


def test_successor_ratio_example():
    ratio = math.exp(error_term_log(200, 2.5, 0.1, 1, 2) - error_term_log(200, 2.5, 0.1, 1, 1))
    assert ratio < 1
    assert ratio == pytest.approx(5e-16, rel=0.5)


@pytest.mark.parametrize("n", [200, 400, 800])
def test_first_term_dominates(n):
    assert int(np.argmax(error_term_ladder(n, 2.5, 0.1, 1.0))) == 0


def test_successor_ratio_grid():
    for n in (200, 400, 800):
        for d in (2.1, 2.5, 3):
            for beta in (0.05, 0.1, 0.2):
                for P in (0.5, 1, 2):
                    assert np.all(np.diff(error_term_ladder(n, d, beta, P)) < 0)


def test_exponent_values():
    assert ml_error_exponent(1) == 0.25
    assert ml_error_exponent(2) == 0.5
    with pytest.raises(ParameterError):
        ml_error_exponent(0)


def test_exponent_convergence():
    ns = [100, 1000, 10_000]
    est = [exponent_estimate(n, 2.5, 0.1, 1.0) for n in ns]
    for n, e in zip(ns, est):
        assert e == pytest.approx(exponent_by_big_ints(n, 2.5, 0.1, 1.0), abs=1e-9)
    assert est[0] == pytest.approx(0.1418, abs=1e-3)
    gaps = [0.25 - e for e in est]
    assert all(g > 0 for g in gaps)
    assert gaps[0] / gaps[1] >= 5 and gaps[1] / gaps[2] >= 5
    assert est[0] < est[1] < est[2] < 0.25


def test_sum_rate():
    assert sum_rate_feasibility(1e6, 2.5, 0.1, 1.0)[2]
    assert not sum_rate_feasibility(1e6, 2.5, 0.3, 1.0)[2]
    r, c, _ = sum_rate_feasibility(math.e, 2.5, 0.3, 1.0)
    assert r == pytest.approx(0.75, abs=1e-15)
    ratio = sum_rate_feasibility(1e4, 2.5, 1, 1)[1] / sum_rate_feasibility(1e2, 2.5, 1, 1)[1]
    assert ratio == pytest.approx(2, rel=0.1)
    with pytest.raises(ParameterError):
        sum_rate_feasibility(1.0, 2.5, 0.1, 1.0)
