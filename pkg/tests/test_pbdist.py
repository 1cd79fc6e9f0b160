import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.special import comb, i0e

from umdalab import pbdist
from umdalab.engine import make_rng
from umdalab.pbdist import (
    ETA,
    PSI_WORST,
    PoissonBinomial,
    check_anticoncentration,
    check_ce_lemma,
    check_feige,
    check_integer_mean_median,
    check_pmin_quarter_bound,
    pmf,
    pmf_exact,
    sample,
    tail_geq,
)

probs_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=60)


def test_pmf_examples():
    assert np.allclose(pmf(PoissonBinomial([0.5, 0.5])), [0.25, 0.5, 0.25], rtol=0, atol=1e-15)
    assert np.allclose(pmf(PoissonBinomial([1.0, 0.0])), [0, 1, 0], rtol=0, atol=0)
    assert pmf(PoissonBinomial([0.1, 0.2, 0.3]))[0] == pytest.approx(0.504, rel=1e-14)


def test_tail_examples():
    assert tail_geq(PoissonBinomial([0.5, 0.5]), 1) == pytest.approx(0.75, rel=1e-15)
    assert tail_geq(PoissonBinomial([0.3, 0.9]), 0) == 1.0
    assert tail_geq(PoissonBinomial([0.1, 0.2, 0.3]), 3) == pytest.approx(0.006, rel=1e-12)
    assert tail_geq(PoissonBinomial([0.1, 0.2, 0.3]), 4) == 0.0


def test_invalid_probabilities_rejected():
    with pytest.raises(ValueError):
        PoissonBinomial([0.2, 1.2])
    with pytest.raises(ValueError):
        PoissonBinomial([float("nan")])


@given(probs_st)
def test_pmf_is_a_distribution_with_the_right_moments(probs):
    d = PoissonBinomial(probs)
    f = pmf(d)
    y = np.arange(d.k + 1)
    assert np.all(f >= 0)
    assert abs(math.fsum(f) - 1.0) <= 1e-12
    mean = math.fsum(f * y)
    assert abs(mean - d.mean) <= 1e-10
    assert abs(math.fsum(f * (y - mean) ** 2) - d.variance) <= 1e-10


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=25))
def test_float_pmf_matches_rational_recurrence(probs):
    exact = pmf_exact(probs)
    approx = pmf(PoissonBinomial(probs))
    assert np.allclose(approx, [float(v) for v in exact], rtol=0, atol=1e-14)


def test_numpy_and_numba_recurrences_agree():
    rng = np.random.default_rng(0)
    for k in (1, 7, 100, 2000):
        p = rng.random(k)
        assert np.allclose(pbdist._pmf_numba(p), pbdist._pmf_numpy(p), rtol=0, atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 10, 31, 64])
def test_fair_coins_give_binomial_coefficients(k):
    f = pmf(PoissonBinomial(np.full(k, 0.5)))
    expected = comb(k, np.arange(k + 1), exact=False) / 2.0**k
    assert np.allclose(f, expected, rtol=0, atol=1e-12)


def test_exact_path_is_rational():
    out = pmf_exact([0.5, 0.25])
    assert out == [Fraction(3, 8), Fraction(1, 2), Fraction(1, 8)]


def test_sampler_matches_pmf():
    d = PoissonBinomial([0.1, 0.5, 0.5, 0.9, 0.3, 0.7, 0.25, 0.05])
    draws = 1_000_000
    counts = np.bincount(sample(d, draws, make_rng(11)), minlength=d.k + 1)
    f = pmf(d)
    sd = np.sqrt(f * (1 - f) / draws)
    assert np.all(np.abs(counts / draws - f) <= 4 * sd + 1e-12)


def test_eta_is_the_bessel_maximum():
    res = minimize_scalar(lambda y: -math.sqrt(y) * i0e(y), bounds=(1e-6, 20), method="bounded",
                          options={"xatol": 1e-12})
    assert -res.fun == pytest.approx(0.468822, abs=1e-6)
    assert ETA <= -res.fun <= ETA + pbdist.ETA_SLACK


def test_feige_examples():
    rep = check_feige(PoissonBinomial([0.5, 0.5]), 0.5)
    assert rep.value == pytest.approx(0.75) and rep.bound == pytest.approx(1 / 13) and rep.satisfied
    rep = check_feige(PoissonBinomial([0.3, 0.6, 0.2]), 3.1 + 1)
    assert rep.value == 1.0 and rep.satisfied
    with pytest.raises(ValueError):
        check_feige(PoissonBinomial([0.5]), 0.0)


def test_feige_at_integer_threshold():
    # E - delta = 1 exactly, so the event is Y >= 2
    rep = check_feige(PoissonBinomial([0.5, 0.5, 0.5, 0.5]), 1.0)
    assert rep.value == pytest.approx(11 / 16)


def test_anticoncentration_examples():
    rep = check_anticoncentration(PoissonBinomial([0.5] * 4))
    assert rep.value == pytest.approx(0.375) and rep.satisfied
    assert rep.slack == pytest.approx(ETA - 0.375)
    rep = check_anticoncentration(PoissonBinomial([1.0, 1.0]))
    assert rep.value == 0.0 and rep.satisfied


def test_integer_mean_median_examples():
    assert check_integer_mean_median(PoissonBinomial([0.5, 0.5])).value == pytest.approx(0.75)
    assert check_integer_mean_median(PoissonBinomial([1.0])).value == 1.0
    rep = check_integer_mean_median(PoissonBinomial([0.25] * 4))
    assert rep.value == pytest.approx(1 - 0.75**4) and rep.satisfied
    with pytest.raises(ValueError):
        check_integer_mean_median(PoissonBinomial([0.3, 0.3]))


def test_pmin_quarter_examples():
    rep = check_pmin_quarter_bound(PoissonBinomial([0.25]))
    assert rep.value == pytest.approx(0.25) and rep.bound == PSI_WORST and rep.satisfied
    rep = check_pmin_quarter_bound(PoissonBinomial([0.25, 0.25]))
    assert rep.value == pytest.approx(0.4375)
    with pytest.raises(ValueError):
        check_pmin_quarter_bound(PoissonBinomial([0.2, 0.9]))
    assert PSI_WORST == 0.25 * 0.5 * 0.25**7


def test_ce_lemma_examples():
    rep = check_ce_lemma(PoissonBinomial([1.0] * 6), 4.0)
    assert rep.details["threshold"] == 6 and rep.value == 1.0
    rep = check_ce_lemma(PoissonBinomial([0.25] * 4), 4.0)
    # threshold = min(1 + 4*sqrt(3), 4) = 4
    assert rep.value == pytest.approx(0.25**4) and rep.satisfied
    with pytest.raises(ValueError):
        check_ce_lemma(PoissonBinomial([0.25] * 4), 3.0)
    with pytest.raises(ValueError):
        check_ce_lemma(PoissonBinomial([0.1, 0.5]), 4.0)


@given(probs_st, st.floats(1e-3, 80.0))
def test_feige_holds(probs, delta):
    assert check_feige(PoissonBinomial(probs), delta).satisfied


@given(probs_st)
def test_anticoncentration_holds(probs):
    assert check_anticoncentration(PoissonBinomial(probs)).satisfied


@given(st.lists(st.floats(0.25, 1.0), min_size=1, max_size=40))
def test_pmin_quarter_and_ce_hold(probs):
    d = PoissonBinomial(probs)
    assert check_pmin_quarter_bound(d).satisfied
    assert check_ce_lemma(d, 4.0).satisfied


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=30))
def test_integer_mean_median_holds(weights):
    # rescale to an exactly integer mean
    w = np.array(weights, dtype=np.float64)
    if w.sum() == 0:
        return
    target = max(1, int(w.sum() / w.max()) // 2)
    p = np.minimum(w / w.sum() * target, 1.0)
    p[-1] = 0.0
    head = math.fsum(p)
    p[-1] = math.ceil(head) - head
    d = PoissonBinomial(p)
    if abs(d.mean - round(d.mean)) > 1e-9:
        return
    assert check_integer_mean_median(d).satisfied


@pytest.mark.parametrize("check", sorted(pbdist.SWEEP_DEFAULT_KMAX))
def test_small_sweeps_report_no_violations(check):
    rep = pbdist.sweep(check, cases=500, seed=1)
    assert rep["violations"] == 0 and rep["counterexamples"] == []
    assert rep["cases"] == 500 and rep["min_slack"] >= 0


def test_sweep_is_deterministic_and_rejects_unknown_checks():
    assert pbdist.sweep("feige", 50, seed=9) == pbdist.sweep("feige", 50, seed=9)
    with pytest.raises(ValueError):
        pbdist.sweep("chernoff")
