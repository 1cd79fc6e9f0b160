"""Exact Poisson-Binomial distribution and numeric checks of the tail bounds
used in the level-based runtime proofs.

The pmf comes from the O(k^2) convolution recurrence in double precision;
tails are summed with ``math.fsum``. :func:`pmf_exact` repeats the
recurrence over :class:`fractions.Fraction` for golden tests.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._accel import njit, numba_enabled

# Anti-concentration constant, printed to four decimals.
ETA = 0.4688
ETA_SLACK = 1e-4
P_MIN = 0.25
# p_min * (1/2) * (1/4)^7: the worst case of the p_min = 1/4 tail lemma
PSI_WORST = P_MIN * 0.5 * 0.25**7
# rounding allowance for the probability comparisons
TOL = 1e-12
# a mean within this distance of an integer is treated as that integer
INT_TOL = 1e-9


@njit
def _pmf_numba(probs):
    k = probs.shape[0]
    pmf = np.zeros(k + 1)
    pmf[0] = 1.0
    for i in range(k):
        p = probs[i]
        q = 1.0 - p
        for j in range(i + 1, 0, -1):
            pmf[j] = pmf[j] * q + pmf[j - 1] * p
        pmf[0] *= q
    return pmf


def _pmf_numpy(probs):
    k = probs.shape[0]
    pmf = np.zeros(k + 1)
    pmf[0] = 1.0
    for i, p in enumerate(probs):
        pmf[1 : i + 2] = pmf[1 : i + 2] * (1.0 - p) + pmf[: i + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


def pmf_exact(probs):
    """Rational pmf; every float probability is converted exactly."""
    pmf = [Fraction(1)]
    for p in probs:
        p = Fraction(p)
        q = 1 - p
        nxt = [pmf[0] * q]
        for j in range(1, len(pmf)):
            nxt.append(pmf[j] * q + pmf[j - 1] * p)
        nxt.append(pmf[-1] * p)
        pmf = nxt
    return pmf


class PoissonBinomial:
    """Sum of independent Bernoulli variables with the given success rates."""

    def __init__(self, probs):
        probs = np.array(probs, dtype=np.float64).ravel()
        if np.any(~np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        probs.flags.writeable = False
        self.probs = probs
        self._pmf = None

    @property
    def k(self):
        return int(self.probs.size)

    @property
    def mean(self):
        return math.fsum(self.probs)

    @property
    def variance(self):
        return math.fsum(self.probs * (1.0 - self.probs))

    @property
    def std(self):
        return math.sqrt(self.variance)

    def __repr__(self):
        return f"PoissonBinomial(k={self.k}, mean={self.mean:.6g})"


def pmf(d):
    """Masses ``Pr(Y = y)`` for ``y = 0..k``."""
    if d._pmf is None:
        fn = _pmf_numba if numba_enabled() else _pmf_numpy
        out = fn(d.probs)
        np.clip(out, 0.0, 1.0, out=out)
        out.flags.writeable = False
        d._pmf = out
    return d._pmf


def tail_geq(d, y):
    """``Pr(Y >= y)`` for integer ``y``."""
    y = int(y)
    if y <= 0:
        return 1.0
    if y > d.k:
        return 0.0
    return min(1.0, math.fsum(pmf(d)[y:]))


def sample(d, size, rng):
    """Monte-Carlo draws of ``Y``."""
    return (rng.random((size, d.k)) < d.probs).sum(axis=1)


@dataclass
class BoundReport:
    check: str
    value: float
    bound: float
    satisfied: bool
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        """Distance to the bound, positive when satisfied."""
        if self.check == "anticoncentration":
            return self.bound - self.value
        return self.value - self.bound


def check_feige(d, delta):
    """``Pr(Y > E[Y] - delta) >= min(1/13, delta / (1 + delta))``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    t = d.mean - delta
    # Y > t  <=>  Y >= floor(t) + 1; the nudge keeps a t that should be an
    # integer from being rounded just below it
    lhs = tail_geq(d, math.floor(t + INT_TOL) + 1)
    rhs = min(1.0 / 13.0, delta / (1.0 + delta))
    return BoundReport("feige", lhs, rhs, lhs >= rhs - TOL, {"delta": delta})


def check_anticoncentration(d):
    """``sigma * max_y Pr(Y = y) <= eta``."""
    sigma = d.std
    value = sigma * float(pmf(d).max())
    return BoundReport(
        "anticoncentration", value, ETA, value <= ETA + ETA_SLACK, {"sigma": sigma}
    )


def check_integer_mean_median(d):
    """``Pr(Y >= E[Y]) >= 1/2`` for an integer mean."""
    mean = d.mean
    target = round(mean)
    if abs(mean - target) > INT_TOL:
        raise ValueError(f"mean {mean!r} is not an integer")
    value = tail_geq(d, target)
    return BoundReport("integer-median", value, 0.5, value >= 0.5 - TOL, {"mean": target})


def _ceil_mean(mean):
    return math.ceil(mean - INT_TOL)


def check_pmin_quarter_bound(d):
    """``Pr(Y >= E[Y])`` against the worst case of the ``p_i >= 1/4`` lemma."""
    if np.any(d.probs < P_MIN):
        raise ValueError("every probability must be at least 1/4")
    value = tail_geq(d, _ceil_mean(d.mean))
    return BoundReport("pmin-quarter", value, PSI_WORST, value >= PSI_WORST - TOL)


def check_ce_lemma(d, dstar, p_min=P_MIN):
    """``Pr(Y >= min(E[Y] + d* sqrt(k - floor(E[Y])), k))``, asserted positive only."""
    if not p_min > 0:
        raise ValueError("p_min must be positive")
    if np.any(d.probs < p_min):
        raise ValueError(f"every probability must be at least p_min={p_min}")
    if dstar < 1.0 / p_min:
        raise ValueError(f"d* must be at least 1/p_min = {1.0 / p_min}")
    mean = d.mean
    threshold = min(mean + dstar * math.sqrt(d.k - math.floor(mean + INT_TOL)), d.k)
    value = tail_geq(d, _ceil_mean(threshold))
    return BoundReport("ce", value, 0.0, value > 0.0, {"threshold": threshold, "dstar": dstar})


# ---------------------------------------------------------------------------
# randomized sweeps


def _random_probs(rng, k, lo=0.0):
    """Probability vectors mixing uniform, extreme and repeated values."""
    kind = rng.integers(4)
    width = 1.0 - lo
    if kind == 0:
        p = lo + width * rng.random(k)
    elif kind == 1:
        p = lo + width * rng.beta(0.3, 0.3, k)
    elif kind == 2:
        p = np.full(k, lo + width * rng.random())
    else:
        p = lo + width * rng.random(k)
        snap = rng.random(k) < 0.3
        p[snap] = rng.choice(np.array([lo, 1.0]), snap.sum())
    return np.clip(p, lo, 1.0)


def _integer_mean_probs(rng, k):
    """Random probabilities whose sum is an integer."""
    while True:
        p = _random_probs(rng, k)
        if k == 1:
            p[0] = float(rng.integers(2))
            return p
        head = math.fsum(p[:-1])
        last = math.ceil(head) - head
        if last <= 1.0:
            p[-1] = last
            total = math.fsum(p)
            if abs(total - round(total)) <= 1e-12:
                return p


def _record(report, case, params, worst, violations, max_listed=20):
    if not report.satisfied and len(violations) < max_listed:
        violations.append({"case": case, **params, "value": report.value, "bound": report.bound})
    slack = report.slack
    if worst["min_slack"] is None or slack < worst["min_slack"]:
        worst["min_slack"] = slack
    if worst["min_value"] is None or report.value < worst["min_value"]:
        worst["min_value"] = report.value
    return 0 if report.satisfied else 1


SWEEP_DEFAULT_KMAX = {
    "feige": 20,
    "anticoncentration": 50,
    "integer-median": 30,
    "pmin-quarter": 40,
    "ce": 60,
}


def sweep(check, cases=10_000, k_max=None, seed=0, dstar=4.0):
    """Run ``cases`` random instances of a bound check.

    Returns a JSON-ready dict ``{check, cases, min_slack, violations, ...}``
    where ``violations`` counts failures and ``counterexamples`` lists the
    first few.
    """
    if check not in SWEEP_DEFAULT_KMAX:
        raise ValueError(f"unknown check {check!r}")
    k_max = SWEEP_DEFAULT_KMAX[check] if k_max is None else int(k_max)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xB0])))
    worst = {"min_slack": None, "min_value": None}
    counterexamples = []
    failed = 0
    for case in range(cases):
        k = int(rng.integers(1, k_max + 1))
        if check == "feige":
            p = _random_probs(rng, k)
            delta = float(np.exp(rng.uniform(np.log(1e-3), np.log(k + 1.0))))
            rep = check_feige(PoissonBinomial(p), delta)
            params = {"probs": p.tolist(), "delta": delta}
        elif check == "anticoncentration":
            p = _random_probs(rng, k)
            rep = check_anticoncentration(PoissonBinomial(p))
            params = {"probs": p.tolist()}
        elif check == "integer-median":
            p = _integer_mean_probs(rng, k)
            rep = check_integer_mean_median(PoissonBinomial(p))
            params = {"probs": p.tolist()}
        elif check == "pmin-quarter":
            p = _random_probs(rng, k, lo=P_MIN)
            rep = check_pmin_quarter_bound(PoissonBinomial(p))
            params = {"probs": p.tolist()}
        else:
            p = _random_probs(rng, k, lo=P_MIN)
            rep = check_ce_lemma(PoissonBinomial(p), dstar)
            params = {"probs": p.tolist(), "dstar": dstar}
        failed += _record(rep, case, params, worst, counterexamples)
    return {
        "check": check,
        "cases": cases,
        "k_max": k_max,
        "seed": seed,
        "min_slack": worst["min_slack"],
        "min_value": worst["min_value"],
        "violations": failed,
        "counterexamples": counterexamples,
    }
