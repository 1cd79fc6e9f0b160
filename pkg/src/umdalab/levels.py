"""Level partitions and numeric evaluation of the level-based runtime bound.

All bounds are in fitness evaluations; divide by lambda for generations.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bitstring import leadingones_rows, onemax_rows
from .engine import MarginalModel, make_rng, sample_population
from .pbdist import P_MIN, PSI_WORST, PoissonBinomial, tail_geq


class RegimeError(ValueError):
    """Parameters outside the range in which a preset's bound is proven."""


@dataclass(frozen=True)
class LevelPartition:
    m: int
    z: np.ndarray
    delta: float
    gamma0: float
    label: str = ""
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64).ravel()
        if self.m < 2:
            raise ValueError("a partition needs at least two levels")
        if z.shape != (self.m - 1,):
            raise ValueError(f"need m-1 = {self.m - 1} upgrade probabilities, got {z.size}")
        if np.any(~(z > 0.0)) or np.any(z > 1.0):
            raise ValueError("every z_j must lie in (0, 1]")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 < self.gamma0 < 1.0:
            raise ValueError(f"gamma0 must lie in (0, 1), got {self.gamma0}")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    @property
    def z_min(self):
        return float(self.z.min())


@dataclass(frozen=True)
class LevelSequence:
    n: int
    d: float
    f: tuple

    @property
    def ell(self):
        return len(self.f) - 1

    @property
    def lower(self):
        return math.sqrt(self.n) / (self.d + 1.0)

    @property
    def upper(self):
        return 2.0 * math.sqrt(self.n) / self.d


def level_sequence(n, d):
    """``f_0 = 0, f_{i+1} = f_i + ceil(d * sqrt(n - f_i))`` until ``f = n``."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must lie in (0, 1], got {d}")
    f = [0]
    while f[-1] < n:
        f.append(f[-1] + math.ceil(d * math.sqrt(n - f[-1])))
    seq = LevelSequence(n, float(d), tuple(f))
    if f[-1] != n:
        raise AssertionError(f"level sequence overshot n={n}: {f[-1]}")
    if not seq.lower < seq.ell < seq.upper:
        raise AssertionError(
            f"level count {seq.ell} outside ({seq.lower:.4f}, {seq.upper:.4f}) for n={n}, d={d}"
        )
    return seq


def g3_min_population(part):
    """Smallest lambda allowed by the population-size condition."""
    d2 = part.delta**2
    return (4.0 / (part.gamma0 * d2)) * math.log(128.0 * part.m / (part.z_min * d2))


def level_based_bound(part, lam, warn=True):
    """Upper bound on the expected number of evaluations to reach the top level."""
    if warn and lam < g3_min_population(part):
        warnings.warn(
            f"lambda={lam} is below the population-size threshold "
            f"{g3_min_population(part):.6g}; the bound is not guaranteed",
            stacklevel=2,
        )
    delta = part.delta
    z = part.z
    terms = lam * np.log(6.0 * delta * lam / (4.0 + z * delta * lam)) + 1.0 / z
    return (8.0 / delta**2) * math.fsum(terms)


def preset_leadingones(n, mu, lam):
    """Partition by LeadingOnes value; also valid for BinVal."""
    delta = lam / (math.e * mu) - 1.0
    if not delta > 0.0:
        raise RegimeError(f"need lambda > e*mu = {math.e * mu:.6g}, got lambda={lam}")
    return LevelPartition(
        m=n + 1,
        z=np.full(n, 1.0 / (math.e * n)),
        delta=min(1.0, delta),
        gamma0=mu / lam,
        label="leadingones",
    )


def preset_onemax_small(n, mu, lam, c=0.5, a=1.0):
    """OneMax partition by number of ones, for ``a ln n <= mu <= sqrt(n(1-c))``.

    The ``mu >= a ln n`` requirement involves an unspecified constant and is
    only reported (``info["advisory"]``), never enforced.
    """
    if not 0.0 < c < 1.0:
        raise RegimeError(f"c must lie in (0, 1), got {c}")
    if mu > math.sqrt(n * (1.0 - c)):
        raise RegimeError(f"need mu <= sqrt(n(1-c)) = {math.sqrt(n * (1 - c)):.6g}, got mu={mu}")
    need = 13.0 * math.e * mu / (1.0 - c)
    if lam < need:
        raise RegimeError(f"need lambda >= 13e*mu/(1-c) = {need:.6g}, got lambda={lam}")
    delta = lam / (13.0 * math.e * mu) - 1.0
    if not delta > 0.0:
        raise RegimeError(f"need lambda > 13e*mu = {13 * math.e * mu:.6g}, got lambda={lam}")
    j = np.arange(1, n + 1)
    advisory = []
    if mu < a * math.log(n):
        advisory.append(f"mu={mu} < a*ln(n) = {a * math.log(n):.6g} (a={a})")
    return LevelPartition(
        m=n + 1,
        z=c * (n - j + 1) / n,
        delta=min(1.0, delta),
        gamma0=mu / lam,
        label="onemax-small",
        info={"c": c, "a": a, "advisory": advisory},
    )


def d2_limit(psi):
    """Positive root of ``d^2 / psi^2 + d - 1 = 0``."""
    disc = 1.0 + 4.0 / psi**2
    # (-1 + sqrt(disc)) psi^2 / 2, rewritten to avoid cancellation
    return 2.0 / (1.0 + math.sqrt(disc))


def preset_onemax_large(n, mu, lam, d=None, kappa=PSI_WORST, psi=PSI_WORST, c=1.0):
    """OneMax partition into ~sqrt(n) levels spaced by ``level_sequence``.

    ``psi`` lower-bounds ``Pr(Y >= E[Y])`` for marginals >= 1/4 and ``kappa``
    is the constant upgrade probability; both default to the worst case of
    the p_min = 1/4 tail lemma. ``d`` defaults to the largest admissible
    spacing.
    """
    if not 0.0 < psi < 1.0 or not 0.0 < kappa <= 1.0:
        raise RegimeError("need 0 < psi < 1 and 0 < kappa <= 1")
    dmax = d2_limit(psi)
    if d is None:
        d = dmax
    if not 0.0 < d <= dmax:
        raise RegimeError(f"need 0 < d <= d2 = {dmax:.6g}, got d={d}")
    delta = psi * lam / (math.e * mu) - 1.0
    if not delta > 0.0:
        raise RegimeError(
            f"need mu/lambda < psi/e, i.e. lambda > e*mu/psi = {math.e * mu / psi:.6g}, got lambda={lam}"
        )
    advisory = []
    if mu < c * math.sqrt(n) * math.log(n):
        advisory.append(f"mu={mu} < c*sqrt(n)*ln(n) = {c * math.sqrt(n) * math.log(n):.6g} (c={c})")
    seq = level_sequence(n, d)
    m = seq.ell + 1
    return LevelPartition(
        m=m,
        z=np.full(m - 1, float(kappa)),
        delta=min(1.0, delta),
        gamma0=mu / lam,
        label="onemax-large",
        info={"d": d, "d2": dmax, "psi": psi, "kappa": kappa, "levels": seq.f, "advisory": advisory},
    )


def check_inequality_g1(n, d, f_prev, ell, expectation):
    """``E + d sqrt(n - E) >= f_prev + d sqrt(n - f_prev)`` under the lemma's hypotheses."""
    if not 0.0 < d <= 1.0:
        raise ValueError("need 0 < d <= 1")
    if not 0 <= f_prev <= n - 1:
        raise ValueError("need 0 <= f_prev <= n - 1")
    if expectation < f_prev - ell / n or expectation > n:
        raise ValueError("need f_prev - ell/n <= expectation <= n")
    lhs = expectation + d * math.sqrt(n - expectation)
    rhs = f_prev + d * math.sqrt(n - f_prev)
    # both sides are O(n); allow a few ulps of rounding
    return lhs >= rhs - 4 * math.ulp(max(abs(rhs), 1.0))


def sweep_inequality_g1(cases=10_000, seed=0, n_max=10_000):
    """Random valid inputs for :func:`check_inequality_g1`; report as in ``pbdist.sweep``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x61])))
    min_slack = None
    failed = 0
    counterexamples = []
    for case in range(cases):
        n = int(rng.integers(2, n_max + 1))
        d = float(1.0 - rng.random())
        f_prev = int(rng.integers(0, n))
        ell = int(rng.integers(0, n + 1))
        lo = max(0.0, f_prev - ell / n)
        # half of the cases sit close to the lower end, where the margin is thinnest
        if rng.random() < 0.5:
            e = lo + (n - lo) * rng.random()
        else:
            e = lo + min(1.0, n - lo) * rng.random()
        ok = check_inequality_g1(n, d, f_prev, ell, e)
        slack = (e + d * math.sqrt(n - e)) - (f_prev + d * math.sqrt(n - f_prev))
        if min_slack is None or slack < min_slack:
            min_slack = slack
        if not ok:
            failed += 1
            if len(counterexamples) < 20:
                counterexamples.append(
                    {"case": case, "n": n, "d": d, "f_prev": f_prev, "ell": ell, "expectation": e}
                )
    return {
        "check": "inequality-g1",
        "cases": cases,
        "seed": seed,
        "min_slack": min_slack,
        "violations": failed,
        "counterexamples": counterexamples,
    }


def _leadingones_config(n, j):
    p = np.full(n, 0.5)
    p[: j - 1] = 1.0 - 1.0 / n
    p[j - 1] = 1.0 / n
    return p


def _onemax_case0_config(n, j):
    p = np.full(n, 1.0 / n)
    p[: j - 1] = 1.0 - 1.0 / n
    return p


def _onemax_large_config(n, f_prev):
    # l marginals at the upper border, the rest at p_min, with
    # E[Y] as close to f_prev - l/n from above as this shape allows
    ell = max(0, math.ceil((4 * f_prev - n) / 3))
    p = np.full(n, P_MIN)
    p[:ell] = 1.0 - 1.0 / n
    return p


def empirical_zj(part, n, samples=10_000, seed=0, levels=None):
    """Monte-Carlo upgrade probabilities at each level's worst-case model.

    Returns one dict per level with the estimate, its standard error, the
    exact probability where one is available and the preset's ``z_j``.
    """
    rng = make_rng(seed)
    out = []
    label = part.label
    if levels is None:
        levels = range(1, part.m)
    f = part.info.get("levels")
    for j in levels:
        if label == "leadingones":
            p = _leadingones_config(n, j)
            keys = leadingones_rows
            target = j
            exact = (1.0 - 1.0 / n) ** (j - 1) / n
        elif label == "onemax-small":
            p = _onemax_case0_config(n, j)
            keys = onemax_rows
            target = j
            exact = tail_geq(PoissonBinomial(p), target)
        elif label == "onemax-large":
            p = _onemax_large_config(n, f[j - 1])
            keys = onemax_rows
            target = f[j]
            exact = tail_geq(PoissonBinomial(p), target)
        else:
            raise ValueError(f"no worst-case configuration for partition {label!r}")
        pop = sample_population(MarginalModel(p, n), samples, rng)
        hits = int((keys(pop.individuals) >= target).sum())
        est = hits / samples
        out.append(
            {
                "level": j,
                "estimate": est,
                "stderr": math.sqrt(max(exact * (1.0 - exact), 1e-300) / samples),
                "exact": exact,
                "z": float(part.z[j - 1]),
            }
        )
    return out
