import math
import random
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from umdalab import engine
from umdalab.bitstring import LEADINGONES, ONEMAX, Problem, onemax_rows
from umdalab.engine import (
    AlgorithmParams,
    MarginalModel,
    Population,
    make_rng,
    run,
    sample_population,
    trial_seed,
    truncation_select,
    update_model,
)


def reference_umda(n, lam, mu, seed, max_gen=10_000):
    """Plain-Python UMDA on OneMax, written from the algorithm description only."""
    r = random.Random(seed)
    p = [0.5] * n
    for t in range(1, max_gen + 1):
        pop = [[1 if r.random() < p[i] else 0 for i in range(n)] for _ in range(lam)]
        if any(all(x) for x in pop):
            return t * lam
        r.shuffle(pop)
        pop.sort(key=sum, reverse=True)
        best = pop[:mu]
        p = [min(1 - 1 / n, max(1 / n, sum(x[i] for x in best) / mu)) for i in range(n)]
    return None


def test_sample_all_ones_frequency_at_upper_border():
    n, draws = 100, 100_000
    model = MarginalModel(np.full(n, 1 - 1 / n), n)
    pop = sample_population(model, draws, make_rng(1))
    freq = pop.individuals.all(axis=1).mean()
    p = (1 - 1 / n) ** n
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / draws)


def test_sample_uniform_marginals():
    n, draws = 20, 100_000
    pop = sample_population(MarginalModel.uniform(n), draws, make_rng(2))
    freq = pop.individuals.mean(axis=0)
    assert np.all(np.abs(freq - 0.5) <= 3 * math.sqrt(0.25 / draws))


def test_sample_empty_population():
    pop = sample_population(MarginalModel.uniform(5), 0, make_rng(0))
    assert len(pop) == 0 and pop.individuals.shape == (0, 5)


def test_tie_breaking_is_uniform():
    rows = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 1], [1, 0, 0]], dtype=np.uint8)
    keys = np.array([5, 3, 3, 1])
    rng = make_rng(3)
    reps = 10_000
    first_three = 0
    for _ in range(reps):
        sel = truncation_select(Population(rows, keys), 2, ONEMAX, rng)
        assert sel.fitnesses[0] == 5 and sel.fitnesses[1] == 3
        first_three += bool((sel.individuals[1] == rows[1]).all())
    assert abs(first_three / reps - 0.5) <= 3 * math.sqrt(0.25 / reps)


def test_select_whole_population_and_distinct_keys():
    rng = make_rng(4)
    rows = np.eye(4, dtype=np.uint8)
    sel = truncation_select(Population(rows, np.zeros(4)), 4, ONEMAX, rng)
    assert sorted(map(tuple, sel.individuals)) == sorted(map(tuple, rows))
    keys = np.array([2, 9, 4, 7])
    sel = truncation_select(Population(rows, keys), 2, ONEMAX, rng)
    assert list(sel.fitnesses) == [9, 7]
    assert sel.sorted


def test_select_rejects_mu_above_lambda():
    with pytest.raises(ValueError):
        truncation_select(Population(np.zeros((3, 2), dtype=np.uint8)), 4, ONEMAX, make_rng(0))


def test_update_examples():
    n = 10
    sel = np.zeros((4, n), dtype=np.uint8)
    sel[[0, 1, 3], 0] = 1
    new = update_model(MarginalModel.uniform(n), Population(sel), rho=1.0)
    assert new.p[0] == 0.75
    assert new.p[1] == pytest.approx(0.1)
    sel = np.zeros((10, n), dtype=np.uint8)
    sel[:9, 0] = 1
    assert update_model(MarginalModel.uniform(n), Population(sel), rho=0.5).p[0] == pytest.approx(0.7)


@given(
    st.integers(2, 30),
    st.integers(1, 12),
    st.floats(0.01, 1.0),
    st.integers(0, 2**32 - 1),
)
def test_update_keeps_marginals_inside_borders(n, mu, rho, seed):
    rng = make_rng(seed)
    model = MarginalModel(rng.random(n), n)
    sel = Population(rng.integers(0, 2, (mu, n), dtype=np.uint8))
    p = update_model(model, sel, rho).p
    assert np.all(p >= 1 / n) and np.all(p <= 1 - 1 / n)


def test_identity_selection_is_a_martingale():
    n, lam, reps = 8, 6, 20_000
    p0 = np.linspace(0.2, 0.8, n)
    model = MarginalModel(p0, n)
    rng = make_rng(5)
    acc = np.zeros(n)
    for _ in range(reps):
        pop = sample_population(model, lam, rng)
        acc += pop.individuals.mean(axis=0)
    mean = acc / reps
    sd = np.sqrt(p0 * (1 - p0) / (lam * reps))
    assert np.all(np.abs(mean - p0) <= 3.5 * sd)


def test_params_validation():
    with pytest.raises(ValueError):
        AlgorithmParams(1, 10, 5)
    with pytest.raises(ValueError):
        AlgorithmParams(10, 5, 5)
    with pytest.raises(ValueError):
        AlgorithmParams(10, 5, 0)
    with pytest.raises(ValueError):
        AlgorithmParams(10, 5, 2, rho=0.0)
    with pytest.raises(ValueError):
        AlgorithmParams(10, 5, 2, rho=1.5)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_zero_generation_cap(backend):
    rec = run(AlgorithmParams(10, 10, 5, max_generations=0, seed=1), ONEMAX, backend=backend)
    assert not rec.success and rec.evaluations == 0 and rec.generations == 0


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_cap_hit_charges_every_generation(backend):
    rec = run(AlgorithmParams(200, 20, 5, max_generations=3, seed=1), LEADINGONES, backend=backend)
    assert not rec.success and rec.generations == 3 and rec.evaluations == 60


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_tiny_onemax_median(backend):
    evals = [run(AlgorithmParams(2, 10, 5, seed=s), ONEMAX, backend=backend).evaluations for s in range(100)]
    assert 10 <= statistics.median(evals) <= 200
    assert all(e % 10 == 0 for e in evals)


def test_tiny_onemax_matches_reference_implementation():
    ours = [run(AlgorithmParams(2, 10, 5, seed=trial_seed(7, i)), ONEMAX).evaluations for i in range(2000)]
    ref = [reference_umda(2, 10, 5, seed=i) for i in range(2000)]
    assert stats.ks_2samp(ours, ref).pvalue > 1e-3


def test_model_at_upper_border_finds_optimum_within_e_generations():
    n, lam, reps = 50, 5, 4000
    rng = make_rng(6)
    model = MarginalModel(np.full(n, 1 - 1 / n), n)
    gens = []
    for _ in range(reps):
        t = 1
        while not sample_population(model, lam, rng).individuals.all(axis=1).any():
            t += 1
        gens.append(t)
    q = 1 - (1 - (1 - 1 / n) ** n) ** lam
    sd = math.sqrt((1 - q) / q**2 / reps)
    assert statistics.fmean(gens) <= math.e
    assert abs(statistics.fmean(gens) - 1 / q) <= 4 * sd


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_same_seed_same_record(backend):
    p = AlgorithmParams(40, 40, 7, seed=12345)
    assert run(p, LEADINGONES, backend=backend) == run(p, LEADINGONES, backend=backend)


@pytest.mark.parametrize("problem", ["onemax", "leadingones", "binval"])
def test_backends_are_statistically_equivalent(problem):
    n, reps = 30, 300
    a = [run(AlgorithmParams(n, n, 6, seed=trial_seed(1, i)), problem, backend="numba").evaluations
         for i in range(reps)]
    b = [run(AlgorithmParams(n, n, 6, seed=trial_seed(2, i)), problem, backend="numpy").evaluations
         for i in range(reps)]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_pbil_smoothing_still_converges(backend):
    rec = run(AlgorithmParams(30, 30, 6, rho=0.5, seed=3), ONEMAX, backend=backend)
    assert rec.success


def test_custom_problem_runs_on_numpy_path():
    zeromax = Problem("zeromax", lambda r: -onemax_rows(r), is_optimal=lambda r: ~r.any(axis=1))
    rec = run(AlgorithmParams(12, 12, 3, seed=9), zeromax, backend="numba")
    assert rec.success and rec.meta["backend"] == "numpy"


def test_trial_seed_is_stable_and_distinct():
    assert trial_seed(0, 0, 0) == trial_seed(0, 0, 0)
    seeds = {trial_seed(0, i, j) for i in range(20) for j in range(50)}
    assert len(seeds) == 1000
    assert 0 <= trial_seed(2**40, 3) < 2**64


def test_disable_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("UMDALAB_DISABLE_NUMBA", "1")
    assert engine.resolve_backend(None) == "numpy"
    rec = run(AlgorithmParams(10, 10, 3, seed=1), ONEMAX)
    assert rec.meta["backend"] == "numpy"
    monkeypatch.delenv("UMDALAB_DISABLE_NUMBA")
    assert engine.resolve_backend(None) == "numba"
