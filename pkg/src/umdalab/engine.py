"""UMDA with margins, and its PBIL generalisation through a smoothing rate.

The building blocks (:func:`sample_population`, :func:`truncation_select`,
:func:`update_model`) are plain numpy and double as the fallback trial loop.
:func:`run` uses the compiled kernel for the built-in problems when numba is
enabled.

Random streams are numpy ``Generator(PCG64)`` instances. Per-trial streams
come from :func:`trial_seed`, which hashes ``(master_seed, *indices)``
through ``SeedSequence``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._accel import resolve_backend
from .bitstring import Problem, get_problem

DEFAULT_MAX_GENERATIONS = 100_000


def trial_seed(master_seed, *indices):
    """64-bit seed for the stream addressed by ``(master_seed, *indices)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class MarginalModel:
    p: np.ndarray
    n: int

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.shape != (self.n,):
            raise ValueError(f"expected {self.n} marginals, got shape {p.shape}")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 0.5), n)

    @property
    def lower(self):
        return 1.0 / self.n

    @property
    def upper(self):
        return 1.0 - 1.0 / self.n


@dataclass(frozen=True)
class AlgorithmParams:
    n: int
    lam: int
    mu: int
    rho: float = 1.0
    max_generations: int = DEFAULT_MAX_GENERATIONS
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 1 <= self.mu < self.lam:
            raise ValueError(f"need 1 <= mu < lambda, got mu={self.mu}, lambda={self.lam}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.max_generations < 0:
            raise ValueError("max_generations must be non-negative")


@dataclass
class Population:
    individuals: np.ndarray
    fitnesses: Optional[np.ndarray] = None
    sorted: bool = False

    def __len__(self):
        return self.individuals.shape[0]


@dataclass(frozen=True)
class TrialRecord:
    evaluations: int
    generations: int
    success: bool
    seed: int
    meta: dict = field(default_factory=dict, compare=False)


def sample_population(model, lam, rng):
    """Draw ``lam`` individuals, bit i set with probability ``model.p[i]``."""
    rows = (rng.random((lam, model.n)) < model.p).astype(np.uint8)
    return Population(rows)


def truncation_select(pop, mu, problem, rng):
    """The ``mu`` fittest individuals, ties broken uniformly at random."""
    lam = len(pop)
    if mu > lam:
        raise ValueError(f"cannot select mu={mu} from a population of {lam}")
    if isinstance(problem, str):
        problem = get_problem(problem)
    keys = pop.fitnesses if pop.fitnesses is not None else problem.keys(pop.individuals)
    perm = rng.permutation(lam)
    order = perm[np.argsort(-keys[perm], kind="stable")][:mu]
    return Population(pop.individuals[order], keys[order], sorted=True)


def update_model(model, selected, rho=1.0):
    """Move marginals towards the selected bit frequencies, then clamp."""
    q = selected.individuals.mean(axis=0, dtype=np.float64)
    p = (1.0 - rho) * model.p + rho * q
    return MarginalModel(np.clip(p, model.lower, model.upper), model.n)


def _run_numpy(params, problem, rng):
    model = MarginalModel.uniform(params.n)
    for gen in range(params.max_generations):
        pop = sample_population(model, params.lam, rng)
        if problem.is_optimal(pop.individuals).any():
            return True, gen + 1
        selected = truncation_select(pop, params.mu, problem, rng)
        model = update_model(model, selected, params.rho)
    return False, params.max_generations


def run(params, problem, backend=None):
    """Run until the optimum is sampled or the generation cap is reached.

    Every sampled individual costs one evaluation and a generation is always
    charged in full, so ``evaluations == lam * generations``.
    """
    if isinstance(problem, str):
        problem = get_problem(problem)
    backend = resolve_backend(backend)
    if problem.code is None:
        backend = "numpy"
    rng = make_rng(params.seed)
    if backend == "numba":
        success, gens = _kernels.run_trial(
            params.n, params.lam, params.mu, float(params.rho),
            params.max_generations, problem.code, rng,
        )
    else:
        success, gens = _run_numpy(params, problem, rng)
    gens = int(gens)
    return TrialRecord(
        evaluations=params.lam * gens,
        generations=gens,
        success=bool(success),
        seed=int(params.seed),
        meta={"backend": backend},
    )


__all__ = [
    "AlgorithmParams",
    "MarginalModel",
    "Population",
    "Problem",
    "TrialRecord",
    "make_rng",
    "run",
    "sample_population",
    "trial_seed",
    "truncation_select",
    "update_model",
]
