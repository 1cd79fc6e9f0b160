"""Replicated runtime sweeps, bootstrap confidence intervals and growth-model fits."""
import csv
import hashlib
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import resolve_backend
from .bitstring import get_problem
from .engine import DEFAULT_MAX_GENERATIONS, AlgorithmParams, TrialRecord, run, trial_seed

CSV_HEADER = ["problem", "n", "lambda", "mu", "trial", "seed", "generations", "evaluations", "success"]

# fixed stream tag so bootstrap draws never collide with trial streams
_BOOTSTRAP_TAG = int.from_bytes(b"bootstrap", "big") % 2**32


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# population-size rules

_ATOMS = {
    "n": lambda n: n,
    "sqrt_n": lambda n: math.sqrt(n),
    "log_n": lambda n: math.log(n),
    "sqrt_n_log_n": lambda n: math.sqrt(n) * math.log(n),
}
_RULE_RE = re.compile(r"^\s*(?:(?P<coef>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*\s*)?(?P<atom>[a-z_]+|[0-9]*\.?[0-9]+)\s*$")


def parse_rule(text):
    """Compile a size rule: a constant, ``n``, ``sqrt_n``, ``log_n``,
    ``sqrt_n_log_n``, or ``c*<atom>``. Results are rounded up to integers.
    """
    m = _RULE_RE.match(str(text))
    if not m:
        raise ValueError(f"cannot parse rule {text!r}")
    coef = float(m.group("coef")) if m.group("coef") else 1.0
    atom = m.group("atom")
    if atom in _ATOMS:
        fn = _ATOMS[atom]
    else:
        try:
            const = float(atom)
        except ValueError:
            raise ValueError(
                f"unknown rule term {atom!r}; use a number or one of {', '.join(_ATOMS)}"
            ) from None
        fn = lambda n: const  # noqa: E731

    def rule(n):
        # drop float noise such as 10.000000000000002 before rounding up
        return max(1, math.ceil(round(coef * fn(n), 9)))

    rule.text = str(text).strip()
    return rule


# ---------------------------------------------------------------------------
# configuration and results


@dataclass
class SweepConfig:
    problem: str
    n_values: list
    lambda_rule: str = "n"
    mu_rule: str = "sqrt_n"
    repeats: int = 100
    master_seed: int = 0
    bootstrap_samples: int = 100
    confidence: float = 0.95
    rho: float = 1.0
    max_generations: int = DEFAULT_MAX_GENERATIONS

    def __post_init__(self):
        get_problem(self.problem)
        self.n_values = [int(n) for n in self.n_values]
        if not self.n_values:
            raise ValueError("n_values must not be empty")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.bootstrap_samples < 1:
            raise ValueError("bootstrap_samples must be at least 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        parse_rule(self.lambda_rule)
        parse_rule(self.mu_rule)

    def sizes(self, n):
        return parse_rule(self.lambda_rule)(n), parse_rule(self.mu_rule)(n)

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SizeSummary:
    n: int
    lam: int
    mu: int
    trials: list
    mean: float
    ci_lower: float
    ci_upper: float
    failures: int


@dataclass
class SweepResult:
    config: SweepConfig
    sizes: list
    meta: dict = field(default_factory=dict)

    @property
    def failures(self):
        return sum(s.failures for s in self.sizes)

    def means(self):
        return [s.n for s in self.sizes], [s.mean for s in self.sizes]


# ---------------------------------------------------------------------------
# statistics


def exact_mean(values):
    """Mean without accumulation-order error (exact for integer input)."""
    if all(float(v).is_integer() for v in values):
        return float(Fraction(sum(int(v) for v in values), len(values)))
    return math.fsum(values) / len(values)


def bootstrap_ci(samples, b=100, level=0.95, seed=0):
    """Bootstrap-percentile interval for the mean, nearest-rank percentiles.

    Samples are sorted before resampling, so the interval does not depend on
    the order in which they are supplied.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    idx = rng.integers(0, x.size, size=(b, x.size))
    means = np.sort(x[idx].mean(axis=1))
    alpha = (1.0 - level) / 2.0

    def nearest_rank(q):
        r = math.ceil(round(q * b, 9))
        return means[min(max(r, 1), b) - 1]

    return float(nearest_rank(alpha)), float(nearest_rank(1.0 - alpha))


def bootstrap_seed(master_seed, n_index):
    return trial_seed(master_seed, _BOOTSTRAP_TAG, n_index)


GROWTH_MODELS = {
    "n_log_n": (lambda n: n * np.log(n), 0, "c*n*ln(n)"),
    "n_1.5": (lambda n: n**1.5, 1, "c*n^(3/2)"),
    "n_2": (lambda n: n**2.0, 2, "c*n^2"),
    "n_2_log_n": (lambda n: n**2 * np.log(n), 3, "c*n^2*ln(n)"),
}


@dataclass(frozen=True)
class ModelFit:
    model: str
    c: float
    rho: float

    def predict(self, n):
        return self.c * GROWTH_MODELS[self.model][0](np.asarray(n, dtype=np.float64))


def pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        # one side is constant: a perfect fit only if both coincide
        return 1.0 if np.allclose(x, y, rtol=0, atol=0) else 0.0
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def fit_model(n_values, means, model):
    """Least-squares ``y = c * g(n)``; ``rho`` is Pearson's r of data vs. fit."""
    n = np.asarray(n_values, dtype=np.float64)
    y = np.asarray(means, dtype=np.float64)
    if n.size < 2 or n.size != y.size:
        raise ValueError("need at least two (n, mean) points")
    if np.any(y <= 0):
        raise ValueError("means must be positive")
    g = GROWTH_MODELS[model][0](n)
    gg = float(g @ g)
    if gg == 0.0:
        raise ValueError(f"growth model {model} vanishes on every n")
    c = float(g @ y) / gg
    return ModelFit(model, c, pearson(y, c * g))


def fit_all(n_values, means, models=("n_log_n", "n_1.5", "n_2")):
    return [fit_model(n_values, means, m) for m in models]


def rank_models(fits, digits=4):
    """Best fit first; ``rho`` compared at ``digits`` decimals, ties go to the
    lower-order model."""
    return sorted(fits, key=lambda f: (-round(f.rho, digits), GROWTH_MODELS[f.model][1]))


# ---------------------------------------------------------------------------
# sweep execution


def _run_one(job):
    problem, n, lam, mu, rho, max_gen, seed, backend = job
    rec = run(AlgorithmParams(n, lam, mu, rho, max_gen, seed), problem, backend=backend)
    return rec.evaluations, rec.generations, rec.success


def summarize(config, n_index, n, lam, mu, trials):
    ok = [t.evaluations for t in trials if t.success]
    failures = len(trials) - len(ok)
    if ok:
        mean = exact_mean(ok)
        lo, hi = bootstrap_ci(
            ok, config.bootstrap_samples, config.confidence, bootstrap_seed(config.master_seed, n_index)
        )
    else:
        mean = lo = hi = float("nan")
    return SizeSummary(n, lam, mu, trials, mean, lo, hi, failures)


def run_sweep(config, threads=1, backend=None, progress=None):
    """Execute ``repeats`` trials for every n; output depends only on the config."""
    backend = resolve_backend(backend)
    jobs = []
    layout = []
    for ni, n in enumerate(config.n_values):
        lam, mu = config.sizes(n)
        AlgorithmParams(n, lam, mu, config.rho, config.max_generations)
        layout.append((ni, n, lam, mu))
        for t in range(config.repeats):
            seed = trial_seed(config.master_seed, ni, t)
            jobs.append((config.problem, n, lam, mu, config.rho, config.max_generations, seed, backend))

    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_one(job))
            if progress:
                progress(len(outcomes), len(jobs))

    sizes = []
    k = 0
    for ni, n, lam, mu in layout:
        trials = []
        for _ in range(config.repeats):
            evals, gens, ok = outcomes[k]
            trials.append(TrialRecord(int(evals), int(gens), bool(ok), jobs[k][6]))
            k += 1
        sizes.append(summarize(config, ni, n, lam, mu, trials))
    meta = {"config_hash": config.digest(), "code_version": __version__, "backend": backend}
    return SweepResult(config, sizes, meta)


# ---------------------------------------------------------------------------
# persistence


def _paths(path):
    path = Path(path)
    if path.suffix == ".csv":
        return path, path.with_suffix(".json")
    return path.with_suffix(".csv"), path.with_suffix(".json")


def persist(result, path, started_at=None, finished_at=None):
    """Write ``<path>.csv`` (one row per trial) and the ``<path>.json`` sidecar."""
    csv_path, json_path = _paths(path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in result.sizes:
            for t, rec in enumerate(s.trials):
                w.writerow([cfg.problem, s.n, s.lam, s.mu, t, rec.seed, rec.generations,
                            rec.evaluations, int(rec.success)])
    sidecar = {
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "code_version": result.meta.get("code_version", __version__),
        "backend": result.meta.get("backend"),
        "config_hash": cfg.digest(),
        "failures": result.failures,
        "started_at": started_at,
        "finished_at": finished_at,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def read_trials(csv_path):
    """Parse a trial CSV into row dicts, with line numbers in every error."""
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: line 1: file is empty") from None
        if header != CSV_HEADER:
            for i, want in enumerate(CSV_HEADER):
                got = header[i] if i < len(header) else None
                if got != want:
                    raise SchemaError(
                        f"{csv_path}: line 1: column {i + 1} should be {want!r}, found {got!r}"
                    )
            raise SchemaError(f"{csv_path}: line 1: unexpected extra columns {header[len(CSV_HEADER):]}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(CSV_HEADER):
                raise SchemaError(f"{csv_path}: line {lineno}: expected {len(CSV_HEADER)} fields, got {len(raw)}")
            try:
                row = {
                    "problem": raw[0],
                    "n": int(raw[1]),
                    "lambda": int(raw[2]),
                    "mu": int(raw[3]),
                    "trial": int(raw[4]),
                    "seed": int(raw[5]),
                    "generations": int(raw[6]),
                    "evaluations": int(raw[7]),
                    "success": bool(int(raw[8])),
                }
            except ValueError as exc:
                raise SchemaError(f"{csv_path}: line {lineno}: {exc}") from None
            rows.append(row)
    return rows


def load(path):
    """Inverse of :func:`persist`; aggregates are recomputed from the trials."""
    csv_path, json_path = _paths(path)
    with open(json_path) as fh:
        sidecar = json.load(fh)
    try:
        cfg = SweepConfig(**sidecar["config"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{json_path}: bad config block: {exc}") from None
    rows = read_trials(csv_path)
    by_n = {}
    for r in rows:
        by_n.setdefault(r["n"], []).append(r)
    sizes = []
    for ni, n in enumerate(cfg.n_values):
        group = sorted(by_n.get(n, []), key=lambda r: r["trial"])
        if len(group) != cfg.repeats:
            raise SchemaError(f"{csv_path}: n={n} has {len(group)} trials, config says {cfg.repeats}")
        trials = [TrialRecord(r["evaluations"], r["generations"], r["success"], r["seed"]) for r in group]
        sizes.append(summarize(cfg, ni, n, group[0]["lambda"], group[0]["mu"], trials))
    meta = {
        "config_hash": cfg.digest(),
        "code_version": sidecar.get("code_version"),
        "backend": sidecar.get("backend"),
    }
    return SweepResult(cfg, sizes, meta)


def means_from_rows(rows):
    """Per-n mean evaluations of successful trials, sorted by n."""
    by_n = {}
    for r in rows:
        if r["success"]:
            by_n.setdefault(r["n"], []).append(r["evaluations"])
    ns = sorted(by_n)
    return ns, [exact_mean(by_n[n]) for n in ns]


def fit_report(n_values, means, models=("n_log_n", "n_1.5", "n_2")):
    fits = rank_models(fit_all(n_values, means, models))
    return {
        "fits": [{"model": f.model, "c": f.c, "rho": f.rho} for f in fits],
        "winner": fits[0].model,
    }


def default_threads():
    return os.cpu_count() or 1
