"""Command-line front end: ``umdalab {run,bound,levels,verify,fit,report}``.

Exit codes: 0 success, 1 a failed trial (strict mode) or a bound violation,
2 a configuration error.
"""
import argparse
import json
import math
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, experiments, levels, pbdist
from .bitstring import PROBLEMS

VERIFY_CHECKS = ("feige", "anticoncentration", "integer-median", "pmin-quarter", "ce", "inequality-g1")
PRESETS = ("leadingones", "onemax-small", "onemax-large")

DEFAULTS = {
    "run": {
        "lambda_rule": "n", "mu_rule": "sqrt_n", "rho": 1.0, "repeats": 100,
        "bootstrap": 100, "confidence": 0.95,
        "max_generations": experiments.DEFAULT_MAX_GENERATIONS, "threads": None,
        "out": None, "backend": None, "strict": False, "record_time": False,
        "models": None,
    },
    "bound": {"c": 0.5, "a": 1.0, "d": None, "kappa": pbdist.PSI_WORST, "psi": pbdist.PSI_WORST},
    "levels": {"d": 1.0, "json": False},
    "verify": {"cases": 10_000, "k_max": None, "dstar": 4.0, "out": None, "strict": False},
    "fit": {"models": None, "out": None},
}
DEFAULTS["report"] = DEFAULTS["run"]


class ConfigError(Exception):
    pass


def _n_list(values):
    out = []
    for v in values:
        for part in str(v).split(","):
            part = part.strip()
            if part:
                try:
                    out.append(int(part))
                except ValueError:
                    raise argparse.ArgumentTypeError(f"not an integer size: {part!r}") from None
    return out


def _add_run_flags(p):
    p.add_argument("--problem", choices=sorted(PROBLEMS), default=None, help="benchmark function")
    p.add_argument("--n", nargs="+", default=None, help="problem sizes (space or comma separated)")
    p.add_argument("--lambda", dest="lambda_rule", default=None,
                   help="offspring size rule: const, n, sqrt_n, log_n, sqrt_n_log_n or c*term (default n)")
    p.add_argument("--mu", dest="mu_rule", default=None, help="parent size rule, same grammar (default sqrt_n)")
    p.add_argument("--rho", type=float, default=None, help="smoothing rate in (0, 1]; 1 is the UMDA (default 1)")
    p.add_argument("--repeats", type=int, default=None, help="trials per size (default 100)")
    p.add_argument("--seed", type=int, default=None, help="master seed; time-derived and echoed if omitted")
    p.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples (default 100)")
    p.add_argument("--confidence", type=float, default=None, help="CI level (default 0.95)")
    p.add_argument("--max-generations", type=int, default=None, help="per-trial generation cap (default 100000)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None, help="override UMDALAB_DISABLE_NUMBA")
    p.add_argument("--out", default=None, help="output prefix; writes <out>.csv and <out>.json")
    p.add_argument("--strict", action="store_true", default=None,
                   help="require --seed and exit 1 if any trial hits the generation cap")
    p.add_argument("--record-time", action="store_true", default=None,
                   help="store wall-clock start/finish in the sidecar (breaks byte-identical reruns)")
    p.add_argument("--config", default=None, help="JSON file with defaults for these flags; flags win")


def build_parser():
    parser = argparse.ArgumentParser(prog="umdalab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"umdalab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a runtime sweep and write CSV + JSON")
    _add_run_flags(p)

    p = sub.add_parser("report", help="run a sweep, then fit growth models to its means")
    _add_run_flags(p)
    p.add_argument("--models", nargs="+", choices=sorted(experiments.GROWTH_MODELS), default=None,
                   help="growth models to fit (default n_log_n n_1.5 n_2)")

    p = sub.add_parser("bound", help="evaluate the level-based upper bound for a preset partition")
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--mu", default=None, help="parent size or size rule")
    p.add_argument("--lambda", dest="lam", default=None, help="offspring size or size rule")
    p.add_argument("--c", type=float, default=None, help="onemax-small margin constant (default 0.5)")
    p.add_argument("--a", type=float, default=None, help="onemax-small advisory constant in mu >= a ln n (default 1)")
    p.add_argument("--d", type=float, default=None, help="onemax-large level spacing (default d2)")
    p.add_argument("--kappa", type=float, default=None, help="onemax-large upgrade probability")
    p.add_argument("--psi", type=float, default=None, help="onemax-large lower bound on Pr(Y >= E[Y])")
    p.add_argument("--config", default=None)

    p = sub.add_parser("levels", help="print the sqrt-spaced OneMax level sequence")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=float, default=None, help="spacing in (0, 1] (default 1)")
    p.add_argument("--json", action="store_true", default=None)
    p.add_argument("--config", default=None)

    p = sub.add_parser("verify", help="randomized sweep of a probability inequality")
    p.add_argument("check", help=f"one of: {', '.join(VERIFY_CHECKS)}")
    p.add_argument("--cases", type=int, default=None, help="random instances (default 10000)")
    p.add_argument("--k-max", type=int, default=None, help="largest number of Bernoulli terms")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dstar", type=float, default=None, help="d* for the ce check (default 4)")
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--config", default=None)

    p = sub.add_parser("fit", help="fit growth models to the per-n means of a trial CSV")
    p.add_argument("--input", default=None, help="CSV written by `run`")
    p.add_argument("--models", nargs="+", choices=sorted(experiments.GROWTH_MODELS), default=None)
    p.add_argument("--out", default=None, help="write the fit report JSON here")
    p.add_argument("--config", default=None)
    return parser


def _merge(args):
    """Flags beat the --config file, which beats built-in defaults."""
    opts = dict(DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in file_opts.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            opts[k] = v
    return opts


def _resolve_seed(opts, out):
    if opts.get("seed") is not None:
        return int(opts["seed"])
    if opts.get("strict"):
        raise ConfigError("--seed is required in strict mode")
    seed = time.time_ns() % 2**32
    print(f"seed: {seed}", file=out)
    return seed


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sweep_config(opts, seed):
    if not opts.get("problem"):
        raise ConfigError("--problem is required")
    if opts["problem"] not in PROBLEMS:
        raise ConfigError(f"unknown problem {opts['problem']!r}; choose from {', '.join(sorted(PROBLEMS))}")
    if not opts.get("n"):
        raise ConfigError("--n is required")
    try:
        n_values = _n_list(opts["n"] if isinstance(opts["n"], list) else [opts["n"]])
        return experiments.SweepConfig(
            problem=opts["problem"], n_values=n_values,
            lambda_rule=str(opts["lambda_rule"]), mu_rule=str(opts["mu_rule"]),
            repeats=int(opts["repeats"]), master_seed=seed,
            bootstrap_samples=int(opts["bootstrap"]), confidence=float(opts["confidence"]),
            rho=float(opts["rho"]), max_generations=int(opts["max_generations"]),
        )
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(str(exc)) from None


def _print_sweep(result, out):
    print(f"{'n':>6} {'lambda':>7} {'mu':>5} {'mean_evals':>14} {'ci_low':>14} {'ci_high':>14} {'failed':>6}", file=out)
    for s in result.sizes:
        print(f"{s.n:>6} {s.lam:>7} {s.mu:>5} {s.mean:>14.2f} {s.ci_lower:>14.2f} {s.ci_upper:>14.2f} {s.failures:>6}",
              file=out)


def _print_fits(report, out):
    print(f"{'model':<12} {'c':>14} {'rho':>8}", file=out)
    for f in report["fits"]:
        mark = "  *" if f["model"] == report["winner"] else ""
        print(f"{f['model']:<12} {f['c']:>14.6g} {f['rho']:>8.4f}{mark}", file=out)


def _do_sweep(opts, out):
    seed = _resolve_seed(opts, out)
    cfg = _sweep_config(opts, seed)
    for n in cfg.n_values:
        lam, mu = cfg.sizes(n)
        if not (1 <= mu < lam) or n < 2:
            raise ConfigError(f"n={n}: need n >= 2 and 1 <= mu < lambda, got mu={mu}, lambda={lam}")
    started = _now() if opts.get("record_time") else None
    threads = opts.get("threads") or experiments.default_threads()
    try:
        result = experiments.run_sweep(cfg, threads=threads, backend=opts.get("backend"))
    except RuntimeError as exc:
        raise ConfigError(str(exc)) from None
    finished = _now() if opts.get("record_time") else None
    prefix = opts.get("out") or f"umdalab-{cfg.problem}-seed{seed}"
    csv_path, json_path = experiments.persist(result, prefix, started, finished)
    _print_sweep(result, out)
    print(f"wrote {csv_path} and {json_path}", file=out)
    return cfg, result, Path(csv_path)


def cmd_run(opts, out):
    _, result, _ = _do_sweep(opts, out)
    if result.failures:
        print(f"{result.failures} trial(s) hit the generation cap", file=sys.stderr)
        if opts.get("strict"):
            return 1
    return 0


def cmd_report(opts, out):
    _, result, csv_path = _do_sweep(opts, out)
    models = tuple(opts.get("models") or ("n_log_n", "n_1.5", "n_2"))
    ns, means = experiments.means_from_rows(experiments.read_trials(csv_path))
    if len(ns) < 2:
        raise ConfigError("fitting needs at least two problem sizes")
    report = experiments.fit_report(ns, means, models)
    _print_fits(report, out)
    fit_path = csv_path.with_name(csv_path.stem + "-fit.json")
    with open(fit_path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"wrote {fit_path}", file=out)
    if result.failures and opts.get("strict"):
        return 1
    return 0


def _size(value, n, name):
    if value is None:
        raise ConfigError(f"--{name} is required")
    try:
        return experiments.parse_rule(value)(n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_bound(opts, out):
    preset = opts.get("preset")
    if preset not in PRESETS:
        raise ConfigError(f"--preset must be one of {', '.join(PRESETS)}")
    if not opts.get("n"):
        raise ConfigError("--n is required")
    n = int(opts["n"])
    mu = _size(opts.get("mu"), n, "mu")
    lam = _size(opts.get("lam"), n, "lambda")
    try:
        if preset == "leadingones":
            part = levels.preset_leadingones(n, mu, lam)
        elif preset == "onemax-small":
            part = levels.preset_onemax_small(n, mu, lam, c=opts["c"], a=opts["a"])
        else:
            part = levels.preset_onemax_large(
                n, mu, lam, d=opts.get("d"), kappa=opts["kappa"], psi=opts["psi"]
            )
    except levels.RegimeError as exc:
        raise ConfigError(f"regime violation: {exc}") from None
    g3 = levels.g3_min_population(part)
    if lam < g3:
        print(f"warning: lambda={lam} below the population-size threshold {g3:.6g}; "
              "bound printed but not guaranteed", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = levels.level_based_bound(part, lam)
    print(f"preset       {preset}", file=out)
    print(f"n            {n}", file=out)
    print(f"mu           {mu}", file=out)
    print(f"lambda       {lam}", file=out)
    print(f"delta        {part.delta:.12g}", file=out)
    print(f"gamma0       {part.gamma0:.12g}", file=out)
    print(f"m            {part.m}", file=out)
    print(f"z_min        {part.z_min:.12g}", file=out)
    print(f"g3_lambda    {g3:.12g}", file=out)
    print(f"bound_evals  {bound:.12g}", file=out)
    print(f"bound_gens   {bound / lam:.12g}", file=out)
    for note in part.info.get("advisory", []):
        print(f"advisory     {note}", file=out)
    return 0


def cmd_levels(opts, out):
    if not opts.get("n"):
        raise ConfigError("--n is required")
    try:
        seq = levels.level_sequence(int(opts["n"]), float(opts["d"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if opts.get("json"):
        json.dump({"n": seq.n, "d": seq.d, "f": list(seq.f), "ell": seq.ell, "m": seq.ell + 1,
                   "ell_lower": seq.lower, "ell_upper": seq.upper}, out)
        out.write("\n")
    else:
        print(f"f     {' '.join(map(str, seq.f))}", file=out)
        print(f"ell   {seq.ell}", file=out)
        print(f"m     {seq.ell + 1}", file=out)
        print(f"range ({seq.lower:.6g}, {seq.upper:.6g})", file=out)
    return 0


def cmd_verify(opts, out):
    check = opts["check"]
    if check not in VERIFY_CHECKS:
        raise ConfigError(f"unknown check {check!r}; choose from {', '.join(VERIFY_CHECKS)}")
    seed = _resolve_seed(opts, sys.stderr)
    cases = int(opts["cases"])
    if cases < 1:
        raise ConfigError("--cases must be positive")
    if check == "inequality-g1":
        report = levels.sweep_inequality_g1(cases, seed)
    else:
        report = pbdist.sweep(check, cases, opts.get("k_max"), seed, dstar=float(opts["dstar"]))
    text = json.dumps(report, indent=2)
    print(text, file=out)
    if opts.get("out"):
        Path(opts["out"]).write_text(text + "\n")
    return 1 if report["violations"] else 0


def cmd_fit(opts, out):
    if not opts.get("input"):
        raise ConfigError("--input is required")
    try:
        rows = experiments.read_trials(opts["input"])
    except (OSError, experiments.SchemaError) as exc:
        raise ConfigError(str(exc)) from None
    ns, means = experiments.means_from_rows(rows)
    if len(ns) < 2:
        raise ConfigError("need successful trials for at least two problem sizes")
    models = tuple(opts.get("models") or ("n_log_n", "n_1.5", "n_2"))
    report = experiments.fit_report(ns, means, models)
    _print_fits(report, out)
    if opts.get("out"):
        with open(opts["out"], "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0


COMMANDS = {
    "run": cmd_run, "report": cmd_report, "bound": cmd_bound,
    "levels": cmd_levels, "verify": cmd_verify, "fit": cmd_fit,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return COMMANDS[args.command](_merge(args), out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
