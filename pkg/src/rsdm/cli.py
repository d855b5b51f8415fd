"""Batch experiment runner and verification harness.

Configs are flat dotted key=value text files (a JSON loader accepts the same
keys, nested or flat).  Each run writes one CSV trace per repeat plus a
meta.json describing the resolved configuration; the verify command runs the
oracle suites at pinned desk-scale sizes and writes verify_report.json.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration
(message names the offending field), 3 runtime error.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .frames import (
    ENUMERATION_LIMIT,
    SamplerKind,
    sample_haar_frame,
    sample_permutation_frame,
    truncated_permutation_count,
)
from .manifold import SQUARE_ONLY, RetractionKind, qr_orthonormalize, random_stiefel
from .problems import make_pca, make_procrustes, make_qap, make_stochastic_pca
from .solvers import (
    SUBMANIFOLD_FAMILIES,
    ConfigError,
    SolverConfig,
    TraceRecord,
    run,
    validate_config,
)
from .verify import (
    block_embedding_equivalence,
    fd_gradient,
    full_grad_norm_identity,
    lemma2_check,
    prop1_ratio,
    prop2_tail,
)

PROBLEM_KINDS = ("procrustes", "pca", "qap", "stochastic_pca")
EMIT_MODES = ("csv", "json", "both")
VERIFY_SUITES = ("gradients", "prop1", "lemma2", "prop2", "embedding")

TRACE_HEADER = "iter,time_ns,value,optgap,grad_norm_sq,sub_grad_norm_sq,feasibility"

# Monte Carlo cells for the expectation-ratio suite: (n, r).
PROP1_CELLS = ((10, 3), (10, 4), (20, 5), (16, 16))


@dataclass(frozen=True)
class ProblemSpec:
    """Declarative description of a benchmark instance."""

    kind: str
    n: int
    p: int
    seed: int = 0
    condition_number: float = 1000.0
    num_samples: int = 100
    noise_free: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    solver: SolverConfig
    repeats: int = 1
    output_dir: str = "."
    emit: str = "csv"


def build_problem(spec):
    """Instantiate the benchmark described by a ProblemSpec."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "procrustes":
        return make_procrustes(spec.n, spec.p, rng)
    if spec.kind == "pca":
        return make_pca(spec.n, spec.p, spec.condition_number, rng)
    if spec.kind == "qap":
        return make_qap(spec.n, rng)
    if spec.kind == "stochastic_pca":
        return make_stochastic_pca(spec.n, spec.p, spec.num_samples,
                                   spec.noise_free, rng)
    raise ConfigError("problem.kind",
                      f"unknown problem kind {spec.kind!r}; choose from {', '.join(PROBLEM_KINDS)}")


# ---------------------------------------------------------------------------
# config parsing

def _to_int(key, value):
    try:
        if isinstance(value, bool):
            raise ValueError
        return int(str(value).strip())
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected an integer, got {value!r}") from None


def _to_float(key, value):
    try:
        if isinstance(value, bool):
            raise ValueError
        return float(str(value).strip())
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None


def _to_bool(key, value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "1", "yes", "on"):
        return True
    if text in ("false", "0", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {value!r}")


def _to_str(key, value):
    return str(value).strip()


def _to_sampler(key, value):
    try:
        return SamplerKind(str(value).strip().lower())
    except ValueError:
        choices = ", ".join(k.value for k in SamplerKind)
        raise ConfigError(key, f"unknown sampler {value!r}; choose from {choices}") from None


def _to_retraction(key, value):
    try:
        return RetractionKind(str(value).strip().lower())
    except ValueError:
        choices = ", ".join(k.value for k in RetractionKind)
        raise ConfigError(key, f"unknown retraction {value!r}; choose from {choices}") from None


_PROBLEM_KEYS = {
    "problem.kind": _to_str,
    "problem.n": _to_int,
    "problem.p": _to_int,
    "problem.seed": _to_int,
    "problem.condition_number": _to_float,
    "problem.num_samples": _to_int,
    "problem.noise_free": _to_bool,
}

_SOLVER_KEYS = {
    "solver.family": _to_str,
    "solver.r": _to_int,
    "solver.eta": _to_float,
    "solver.max_iters": _to_int,
    "solver.seed": _to_int,
    "solver.sampler": _to_sampler,
    "solver.retraction": _to_retraction,
    "solver.beta": _to_float,
    "solver.inner_iters": _to_int,
    "solver.batch_size": _to_int,
    "solver.log_every": _to_int,
    "solver.grad_norm_mode": _to_str,
}

_TOP_KEYS = {
    "repeats": _to_int,
    "output_dir": _to_str,
    "emit": _to_str,
}


def _flatten(prefix, obj, out):
    for key, value in obj.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            _flatten(dotted, value, out)
        else:
            out[dotted] = value


def load_config_file(path):
    """Read a config file into a flat {dotted key: raw value} dict.

    Files starting with '{' are parsed as JSON (nested objects are flattened
    to dotted keys); anything else is read as key=value lines, with '#'
    comments and blank lines ignored.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError("config", f"invalid JSON: {err}") from None
        flat = {}
        _flatten("", data, flat)
        return flat
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        flat[key.strip()] = value.strip()
    return flat


def experiment_from_flat(flat):
    """Build an ExperimentConfig from flat dotted keys, with validation."""
    problem_kwargs = {}
    solver_kwargs = {}
    top_kwargs = {}
    for key, value in flat.items():
        if key in _PROBLEM_KEYS:
            problem_kwargs[key.split(".", 1)[1]] = _PROBLEM_KEYS[key](key, value)
        elif key in _SOLVER_KEYS:
            solver_kwargs[key.split(".", 1)[1]] = _SOLVER_KEYS[key](key, value)
        elif key in _TOP_KEYS:
            top_kwargs[key] = _TOP_KEYS[key](key, value)
        else:
            raise ConfigError(key, "unknown configuration key")
    for required in ("kind", "n"):
        if required not in problem_kwargs:
            raise ConfigError(f"problem.{required}", "required key is missing")
    if "family" not in solver_kwargs:
        raise ConfigError("solver.family", "required key is missing")
    problem_kwargs.setdefault("p", problem_kwargs["n"])
    spec = ProblemSpec(**problem_kwargs)
    solver = SolverConfig(**solver_kwargs)
    return ExperimentConfig(problem=spec, solver=solver, **top_kwargs)


def validate_experiment(config):
    """Full structural validation; raises ConfigError naming the field."""
    spec = config.problem
    if spec.kind not in PROBLEM_KINDS:
        raise ConfigError("problem.kind",
                          f"unknown problem kind {spec.kind!r}; choose from {', '.join(PROBLEM_KINDS)}")
    if spec.n < 1:
        raise ConfigError("problem.n", f"need n >= 1, got {spec.n}")
    if not 1 <= spec.p <= spec.n:
        raise ConfigError("problem.p", f"need 1 <= p <= n, got p={spec.p}, n={spec.n}")
    if spec.kind == "qap" and spec.p != spec.n:
        raise ConfigError("problem.p", f"qap is square; need p = n, got p={spec.p}, n={spec.n}")
    if spec.seed < 0:
        raise ConfigError("problem.seed", f"seed must be nonnegative, got {spec.seed}")
    if spec.condition_number < 1:
        raise ConfigError("problem.condition_number",
                          f"must be >= 1, got {spec.condition_number}")
    if spec.num_samples < 1:
        raise ConfigError("problem.num_samples", f"must be >= 1, got {spec.num_samples}")
    if config.repeats < 1:
        raise ConfigError("repeats", f"must be >= 1, got {config.repeats}")
    if config.emit not in EMIT_MODES:
        raise ConfigError("emit", f"expected one of {EMIT_MODES}, got {config.emit!r}")
    try:
        validate_config(config.solver)
    except ConfigError as err:
        raise ConfigError(f"solver.{err.field}", str(err)) from None
    sol = config.solver
    if sol.family in SUBMANIFOLD_FAMILIES and sol.r > spec.n:
        raise ConfigError("solver.r", f"r={sol.r} exceeds the row dimension n={spec.n}")
    if sol.family == "rsdm_exact":
        count = truncated_permutation_count(spec.n, sol.r)
        if count > ENUMERATION_LIMIT:
            raise ConfigError("solver.r",
                              f"exhaustive sweep needs {count} frames, above the "
                              f"limit of {ENUMERATION_LIMIT}")
    if sol.family == "rsdm_stochastic" and spec.kind != "stochastic_pca":
        raise ConfigError("solver.family",
                          f"rsdm_stochastic needs a problem with a stochastic "
                          f"gradient; {spec.kind} has none")
    if (sol.family in ("rgd", "rgd_momentum") and sol.retraction in SQUARE_ONLY
            and spec.n != spec.p):
        raise ConfigError("solver.retraction",
                          f"{sol.retraction.value} needs n = p, got ({spec.n}, {spec.p})")


def resolved_flat_config(config):
    """Flatten a validated ExperimentConfig back to dotted keys for meta.json."""
    out = {
        "problem.kind": config.problem.kind,
        "problem.n": config.problem.n,
        "problem.p": config.problem.p,
        "problem.seed": config.problem.seed,
        "repeats": config.repeats,
        "output_dir": config.output_dir,
        "emit": config.emit,
    }
    if config.problem.kind == "pca":
        out["problem.condition_number"] = config.problem.condition_number
    if config.problem.kind == "stochastic_pca":
        out["problem.num_samples"] = config.problem.num_samples
        out["problem.noise_free"] = config.problem.noise_free
    sol = config.solver
    out.update({
        "solver.family": sol.family,
        "solver.r": sol.r,
        "solver.eta": sol.eta,
        "solver.max_iters": sol.max_iters,
        "solver.seed": sol.seed,
        "solver.sampler": sol.sampler.value,
        "solver.retraction": sol.retraction.value,
        "solver.beta": sol.beta,
        "solver.inner_iters": sol.inner_iters,
        "solver.batch_size": sol.batch_size,
        "solver.log_every": sol.log_every,
        "solver.grad_norm_mode": sol.grad_norm_mode,
    })
    return out


# ---------------------------------------------------------------------------
# trace serialization

def _fmt(value):
    return "" if value is None else repr(float(value))


def write_trace_csv(path, trace):
    """Serialize records to the fixed 7-column CSV layout."""
    lines = [TRACE_HEADER]
    for rec in trace.records:
        lines.append(",".join((
            str(rec.iter),
            str(rec.time_ns),
            _fmt(rec.value),
            _fmt(rec.optgap),
            _fmt(rec.grad_norm_sq),
            _fmt(rec.sub_grad_norm_sq),
            _fmt(rec.feasibility),
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path):
    """Parse a trace CSV back into TraceRecord values."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path} does not start with the trace header")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 7:
            raise ValueError(f"expected 7 columns, got {len(cells)}: {line!r}")
        records.append(TraceRecord(
            iter=int(cells[0]),
            time_ns=int(cells[1]),
            value=float(cells[2]),
            optgap=None if cells[3] == "" else float(cells[3]),
            grad_norm_sq=None if cells[4] == "" else float(cells[4]),
            sub_grad_norm_sq=None if cells[5] == "" else float(cells[5]),
            feasibility=float(cells[6]),
        ))
    return records


def write_trace_json(path, trace):
    payload = {
        "family": trace.family,
        "records": [asdict(rec) for rec in trace.records],
        "extras": trace.extras,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_meta_schema():
    """The published schema for meta.json files."""
    text = resources.files("rsdm").joinpath("meta_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_verify_report_schema():
    """The published schema for verify_report.json files."""
    text = resources.files("rsdm").joinpath("verify_report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


# ---------------------------------------------------------------------------
# figures

def render_trace_figure(csv_path, out_path=None):
    """Render gap-vs-iteration and gap-vs-time panels for one trace CSV."""
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    records = read_trace_csv(csv_path)
    iters = [rec.iter for rec in records]
    seconds = [rec.time_ns * 1e-9 for rec in records]
    if any(rec.optgap is not None for rec in records):
        ys = [rec.optgap for rec in records]
        label = "optimality gap"
    else:
        ys = [rec.value for rec in records]
        label = "objective value"
    out_path = Path(out_path) if out_path else csv_path.with_suffix(".png")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, xs, xlabel in ((axes[0], iters, "iteration"), (axes[1], seconds, "seconds")):
        ax.plot(xs, ys, lw=1.2)
        if all(y is not None and y > 0 for y in ys):
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.4)
    fig.suptitle(csv_path.stem)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_sweep_figure(summary_rows, out_path):
    """Final metric against the swept parameter value, one point per seed."""
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [row["value"] for row in summary_rows]
    ys = [row["final_optgap"] if row["final_optgap"] is not None else row["final_value"]
          for row in summary_rows]
    ax.plot(xs, ys, "o", alpha=0.7)
    if all(y > 0 for y in ys):
        ax.set_yscale("log")
    if all(x > 0 for x in xs):
        ax.set_xscale("log")
    ax.set_xlabel(summary_rows[0]["param"])
    ax.set_ylabel("final optimality gap" if summary_rows[0]["final_optgap"] is not None
                  else "final value")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


# ---------------------------------------------------------------------------
# verification suites

def _default_gradient_problems(seed):
    return [
        make_procrustes(12, 8, np.random.default_rng([seed, 11])),
        make_pca(15, 4, 1000.0, np.random.default_rng([seed, 12])),
        make_qap(10, np.random.default_rng([seed, 13])),
        make_stochastic_pca(12, 5, 40, False, np.random.default_rng([seed, 14])),
    ]


def _suite_gradients(seed, trials, gradient_problems):
    problems = gradient_problems if gradient_problems is not None else _default_gradient_problems(seed)
    rng = np.random.default_rng([seed, 10])
    rows = []
    for problem in problems:
        worst = 0.0
        for _ in range(20):
            x = random_stiefel(problem.n, problem.p, rng)
            g = problem.gradient(x)
            fd = fd_gradient(problem, x, 1e-6)
            rel = float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-30))
            worst = max(worst, rel)
        rows.append({
            "suite": "gradients",
            "name": f"{problem.name} n={problem.n} p={problem.p}",
            "passed": worst <= 1e-5,
            "metric": "max_rel_err",
            "value": worst,
            "limit": 1e-5,
            "detail": {"points": 20, "h": 1e-6},
        })
    return rows


def _suite_prop1(seed, trials, _):
    trials = max(trials or 100000, 100)
    rows = []
    for idx, (n, r) in enumerate(PROP1_CELLS):
        rng = np.random.default_rng([seed, 20 + idx])
        x = random_stiefel(n, n, rng)
        g = rng.standard_normal((n, n))
        for sampler in (SamplerKind.HAAR_ORTHOGONAL, SamplerKind.UNIFORM_PERMUTATION):
            report = prop1_ratio(x, g, sampler, r, trials, rng)
            rows.append({
                "suite": "prop1",
                "name": f"{sampler.value} n={n} r={r}",
                "passed": abs(report.z_score) <= 4.0,
                "metric": "abs_z",
                "value": abs(report.z_score),
                "limit": 4.0,
                "detail": {
                    "estimate": report.estimate,
                    "target": report.target,
                    "std_error": report.std_error,
                    "trials": trials,
                },
            })
    return rows


def _suite_lemma2(seed, trials, _):
    problems = [
        make_procrustes(12, 8, np.random.default_rng([seed, 11])),
        make_pca(15, 4, 1000.0, np.random.default_rng([seed, 12])),
        make_qap(10, np.random.default_rng([seed, 13])),
    ]
    rng = np.random.default_rng([seed, 30])
    rows = []
    for problem in problems:
        min_slack = np.inf
        for _ in range(1000):
            x = random_stiefel(problem.n, problem.p, rng)
            lhs, rhs, _ok = lemma2_check(x, problem.gradient(x))
            min_slack = min(min_slack, lhs - rhs)
        rows.append({
            "suite": "lemma2",
            "name": f"{problem.name} n={problem.n} p={problem.p}",
            "passed": bool(min_slack >= -1e-10),
            "metric": "min_slack",
            "value": float(min_slack),
            "limit": -1e-10,
            "detail": {"points": 1000},
        })
    return rows


def _suite_prop2(seed, trials, _):
    trials = max(trials or 10000, 1000)
    rng = np.random.default_rng([seed, 40])
    n = 10
    x = random_stiefel(n, n, rng)
    g = rng.standard_normal((n, n))
    tail = prop2_tail(x, g, 8, trials, rng)
    rows = [{
        "suite": "prop2",
        "name": f"haar n={n} r=8 tail fraction",
        "passed": tail.fraction >= 0.5,
        "metric": "fraction",
        "value": tail.fraction,
        "limit": 0.5,
        "detail": {"std_error": tail.std_error, "trials": trials},
    }]
    tail_mid = prop2_tail(x, g, 5, trials, rng)
    ratio = tail_mid.median_ratio / tail_mid.mean_target
    rows.append({
        "suite": "prop2",
        "name": f"haar n={n} r=5 median near mean",
        "passed": 0.5 <= ratio <= 2.0,
        "metric": "median_over_mean",
        "value": float(ratio),
        "limit": 2.0,
        "detail": {"lower": 0.5, "median": tail_mid.median_ratio,
                   "mean_target": tail_mid.mean_target, "trials": trials},
    })
    return rows


def _suite_embedding(seed, trials, _):
    rng = np.random.default_rng([seed, 50])
    worst = {"permutation": 0.0, "haar": 0.0}
    for i in range(100):
        n = int(rng.integers(4, 65))
        r = int(rng.integers(2, n + 1))
        p = int(rng.integers(1, n + 1))
        x = random_stiefel(n, p, rng)
        y = qr_orthonormalize(rng.standard_normal((r, r)))
        if i % 2 == 0:
            frame = sample_permutation_frame(n, r, rng)
            key = "permutation"
        else:
            frame = sample_haar_frame(n, r, rng)
            key = "haar"
        worst[key] = max(worst[key], block_embedding_equivalence(frame, y, x))
    rows = [{
        "suite": "embedding",
        "name": f"{key} frames, 50 random (frame, Y, X)",
        "passed": worst[key] <= 1e-11,
        "metric": "max_residual",
        "value": worst[key],
        "limit": 1e-11,
        "detail": {},
    } for key in ("permutation", "haar")]
    worst_rel = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 65))
        p = int(rng.integers(1, n + 1))
        x = random_stiefel(n, p, rng)
        g = rng.standard_normal((n, p))
        dense, trace_form = full_grad_norm_identity(x, g)
        worst_rel = max(worst_rel, abs(dense - trace_form) / max(dense, 1e-30))
    rows.append({
        "suite": "embedding",
        "name": "norm identity, dense vs trace form",
        "passed": worst_rel <= 1e-10,
        "metric": "max_rel_diff",
        "value": worst_rel,
        "limit": 1e-10,
        "detail": {"points": 100},
    })
    return rows


_SUITE_FUNCS = {
    "gradients": _suite_gradients,
    "prop1": _suite_prop1,
    "lemma2": _suite_lemma2,
    "prop2": _suite_prop2,
    "embedding": _suite_embedding,
}


def run_verify_suite(suite, seed, trials=None, gradient_problems=None):
    """Run one named oracle suite (or 'all') and return a report dict.

    `trials` overrides the Monte Carlo trial counts for quick smoke runs;
    `gradient_problems` substitutes the gradient-suite problem set (used by
    mutation tests).
    """
    if suite == "all":
        names = VERIFY_SUITES
    elif suite in VERIFY_SUITES:
        names = (suite,)
    else:
        raise ConfigError("suite",
                          f"unknown suite {suite!r}; choose from {', '.join(VERIFY_SUITES)} or all")
    checks = []
    for name in names:
        checks.extend(_SUITE_FUNCS[name](seed, trials, gradient_problems))
    return {
        "format": "rsdm-verify-report",
        "version": __version__,
        "seed": int(seed),
        "suites": list(names),
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }


# ---------------------------------------------------------------------------
# commands

def _env_seed():
    raw = os.environ.get("RSDM_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("RSDM_SEED", f"must be an integer, got {raw!r}") from None


def _load_experiment(args):
    flat = load_config_file(args.config)
    config = experiment_from_flat(flat)
    env = _env_seed()
    if env is not None:
        config = replace(config, solver=replace(config.solver, seed=env))
    if args.output_dir:
        config = replace(config, output_dir=args.output_dir)
    validate_experiment(config)
    return config


def _execute_cell(spec, solver):
    """Worker: build the problem and run one solver (process-pool safe)."""
    problem = build_problem(spec)
    trace = run(problem, solver)
    info = {"name": problem.name, "n": problem.n, "p": problem.p,
            "optimum": problem.optimum}
    return trace, info


def _run_cells(cells, jobs):
    """Execute (spec, solver) cells, preserving order; parallel when jobs > 1."""
    if jobs <= 1:
        cache = {}
        results = []
        for spec, solver in cells:
            if spec not in cache:
                cache[spec] = build_problem(spec)
            problem = cache[spec]
            trace = run(problem, solver)
            results.append((trace, {"name": problem.name, "n": problem.n,
                                    "p": problem.p, "optimum": problem.optimum}))
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_execute_cell, spec, solver) for spec, solver in cells]
        return [f.result() for f in futures]


def _write_outputs(outdir, stem, trace, emit):
    written = []
    if emit in ("csv", "both"):
        path = outdir / f"{stem}.csv"
        write_trace_csv(path, trace)
        written.append(path)
    if emit in ("json", "both"):
        path = outdir / f"{stem}.json"
        write_trace_json(path, trace)
        written.append(path)
    return written


def _write_meta(outdir, payload):
    path = outdir / "meta.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def cmd_run(args):
    config = _load_experiment(args)
    outdir = Path(config.output_dir)
    base_seed = config.solver.seed
    cells = [(config.problem, replace(config.solver, seed=base_seed + i))
             for i in range(config.repeats)]
    t_start = time.perf_counter()
    results = _run_cells(cells, args.jobs)
    elapsed = time.perf_counter() - t_start
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for (spec, solver), (trace, info) in zip(cells, results):
        stem = f"{spec.kind}_{solver.family}_{solver.seed}"
        written = _write_outputs(outdir, stem, trace, config.emit)
        outputs.extend(written)
        final = trace.final
        gap = "" if final.optgap is None else f", optgap={final.optgap:.3e}"
        print(f"wrote {written[0].name}: {len(trace.records)} records, "
              f"final value={final.value:.6e}{gap}")
    if args.plot:
        for path in list(outputs):
            if path.suffix == ".csv":
                outputs.append(render_trace_figure(path))
    problem_info = results[0][1]
    _write_meta(outdir, {
        "format": "rsdm-meta",
        "version": __version__,
        "command": "run",
        "config": resolved_flat_config(config),
        "problem": problem_info,
        "repeats": config.repeats,
        "elapsed_seconds": elapsed,
        "outputs": [p.name for p in outputs],
    })
    print(f"ok: {config.repeats} run(s) in {elapsed:.2f}s -> {outdir}")
    return 0


def _parse_sweep_values(raw_values, param):
    tokens = []
    for chunk in raw_values:
        tokens.extend(t for t in chunk.split(",") if t.strip())
    if not tokens:
        raise ConfigError("values", "need at least one sweep value")
    values = []
    for token in tokens:
        if param == "r":
            values.append(_to_int("values", token))
        else:
            values.append(_to_float("values", token))
    return values


def cmd_sweep(args):
    config = _load_experiment(args)
    values = _parse_sweep_values(args.values, args.param)
    cells = []
    labels = []
    for value in values:
        solver_v = replace(config.solver, **{args.param: value})
        validate_experiment(replace(config, solver=solver_v))
        for i in range(config.repeats):
            cells.append((config.problem, replace(solver_v, seed=config.solver.seed + i)))
            labels.append((value, f"{args.param}_{value}"))
    t_start = time.perf_counter()
    results = _run_cells(cells, args.jobs)
    elapsed = time.perf_counter() - t_start
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    summary_rows = []
    for (spec, solver), (value, subdir), (trace, info) in zip(cells, labels, results):
        cell_dir = outdir / subdir
        cell_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{spec.kind}_{solver.family}_{solver.seed}"
        written = _write_outputs(cell_dir, stem, trace, config.emit)
        outputs.extend(written)
        final = trace.final
        summary_rows.append({
            "param": args.param,
            "value": value,
            "seed": solver.seed,
            "final_value": final.value,
            "final_optgap": final.optgap,
        })
    summary_path = outdir / "summary.csv"
    lines = ["param,value,seed,final_value,final_optgap"]
    for row in summary_rows:
        lines.append(",".join((
            row["param"],
            str(row["value"]),
            str(row["seed"]),
            _fmt(row["final_value"]),
            _fmt(row["final_optgap"]),
        )))
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    outputs.append(summary_path)
    if args.plot:
        outputs.append(render_sweep_figure(summary_rows, outdir / "sweep_summary.png"))
        for path in list(outputs):
            if path.suffix == ".csv" and path.name != "summary.csv":
                outputs.append(render_trace_figure(path))
    _write_meta(outdir, {
        "format": "rsdm-meta",
        "version": __version__,
        "command": "sweep",
        "config": resolved_flat_config(config),
        "problem": results[0][1],
        "sweep": {"param": args.param, "values": values},
        "repeats": config.repeats,
        "elapsed_seconds": elapsed,
        "outputs": [str(p.relative_to(outdir)) for p in outputs],
    })
    print(f"ok: {len(cells)} sweep run(s) in {elapsed:.2f}s -> {summary_path}")
    return 0


def cmd_verify(args):
    seed = args.seed
    if seed is None:
        seed = _env_seed()
    if seed is None:
        seed = 0
    report = run_verify_suite(args.suite, seed, trials=args.trials)
    width = max(len(c["name"]) for c in report["checks"])
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['suite']:<10} {check['name']:<{width}}  "
              f"{check['metric']}={check['value']:.6g} (limit {check['limit']:.6g})")
        if not check["passed"]:
            print(f"      detail: {json.dumps(check['detail'], sort_keys=True)}")
    outdir = Path(args.output_dir) if args.output_dir else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    report_path = outdir / "verify_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    n_pass = sum(c["passed"] for c in report["checks"])
    print(f"{'ok' if report['passed'] else 'FAILED'}: {n_pass}/{len(report['checks'])} "
          f"checks passed -> {report_path}")
    return 0 if report["passed"] else 1


def cmd_plot(args):
    targets = []
    for raw in args.paths:
        path = Path(raw)
        if path.is_dir():
            targets.extend(sorted(path.glob("*.csv")))
        else:
            targets.append(path)
    targets = [p for p in targets if p.name != "summary.csv"]
    if not targets:
        raise ConfigError("paths", "no trace CSV files found")
    outdir = Path(args.output_dir) if args.output_dir else None
    for csv_path in targets:
        out = outdir / f"{csv_path.stem}.png" if outdir else None
        if outdir:
            outdir.mkdir(parents=True, exist_ok=True)
        figure = render_trace_figure(csv_path, out)
        print(f"wrote {figure}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rsdm",
        description="Random submanifold descent experiment harness",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for independent runs (default 1)")
    common.add_argument("--output-dir", default=None,
                        help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common],
                           help="execute the runs described by a config file")
    p_run.add_argument("config", help="flat key=value or JSON config file")
    p_run.add_argument("--plot", action="store_true",
                       help="render convergence figures next to the traces")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="run the numerical oracle suites")
    p_verify.add_argument("suite", choices=VERIFY_SUITES + ("all",))
    p_verify.add_argument("--seed", type=int, default=None,
                          help="seed for the oracle RNG (default RSDM_SEED or 0)")
    p_verify.add_argument("--trials", type=int, default=None,
                          help="override Monte Carlo trial counts (smoke runs)")
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="cross-product runs over one solver parameter")
    p_sweep.add_argument("config", help="flat key=value or JSON config file")
    p_sweep.add_argument("--param", choices=("eta", "r"), required=True)
    p_sweep.add_argument("--values", required=True, nargs="+",
                         help="comma- or space-separated parameter values")
    p_sweep.add_argument("--plot", action="store_true",
                         help="render per-cell and summary figures")
    p_sweep.set_defaults(func=cmd_sweep)

    p_plot = sub.add_parser("plot", parents=[common],
                            help="render figures for existing trace CSVs")
    p_plot.add_argument("paths", nargs="+", help="trace CSV files or directories")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err.field}: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failures map to a distinct exit code
        print(f"runtime error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
