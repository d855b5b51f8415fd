"""Descent methods on orthonormal matrices with uniform iteration traces.

The submanifold family updates X by rotating only an r-dimensional random
row subspace per iteration: sample a frame P(r), form the r x r skew
gradient P(r) skew(G X^T) P(r)^T, retract it on the r x r orthogonal group,
and push the rotation back through the frame.  No n x n matrix is ever
materialized.  Full-space gradient descent (with and without momentum) is
included as the baseline.

All solvers draw from pinned, separate random streams (init point, frames,
batches, sweep shuffles) derived from the config seed, so traces are exactly
reproducible and variant solvers can share frame sequences.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    ENUMERATION_LIMIT,
    SamplerKind,
    enumerate_truncated_permutations,
    frame_apply,
    frame_apply_transpose,
    sample_frame,
    truncated_permutation_count,
)
from .manifold import (
    RetractionKind,
    SQUARE_ONLY,
    SkewMatrix,
    StiefelPoint,
    as_matrix,
    feasibility_residual,
    random_stiefel,
    retract,
)
from .problems import gap_from_value

FAMILIES = (
    "rsdm",
    "rsdm_momentum",
    "rsdm_exact",
    "rsdm_stochastic",
    "rgd",
    "rgd_momentum",
)
SUBMANIFOLD_FAMILIES = ("rsdm", "rsdm_momentum", "rsdm_exact", "rsdm_stochastic")
GRAD_NORM_MODES = ("full", "skipped")

# Child-stream tags: one independent generator per concern, so e.g. batch
# draws never perturb the frame sequence.
STREAM_INIT = 0
STREAM_FRAMES = 1
STREAM_BATCH = 2
STREAM_SHUFFLE = 3


def stream_rng(seed, stream):
    """Generator for one named stream of a run seed."""
    return np.random.default_rng([int(seed), int(stream)])


class ConfigError(ValueError):
    """Invalid solver or experiment configuration; names the offending field."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(message)


@dataclass
class SolverConfig:
    """Settings for one solver run.

    Fields not used by the requested family (e.g. beta for plain rsdm) are
    tolerated and recorded but have no effect.
    """

    family: str
    r: int = 2
    eta: float = 0.1
    max_iters: int = 1000
    seed: int = 0
    sampler: SamplerKind = SamplerKind.UNIFORM_PERMUTATION
    retraction: RetractionKind = RetractionKind.QR
    beta: float = 0.0
    inner_iters: int = 1
    batch_size: int = 1
    log_every: int = 10
    grad_norm_mode: str = "full"


@dataclass
class TraceRecord:
    """Diagnostics for one iterate. None marks a metric not computed there."""

    iter: int
    time_ns: int
    value: float
    optgap: float | None
    grad_norm_sq: float | None
    sub_grad_norm_sq: float | None
    feasibility: float


@dataclass
class Trace:
    """Per-iteration records plus the final point and solver extras."""

    records: list
    final_point: StiefelPoint
    family: str
    extras: dict = field(default_factory=dict)

    def values(self):
        return np.array([rec.value for rec in self.records])

    @property
    def final(self):
        return self.records[-1]


@dataclass
class ProjectedGradient:
    """The r x r submanifold gradient with its frame-projected caches.

    skew equals (A B^T - B A^T)/2 where A = P(r) G and B = P(r) X.
    """

    skew: SkewMatrix
    a: np.ndarray
    bm: np.ndarray


def validate_config(config, problem=None):
    """Raise ConfigError naming the bad field; silent when valid."""
    if config.family not in FAMILIES:
        raise ConfigError("family", f"unknown solver family {config.family!r}; "
                                    f"choose one of {', '.join(FAMILIES)}")
    if not isinstance(config.r, (int, np.integer)):
        raise ConfigError("r", f"r must be an integer, got {config.r!r}")
    if config.r < 2:
        raise ConfigError(
            "r",
            f"r={config.r} is rejected: the expected submanifold gradient "
            "energy scales with r(r-1)/(n(n-1)), which vanishes at r=1, so "
            "such a run can never make progress",
        )
    if not config.eta > 0:
        raise ConfigError("eta", f"step size must be positive, got {config.eta}")
    if config.max_iters < 1:
        raise ConfigError("max_iters", f"need at least one iteration, got {config.max_iters}")
    if not isinstance(config.seed, (int, np.integer)) or config.seed < 0:
        raise ConfigError("seed", f"seed must be a nonnegative integer, got {config.seed!r}")
    if not 0.0 <= config.beta < 1.0:
        raise ConfigError("beta", f"momentum must lie in [0, 1), got {config.beta}")
    if config.inner_iters < 1:
        raise ConfigError("inner_iters", f"need at least one inner step, got {config.inner_iters}")
    if config.batch_size < 1:
        raise ConfigError("batch_size", f"batch size must be >= 1, got {config.batch_size}")
    if config.log_every < 1:
        raise ConfigError("log_every", f"logging cadence must be >= 1, got {config.log_every}")
    if config.grad_norm_mode not in GRAD_NORM_MODES:
        raise ConfigError("grad_norm_mode",
                          f"expected one of {GRAD_NORM_MODES}, got {config.grad_norm_mode!r}")
    if not isinstance(config.sampler, SamplerKind):
        raise ConfigError("sampler", f"unknown sampler {config.sampler!r}")
    if not isinstance(config.retraction, RetractionKind):
        raise ConfigError("retraction", f"unknown retraction {config.retraction!r}")
    if config.family == "rsdm_exact":
        if config.sampler is not SamplerKind.EXHAUSTIVE_PERMUTATION:
            raise ConfigError("sampler", "rsdm_exact requires the exhaustive sampler")
    elif config.family in SUBMANIFOLD_FAMILIES:
        if config.sampler is SamplerKind.EXHAUSTIVE_PERMUTATION:
            raise ConfigError("sampler",
                              f"{config.family} needs a per-iteration sampler (haar or permutation)")
    if problem is not None:
        if config.family in SUBMANIFOLD_FAMILIES and config.r > problem.n:
            raise ConfigError("r", f"r={config.r} exceeds the row dimension n={problem.n}")
        if config.family == "rsdm_exact":
            count = truncated_permutation_count(problem.n, config.r)
            if count > ENUMERATION_LIMIT:
                raise ConfigError(
                    "r", f"exhaustive sweep needs {count} frames, above the "
                         f"limit of {ENUMERATION_LIMIT}")
        if config.family == "rsdm_stochastic" and not problem.has_stochastic_gradient:
            raise ConfigError("family",
                              f"{problem.name} has no stochastic gradient")
        if (config.family in ("rgd", "rgd_momentum")
                and config.retraction in SQUARE_ONLY and problem.n != problem.p):
            raise ConfigError("retraction",
                              f"{config.retraction.value} needs n = p, got "
                              f"({problem.n}, {problem.p})")


def condition_constant(n, r):
    """Sweep energy constant (n-2)! r (r-1) / (n-r)!.

    Over a full sweep of all ordered r-subsets, the summed projected
    gradient energy equals exactly this multiple of the full skew energy.
    """
    if n < 2 or r < 2 or r > n:
        raise ValueError(f"need n >= r >= 2, got n={n}, r={r}")
    return math.factorial(n - 2) * r * (r - 1) / math.factorial(n - r)


def projected_gradient(frame, g, x):
    """Form the r x r skew gradient P(r) skew(G X^T) P(r)^T from caches.

    Only r x p and r x r products are used; cost is O(npr) for dense frames
    and O(pr^2) plus gathers for permutation frames.
    """
    a = frame_apply(frame, g)
    bm = frame_apply(frame, x)
    m = a @ bm.T
    return ProjectedGradient(SkewMatrix((m - m.T) / 2.0), a, bm)


def apply_submanifold_rotation(frame, y, x):
    """X + P(r)^T (Y - I) P(r) X, the rank-r update behind every step.

    For permutation frames only the r sampled rows of X are touched; all
    other rows are copied through untouched.
    """
    xd = as_matrix(x)
    r = y.shape[0]
    d = (y - np.eye(r)) @ frame_apply(frame, xd)
    if frame.is_permutation:
        out = xd.copy()
        out[frame.indices] += d
        return out
    return xd + frame_apply_transpose(frame, d)


def _substep(xd, g, frame, eta, retraction):
    """One submanifold rotation of the raw iterate; returns (x', ||skew||^2)."""
    pg = projected_gradient(frame, g, xd)
    sub_sq = pg.skew.norm_sq()
    eye = StiefelPoint(np.eye(frame.r), validate=False)
    y = retract(retraction, eye, -eta * pg.skew.data).data
    return apply_submanifold_rotation(frame, y, xd), sub_sq


def rsdm_step(x, g, frame, eta, retraction=RetractionKind.QR):
    """Single public step: rotate the sampled subspace against gradient G.

    Returns the new point and a diagnostics dict carrying the squared norm
    of the r x r gradient that drove the step.  eta = 0 degenerates to the
    identity map (solver runs require eta > 0; this entry point tolerates 0).
    """
    if not eta >= 0:
        raise ValueError(f"step size must be nonnegative, got {eta}")
    xd = as_matrix(x)
    x_new, sub_sq = _substep(xd, np.asarray(g, dtype=float), frame, eta, retraction)
    return StiefelPoint(x_new, validate=False), {"sub_grad_norm_sq": sub_sq}


def _project_tangent(xd, g):
    """Raw-array tangent projection G - X (X^T G + G^T X)/2."""
    xtg = xd.T @ g
    return g - xd @ ((xtg + xtg.T) / 2.0)


def _make_record(k, t0, problem, xd, sub_sq, config, grad=None):
    """Assemble the TraceRecord for iterate k.

    The full-space gradient norm is expensive relative to a submanifold
    step, so it is only computed on log_every multiples (or never, when
    grad_norm_mode is 'skipped').
    """
    grad_norm_sq = None
    if config.grad_norm_mode == "full" and k % config.log_every == 0:
        g = problem.gradient(xd) if grad is None else grad
        u = _project_tangent(xd, g)
        grad_norm_sq = float(np.sum(u * u))
    value = problem.value(xd)
    gap = None
    if problem.optimum is not None:
        gap = gap_from_value(value, problem.optimum)
    return TraceRecord(
        iter=k,
        time_ns=time.perf_counter_ns() - t0,
        value=value,
        optgap=gap,
        grad_norm_sq=grad_norm_sq,
        sub_grad_norm_sq=sub_sq,
        feasibility=feasibility_residual(xd),
    )


def _init_point(problem, config):
    return random_stiefel(problem.n, problem.p, stream_rng(config.seed, STREAM_INIT)).data


def run_rsdm(problem, config):
    """Random submanifold descent: one fresh frame and rotation per iteration."""
    if config.family != "rsdm":
        raise ConfigError("family", f"run_rsdm got family {config.family!r}")
    validate_config(config, problem)
    rng_frames = stream_rng(config.seed, STREAM_FRAMES)
    xd = _init_point(problem, config)
    t0 = time.perf_counter_ns()
    g = problem.gradient(xd)
    records = [_make_record(0, t0, problem, xd, None, config, grad=g)]
    for k in range(1, config.max_iters + 1):
        frame = sample_frame(config.sampler, problem.n, config.r, rng_frames)
        xd, sub_sq = _substep(xd, g, frame, config.eta, config.retraction)
        g = problem.gradient(xd)
        records.append(_make_record(k, t0, problem, xd, sub_sq, config, grad=g))
    return Trace(records, StiefelPoint(xd, validate=False), config.family)


def run_rsdm_momentum(problem, config):
    """Submanifold descent with a frame held fixed for S inner steps.

    Inner steps evolve Y on the r x r orthogonal group from Y = I, each
    using the gradient at the moved point Z = X + P(r)^T (Y - I) P(r) X and
    a heavy-ball term projected onto the tangent space at Y.  The first
    momentum difference is zero by the Y^(-1) = Y^0 convention.
    """
    if config.family != "rsdm_momentum":
        raise ConfigError("family", f"run_rsdm_momentum got family {config.family!r}")
    validate_config(config, problem)
    rng_frames = stream_rng(config.seed, STREAM_FRAMES)
    xd = _init_point(problem, config)
    eye = np.eye(config.r)
    t0 = time.perf_counter_ns()
    g = problem.gradient(xd)
    records = [_make_record(0, t0, problem, xd, None, config, grad=g)]
    for k in range(1, config.max_iters + 1):
        frame = sample_frame(config.sampler, problem.n, config.r, rng_frames)
        px = frame_apply(frame, xd)
        y = eye
        y_prev = eye
        sub_sq = None
        for s in range(config.inner_iters):
            if s == 0:
                gz = g  # Y = I moves nothing, reuse the gradient at X
            else:
                gz = problem.gradient(apply_submanifold_rotation(frame, y, xd))
            w = frame_apply(frame, gz) @ px.T
            if s == 0:
                grad_y = (w - w.T) / 2.0
                sub_sq = SkewMatrix(grad_y).norm_sq()
            else:
                grad_y = (w - y @ w.T @ y) / 2.0
            step = -config.eta * grad_y
            if config.beta != 0.0 and s > 0:
                diff = y - y_prev
                step = step + config.beta * ((diff - y @ diff.T @ y) / 2.0)
            y_next = retract(config.retraction,
                             StiefelPoint(y, validate=False), step).data
            y_prev, y = y, y_next
        xd = apply_submanifold_rotation(frame, y, xd)
        g = problem.gradient(xd)
        records.append(_make_record(k, t0, problem, xd, sub_sq, config, grad=g))
    return Trace(records, StiefelPoint(xd, validate=False), config.family)


def run_rsdm_stochastic(problem, config):
    """Submanifold descent driven by mini-batch gradients.

    Batches are drawn uniformly with replacement from their own random
    stream; batch_size >= N degenerates to the deterministic full sweep.
    """
    if config.family != "rsdm_stochastic":
        raise ConfigError("family", f"run_rsdm_stochastic got family {config.family!r}")
    validate_config(config, problem)
    rng_frames = stream_rng(config.seed, STREAM_FRAMES)
    rng_batch = stream_rng(config.seed, STREAM_BATCH)
    sweep = None
    if problem.num_components is not None and config.batch_size >= problem.num_components:
        sweep = np.arange(problem.num_components)
    xd = _init_point(problem, config)
    t0 = time.perf_counter_ns()
    records = [_make_record(0, t0, problem, xd, None, config)]
    for k in range(1, config.max_iters + 1):
        frame = sample_frame(config.sampler, problem.n, config.r, rng_frames)
        g = problem.stochastic_gradient(xd, rng_batch, config.batch_size, indices=sweep)
        xd, sub_sq = _substep(xd, g, frame, config.eta, config.retraction)
        records.append(_make_record(k, t0, problem, xd, sub_sq, config))
    return Trace(records, StiefelPoint(xd, validate=False), config.family)


def run_rsdm_exact(problem, config):
    """Deterministic-sweep variant: every ordered r-subset once per outer pass.

    Each outer iteration shuffles the full enumeration, takes one inner step
    per frame with a fresh gradient, and records two energy readings: the
    summed projection of the sweep-start gradient (which the sweep constant
    ties exactly to the full skew energy) and the sum over inner steps of
    the evolving gradients actually used.
    """
    if config.family != "rsdm_exact":
        raise ConfigError("family", f"run_rsdm_exact got family {config.family!r}")
    validate_config(config, problem)
    frames = list(enumerate_truncated_permutations(problem.n, config.r))
    n_frames = len(frames)
    cp = condition_constant(problem.n, config.r)
    rng_shuffle = stream_rng(config.seed, STREAM_SHUFFLE)
    xd = _init_point(problem, config)
    t0 = time.perf_counter_ns()
    g = problem.gradient(xd)
    records = [_make_record(0, t0, problem, xd, None, config, grad=g)]
    sweeps = []
    it = 0
    for outer in range(1, config.max_iters + 1):
        lhs_start, rhs_full = condition7_lhs(frames, xd, g)
        lhs_fresh = 0.0
        for idx in rng_shuffle.permutation(n_frames):
            xd, sub_sq = _substep(xd, g, frames[idx], config.eta, config.retraction)
            g = problem.gradient(xd)
            lhs_fresh += sub_sq
            it += 1
            records.append(_make_record(it, t0, problem, xd, sub_sq, config, grad=g))
        sweeps.append({
            "outer": outer,
            "lhs_sweep_start": lhs_start,
            "lhs_fresh": lhs_fresh,
            "rhs_full": rhs_full,
            "c_p": cp,
            "ratio": lhs_start / rhs_full if rhs_full > 0 else float("inf"),
        })
    extras = {"sweeps": sweeps, "frames_per_sweep": n_frames, "c_p": cp}
    return Trace(records, StiefelPoint(xd, validate=False), config.family, extras)


def condition7_lhs(frames, x, g):
    """Summed projected energy of one gradient across a frame collection.

    Returns (lhs, rhs_full) where lhs = sum_s ||P_s(r) K P_s(r)^T||_F^2 for
    K = skew(G X^T), and rhs_full = ||K||_F^2 assembled densely.  A full
    sweep of all ordered r-subsets gives lhs = condition_constant(n, r) *
    rhs_full exactly.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    xd = as_matrix(x)
    g = np.asarray(g, dtype=float)
    lhs = 0.0
    for frame in frames:
        lhs += projected_gradient(frame, g, xd).skew.norm_sq()
    k_dense = (g @ xd.T - xd @ g.T) / 2.0
    rhs_full = float(np.sum(k_dense * k_dense))
    return lhs, rhs_full


def _run_full_space(problem, config, momentum):
    xd = _init_point(problem, config)
    x_prev = xd
    t0 = time.perf_counter_ns()
    g = problem.gradient(xd)
    records = [_make_record(0, t0, problem, xd, None, config, grad=g)]
    for k in range(1, config.max_iters + 1):
        step = -config.eta * _project_tangent(xd, g)
        if momentum and config.beta != 0.0:
            step = step + config.beta * _project_tangent(xd, xd - x_prev)
        x_next = retract(config.retraction, StiefelPoint(xd, validate=False), step).data
        x_prev, xd = xd, x_next
        g = problem.gradient(xd)
        records.append(_make_record(k, t0, problem, xd, None, config, grad=g))
    return Trace(records, StiefelPoint(xd, validate=False), config.family)


def run_rgd(problem, config):
    """Full-space gradient descent with the chosen retraction."""
    if config.family != "rgd":
        raise ConfigError("family", f"run_rgd got family {config.family!r}")
    validate_config(config, problem)
    return _run_full_space(problem, config, momentum=False)


def run_rgd_momentum(problem, config):
    """Full-space descent plus a heavy-ball term projected at the iterate."""
    if config.family != "rgd_momentum":
        raise ConfigError("family", f"run_rgd_momentum got family {config.family!r}")
    validate_config(config, problem)
    return _run_full_space(problem, config, momentum=True)


FAMILY_RUNNERS = {
    "rsdm": run_rsdm,
    "rsdm_momentum": run_rsdm_momentum,
    "rsdm_exact": run_rsdm_exact,
    "rsdm_stochastic": run_rsdm_stochastic,
    "rgd": run_rgd,
    "rgd_momentum": run_rgd_momentum,
}


def run(problem, config):
    """Dispatch to the runner for config.family."""
    if config.family not in FAMILY_RUNNERS:
        raise ConfigError("family", f"unknown solver family {config.family!r}")
    return FAMILY_RUNNERS[config.family](problem, config)
