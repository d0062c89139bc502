"""Seeded simulation of two-cell statistics and standardized sums, with empirical
distance estimators against the squared-normal limit law.

Sampling is chunked: every chunk derives its own child seed from
(master seed, experiment id, chunk index) through a SplitMix-style avalanche,
so results are bitwise reproducible and independent of how many worker threads
execute the chunks.  The Wasserstein estimator integrates |F_N - F| exactly
piecewise between order statistics (plus the analytic tail), and standard
errors come from a seeded multinomial bootstrap over the empirical support.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import bdtr, erf, erfinv, gammainc

from .limit_bounds import MomentOracle, SumSpecification
from .power_divergence import (
    AlphaPolicy,
    MultinomialModel,
    bound_pearson,
    bound_power_divergence,
    kolmogorov_bound_pd,
)
from .reports import BoundReport
from .stein_solution import SmoothFunction

__all__ = [
    "AuditExperiment",
    "AuditRow",
    "DistanceEstimate",
    "RngSeed",
    "SMOOTH_BATTERY",
    "audit",
    "empirical_kolmogorov_chi2_1",
    "empirical_wasserstein_chi2_1",
    "make_smoothing_bump",
    "sample_component_sum",
    "sample_statistic",
    "smooth_discrepancy",
    "splitmix64",
]

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 18


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 avalanche: increment by the golden gamma, then mix."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


@dataclass(frozen=True)
class RngSeed:
    """Master seed with documented child-stream derivation.

    child seed = splitmix64(splitmix64(master ^ fnv1a(experiment id)) ^ chunk).
    Identical (master, id, chunk) always give the identical stream; distinct
    chunk indices give distinct streams.
    """

    master_seed: int

    def __post_init__(self) -> None:
        if not (0 <= self.master_seed < 1 << 64):
            raise ValueError("master seed must be an unsigned 64-bit integer")

    def child_seed(self, experiment_id: str, chunk: int) -> int:
        state = splitmix64(self.master_seed ^ _fnv1a64(experiment_id))
        return splitmix64(state ^ (chunk & _MASK64))

    def generator(self, experiment_id: str, chunk: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.child_seed(experiment_id, chunk)))


@dataclass(frozen=True)
class DistanceEstimate:
    estimate: float
    standard_error: float
    sample_count: int
    metric: str

    def __post_init__(self) -> None:
        if self.estimate < 0 or self.standard_error < 0:
            raise ValueError("estimate and standard error must be nonnegative")
        if self.metric == "kolmogorov" and self.estimate > 1.0 + 1e-12:
            raise ValueError(f"KS estimate {self.estimate} exceeds 1")


def _thread_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("STEIN_AUDIT_THREADS", "")
        threads = int(env) if env else min(8, os.cpu_count() or 1)
    return max(1, threads)


def _chunk_sizes(N: int) -> list[int]:
    sizes = [_CHUNK] * (N // _CHUNK)
    if N % _CHUNK:
        sizes.append(N % _CHUNK)
    return sizes


def _run_chunked(draw_chunk, N: int, threads: int | None) -> np.ndarray:
    """Execute draw_chunk(index, size) over all chunks; merge in index order."""
    sizes = _chunk_sizes(N)
    workers = _thread_count(threads)
    if workers == 1 or len(sizes) == 1:
        parts = [draw_chunk(i, size) for i, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(draw_chunk, i, size) for i, size in enumerate(sizes)]
            parts = [f.result() for f in futures]
    return np.concatenate(parts)


def _binomial_cdf_table(n: int, p1: float) -> np.ndarray:
    cdf = bdtr(np.arange(n + 1, dtype=float), n, p1)
    cdf[-1] = 1.0
    return cdf


def _pearson_table(model: MultinomialModel) -> np.ndarray:
    u1 = np.arange(model.n + 1, dtype=float)
    w = (u1 - model.n * model.p1) / math.sqrt(model.np1p2)
    return w * w


def _pd_table(model: MultinomialModel, lam: float) -> np.ndarray:
    if lam <= -1.0:
        raise ValueError(f"power divergence requires lambda > -1, got {lam}")
    u1 = np.arange(model.n + 1, dtype=float)
    u2 = model.n - u1
    e1 = model.n * model.p1
    e2 = model.n * model.p2
    if lam == 0.0:
        t1 = np.where(u1 > 0, u1 * np.log(np.where(u1 > 0, u1, 1.0) / e1), 0.0)
        t2 = np.where(u2 > 0, u2 * np.log(np.where(u2 > 0, u2, 1.0) / e2), 0.0)
        return 2.0 * (t1 + t2)
    t1 = np.where(u1 > 0, u1 * ((np.where(u1 > 0, u1, 1.0) / e1) ** lam - 1.0), 0.0)
    t2 = np.where(u2 > 0, u2 * ((np.where(u2 > 0, u2, 1.0) / e2) ** lam - 1.0), 0.0)
    return 2.0 / (lam * (lam + 1.0)) * (t1 + t2)


def _sample_from_cdf_table(
    cdf: np.ndarray, values: np.ndarray, N: int, seed: RngSeed, experiment_id: str,
    threads: int | None,
) -> np.ndarray:
    def draw(i: int, size: int) -> np.ndarray:
        rng = seed.generator(experiment_id, i)
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="left")
        return values[np.minimum(idx, len(values) - 1)]

    return _run_chunked(draw, N, threads)


def _sample_w_component(
    oracle: MomentOracle, n: int, N: int, seed: RngSeed, experiment_id: str,
    threads: int | None,
) -> np.ndarray:
    if oracle.family == "bernoulli_standardized":
        p1 = oracle.param("p1")
        cdf = _binomial_cdf_table(n, p1)
        scale = math.sqrt(n * p1 * (1.0 - p1))
        values = (np.arange(n + 1, dtype=float) - n * p1) / scale
        return _sample_from_cdf_table(cdf, values, N, seed, experiment_id, threads)
    if oracle.family == "rademacher":
        cdf = _binomial_cdf_table(n, 0.5)
        values = (2.0 * np.arange(n + 1, dtype=float) - n) / math.sqrt(n)
        return _sample_from_cdf_table(cdf, values, N, seed, experiment_id, threads)
    if oracle.family == "uniform_standardized":

        def draw(i: int, size: int) -> np.ndarray:
            rng = seed.generator(experiment_id, i)
            acc = np.zeros(size)
            for _ in range(n):
                acc += rng.random(size)
            # sum of n uniforms -> standardized: X_i = sqrt(12) (V_i - 1/2)
            return math.sqrt(12.0 / n) * (acc - 0.5 * n)

        return _run_chunked(draw, N, threads)
    raise ValueError(f"the {oracle.family} family has no sampler")


def sample_statistic(
    kind: str,
    target,
    N: int,
    seed: int | RngSeed,
    *,
    lam: float | None = None,
    experiment_id: str | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Draw N i.i.d. statistic values; bitwise reproducible for fixed inputs.

    kind "pearson"/"power_divergence": target is a MultinomialModel and counts
    are drawn by CDF inversion of the first-cell binomial.  kind "w_sum":
    target is a single-component SumSpecification whose family carries a
    sampler (the table family does not).
    """
    if N < 1:
        raise ValueError(f"sample count must be >= 1, got {N}")
    if isinstance(seed, (int, np.integer)):
        seed = RngSeed(int(seed))
    if kind == "pearson":
        model: MultinomialModel = target
        eid = experiment_id or f"pearson:n={model.n}:p1={model.p1!r}"
        cdf = _binomial_cdf_table(model.n, model.p1)
        return _sample_from_cdf_table(cdf, _pearson_table(model), N, seed, eid, threads)
    if kind == "power_divergence":
        if lam is None:
            raise ValueError("power_divergence sampling requires lam")
        model = target
        eid = experiment_id or f"pd:n={model.n}:p1={model.p1!r}:lam={lam!r}"
        cdf = _binomial_cdf_table(model.n, model.p1)
        return _sample_from_cdf_table(cdf, _pd_table(model, lam), N, seed, eid, threads)
    if kind == "w_sum":
        spec: SumSpecification = target
        if spec.d != 1:
            raise ValueError("w_sum sampling covers single-component specifications only")
        eid = experiment_id or f"w-sum:{spec.oracles[0].family}:n={spec.sizes[0]}"
        return _sample_w_component(spec.oracles[0], spec.sizes[0], N, seed, eid, threads)
    raise ValueError(f"unknown statistic kind {kind!r}")


def sample_component_sum(
    spec: SumSpecification, k: int, N: int, seed: int
) -> np.ndarray:
    """Standardized sum samples for component k (used by moment-cap policies)."""
    single = SumSpecification((spec.sizes[k],), (spec.oracles[k],))
    return sample_statistic(
        "w_sum", single, N, seed, experiment_id=f"ew-moment:component-{k}"
    )


# --------------------------------------------------------------------------
# empirical distances against the squared-normal law


def _F1(x: np.ndarray) -> np.ndarray:
    return erf(np.sqrt(0.5 * np.maximum(x, 0.0)))


def _F3(x: np.ndarray) -> np.ndarray:
    return gammainc(1.5, 0.5 * np.maximum(x, 0.0))


def _G(x: np.ndarray) -> np.ndarray:
    """Antiderivative of the CDF: integral of F over [0, x] = x F1(x) - F3(x)."""
    return x * _F1(x) - _F3(x)


def _w1_weighted(values: np.ndarray, cum_probs: np.ndarray) -> float:
    """Exact integral of |F_N - F| for an empirical CDF with steps at `values`."""
    v0 = values[0]
    total = float(_G(np.array([v0]))[0])  # empirical CDF is 0 below the first point
    if len(values) > 1:
        a = values[:-1]
        b = values[1:]
        c = cum_probs[:-1]
        with np.errstate(over="ignore"):
            crossing = 2.0 * erfinv(c) ** 2
        m = np.clip(crossing, a, b)
        ga, gm, gb = _G(a), _G(m), _G(b)
        seg = (c * (m - a) - (gm - ga)) + ((gb - gm) - c * (b - m))
        total += float(seg.sum())
    last = float(values[-1])
    tail = (1.0 - float(_F3(np.array([last]))[0])) - last * (1.0 - float(_F1(np.array([last]))[0]))
    return total + tail


def _bootstrap_se(
    values: np.ndarray,
    counts: np.ndarray,
    statistic,
    seed: RngSeed,
    experiment_id: str,
    n_boot: int,
) -> float:
    if n_boot < 2:
        return 0.0
    N = int(counts.sum())
    probs = counts / N
    rng = seed.generator(experiment_id, 0)
    replicas = np.empty(n_boot)
    for i in range(n_boot):
        resampled = rng.multinomial(N, probs)
        replicas[i] = statistic(values, resampled)
    return float(replicas.std(ddof=1))


def _compress(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ValueError("samples must be a one-dimensional array")
    if np.any(samples < 0):
        raise ValueError("the reference law has no mass below zero; negative samples")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    return np.unique(samples, return_counts=True)


def empirical_wasserstein_chi2_1(
    samples: np.ndarray, *, seed: int = 0, n_boot: int = 200
) -> DistanceEstimate:
    """W1 distance between the empirical law and the squared standard normal.

    Integrates |F_N - F| exactly on each interval between order statistics
    (the CDF crossing point is closed-form) and adds the analytic tail beyond
    the largest sample.  The standard error is a seeded multinomial bootstrap
    over the empirical support.
    """
    values, counts = _compress(samples)
    N = int(counts.sum())
    if N < 100:
        raise ValueError(f"need at least 100 samples for the W1 estimate, got {N}")

    def stat(v: np.ndarray, c: np.ndarray) -> float:
        keep = c > 0
        kept = v[keep]
        cum = np.cumsum(c[keep]) / N
        return _w1_weighted(kept, cum)

    estimate = stat(values, counts)
    se = _bootstrap_se(
        values, counts, stat, RngSeed(seed), "bootstrap:wasserstein", n_boot
    )
    return DistanceEstimate(estimate, se, N, "wasserstein")


def empirical_kolmogorov_chi2_1(
    samples: np.ndarray, *, seed: int = 0, n_boot: int = 200
) -> DistanceEstimate:
    """One-sample KS statistic against the squared standard normal."""
    values, counts = _compress(samples)
    N = int(counts.sum())

    def stat(v: np.ndarray, c: np.ndarray) -> float:
        keep = c > 0
        kept = v[keep]
        cum = np.cumsum(c[keep]) / N
        F = _F1(kept)
        d_plus = float(np.max(cum - F))
        d_minus = float(np.max(F - (cum - c[keep] / N)))
        return max(d_plus, d_minus, 0.0)

    estimate = stat(values, counts)
    se = _bootstrap_se(
        values, counts, stat, RngSeed(seed), "bootstrap:kolmogorov", n_boot
    )
    return DistanceEstimate(estimate, min(se, 1.0), N, "kolmogorov")


def chi2_1_expectation(fn) -> float:
    """E[h(Y)] for Y = Z^2 by quadrature: 2 * integral of h(u^2) phi(u) over u >= 0."""
    integrand = lambda u: 2.0 * fn(u * u) * math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)  # noqa: E731
    try:
        value, err = quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    except (OverflowError, FloatingPointError) as exc:
        raise ValueError("test function is not integrable against the reference law") from exc
    if not math.isfinite(value) or err > 1e-6:
        raise ValueError("test function is not integrable against the reference law")
    return value


def smooth_discrepancy(samples: np.ndarray, h: SmoothFunction) -> DistanceEstimate:
    """|mean h(samples) - E h(Y)| with the reference expectation by quadrature."""
    samples = np.asarray(samples, dtype=float)
    hv = np.asarray(h.fn(samples), dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ValueError("test function produced non-finite values on the samples")
    target = chi2_1_expectation(h.fn)
    mean = float(hv.mean())
    se = float(hv.std(ddof=1) / math.sqrt(len(hv))) if len(hv) > 1 else 0.0
    return DistanceEstimate(abs(mean - target), se, len(hv), "smooth")


def make_smoothing_bump(z: float, alpha: float) -> SmoothFunction:
    """Piecewise-quadratic descent from 1 to 0 over [z, z+alpha]; |h'| = 2/alpha, |h''| = 4/alpha^2."""
    if alpha <= 0:
        raise ValueError(f"smoothing width must be positive, got {alpha}")

    def fn(x):
        x = np.asarray(x, dtype=float)
        mid = 1.0 - 2.0 * (x - z) ** 2 / alpha**2
        down = 2.0 * (x - (z + alpha)) ** 2 / alpha**2
        return np.select(
            [x <= z, x <= z + 0.5 * alpha, x <= z + alpha], [1.0, mid, down], 0.0
        )

    return SmoothFunction(
        fn,
        name=f"bump(z={z},alpha={alpha})",
        derivative_sup_norms=(2.0 / alpha, 4.0 / alpha**2),
    )


SMOOTH_BATTERY: dict[str, SmoothFunction] = {
    "sin": SmoothFunction(np.sin, name="sin", derivative_sup_norms=(1.0, 1.0)),
    "exp-neg": SmoothFunction(
        lambda x: np.exp(-np.asarray(x, dtype=float)),
        name="exp-neg",
        derivative_sup_norms=(1.0, 1.0),
    ),
    "reciprocal": SmoothFunction(
        lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float)),
        name="reciprocal",
        derivative_sup_norms=(1.0, 2.0),
    ),
    "bump-1-1": make_smoothing_bump(1.0, 1.0),
}


# --------------------------------------------------------------------------
# the audit driver


@dataclass(frozen=True)
class AuditExperiment:
    """A grid of (n, p1) models, a metric, and the sampling budget for one audit."""

    kind: str
    metric: str
    grid: tuple[tuple[int, float], ...]
    N: int = 1_000_000
    seed: int = 0
    lambdas: tuple[float, ...] = (1.0,)
    battery: tuple[str, ...] = ("sin", "exp-neg", "reciprocal", "bump-1-1")
    strict: bool = True
    n_boot: int = 200

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "grid", tuple((int(n), float(p)) for n, p in self.grid)
        )
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        object.__setattr__(self, "battery", tuple(self.battery))
        if self.kind not in ("pearson", "power_divergence"):
            raise ValueError(f"kind must be pearson or power_divergence, got {self.kind!r}")
        allowed = ("wasserstein", "kolmogorov", "smooth")
        if self.metric not in allowed:
            raise ValueError(f"metric must be one of {allowed}, got {self.metric!r}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.metric == "smooth":
            unknown = [b for b in self.battery if b not in SMOOTH_BATTERY]
            if unknown:
                raise ValueError(f"unknown battery entries {unknown}")


@dataclass(frozen=True)
class AuditRow:
    params: dict
    bound: float
    estimate: float
    standard_error: float
    margin: float
    passed: bool
    certified: bool


def _bound_for(
    experiment: AuditExperiment, model: MultinomialModel, lam: float | None,
    norms: tuple[float, float] | None,
) -> BoundReport:
    if experiment.kind == "pearson":
        return bound_pearson(experiment.metric, model, norms)
    if experiment.metric == "kolmogorov":
        return kolmogorov_bound_pd(model, lam, AlphaPolicy.optimize())
    return bound_power_divergence(experiment.metric, model, lam, norms)


def audit(experiment: AuditExperiment, *, threads: int | None = None) -> list[AuditRow]:
    """Run the experiment grid; each row passes iff estimate + 5 SE <= bound.

    Deterministic for a fixed master seed: sampling chunks and bootstrap
    streams derive child seeds from the experiment coordinates, so worker
    count cannot change any output.
    """
    rows: list[AuditRow] = []
    master = RngSeed(experiment.seed)
    lam_values: Sequence[float | None] = (
        [None] if experiment.kind == "pearson" else list(experiment.lambdas)
    )
    for n, p1 in experiment.grid:
        model = MultinomialModel(n, p1)
        for lam in lam_values:
            eid = (
                f"audit:{experiment.kind}:{experiment.metric}"
                f":n={n}:p1={p1!r}:lam={lam!r}"
            )
            if experiment.kind == "pearson":
                samples = sample_statistic(
                    "pearson", model, experiment.N, master,
                    experiment_id=eid, threads=threads,
                )
            else:
                samples = sample_statistic(
                    "power_divergence", model, experiment.N, master,
                    lam=lam, experiment_id=eid, threads=threads,
                )
            boot_seed = master.child_seed(eid + ":bootstrap", 0)
            base_params = {"n": n, "p1": p1}
            if lam is not None:
                base_params["lambda"] = lam
            if experiment.metric == "smooth":
                for name in experiment.battery:
                    h = SMOOTH_BATTERY[name]
                    norms = h.derivative_sup_norms[:2]
                    report = _bound_for(experiment, model, lam, norms)
                    _check_certified(report, experiment.strict)
                    est = smooth_discrepancy(samples, h)
                    rows.append(
                        _make_row({**base_params, "h": name}, report, est)
                    )
                continue
            report = _bound_for(experiment, model, lam, None)
            _check_certified(report, experiment.strict)
            if experiment.metric == "wasserstein":
                est = empirical_wasserstein_chi2_1(
                    samples, seed=boot_seed, n_boot=experiment.n_boot
                )
            else:
                est = empirical_kolmogorov_chi2_1(
                    samples, seed=boot_seed, n_boot=experiment.n_boot
                )
            rows.append(_make_row(dict(base_params), report, est))
    return rows


def _check_certified(report: BoundReport, strict: bool) -> None:
    if strict and not report.certified:
        raise ValueError(
            f"audit in strict mode requires a certified bound; {report.provenance} is not"
        )


def _make_row(params: dict, report: BoundReport, est: DistanceEstimate) -> AuditRow:
    margin = report.value - (est.estimate + 5.0 * est.standard_error)
    return AuditRow(
        params=params,
        bound=report.value,
        estimate=est.estimate,
        standard_error=est.standard_error,
        margin=margin,
        passed=margin >= 0.0,
        certified=report.certified,
    )
