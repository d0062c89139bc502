"""Turn validated requests into library calls.  Used by both the HTTP app and the CLI."""
from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..limit_bounds import make_moment_oracle
from ..monte_carlo import AuditExperiment, audit
from ..power_divergence import (
    AlphaPolicy,
    MultinomialModel,
    bound_pearson,
    bound_power_divergence,
    kolmogorov_bound_pd,
    w2_generic_bounds,
)
from ..selfcheck import SUITES, run_suites
from ..stein_solution import (
    CovarianceSpec,
    DominatingPolynomial,
    QuadratureConfig,
    library_function,
    stein_residual,
    verify_derivative_bounds,
)
from .schemas import AuditRequest, BoundRequest, SelfcheckRequest, VerifySolutionRequest

__all__ = [
    "library_envelope",
    "run_audit",
    "run_bound",
    "run_selfcheck",
    "run_verify_solution",
    "selfcheck_suite_names",
]


def run_bound(req: BoundRequest) -> dict:
    if req.kind == "pearson":
        if req.p1 is None:
            raise ValueError("pearson bounds require p1")
        model = MultinomialModel(req.n, req.p1)
        report = bound_pearson(req.metric, model, req.norms)
    elif req.kind == "pd":
        if req.p1 is None or req.lam is None:
            raise ValueError("pd bounds require p1 and lambda")
        model = MultinomialModel(req.n, req.p1)
        if req.metric == "kolmogorov":
            if req.alpha_policy == "fixed":
                if req.alpha is None:
                    raise ValueError("fixed alpha policy requires alpha")
                policy = AlphaPolicy.fixed(req.alpha)
            else:
                policy = AlphaPolicy.optimize()
            report = kolmogorov_bound_pd(model, req.lam, policy)
        else:
            report = bound_power_divergence(req.metric, model, req.lam, req.norms)
    else:  # general
        if req.family is None:
            raise ValueError("general bounds require a summand family")
        if req.metric == "kolmogorov":
            raise ValueError("general bounds cover wasserstein and smooth metrics only")
        kwargs = {"p1": req.p1} if req.family == "bernoulli_standardized" else {}
        oracle = make_moment_oracle(req.family, **kwargs)
        report = w2_generic_bounds(req.metric, oracle, req.n, req.norms)
    out = report.to_dict()
    out["request"] = req.model_dump(by_alias=True)
    return out


def library_envelope(g_name: str, nu: int) -> DominatingPolynomial:
    """A majorant valid for the named inner map at class order nu.

    Each per-derivative envelope a_k + b_k |w|^R is summed so a single
    polynomial dominates |d^k g|^(nu/k) for every relevant k.
    """
    if nu < 1:
        raise ValueError("class order must be >= 1")
    if g_name == "identity":
        return DominatingPolynomial(1.0, 0.0, (1.0,))
    if g_name == "square":
        return DominatingPolynomial(2.0 ** (nu / 2.0), 2.0**nu, (float(nu),))
    if g_name == "quartic":
        a = 12.0 ** (nu / 2.0) + 24.0 ** (nu / 3.0) + 24.0 ** (nu / 4.0)
        b = 4.0**nu + 12.0 ** (nu / 2.0) + 24.0 ** (nu / 3.0)
        return DominatingPolynomial(a, b, (3.0 * nu,))
    if g_name in ("sextic", "sextic-normalized"):
        scale = 1.0 if g_name == "sextic" else 1.0 / 15.0
        derivs = [6.0 * scale, 30.0 * scale, 120.0 * scale, 360.0 * scale, 720.0 * scale]
        a = sum(c ** (nu / (k + 1)) for k, c in enumerate(derivs)) + (720.0 * scale) ** (nu / 6.0)
        b = sum(c ** (nu / (k + 1)) for k, c in enumerate(derivs))
        return DominatingPolynomial(a, b, (5.0 * nu,))
    if g_name == "sum-of-squares":
        return DominatingPolynomial(
            2.0 ** (nu / 2.0), 2.0**nu, (float(nu), float(nu))
        )
    if g_name == "w":  # alias kept for configs that name the identity differently
        return DominatingPolynomial(1.0, 0.0, (1.0,))
    raise ValueError(f"no registered envelope for inner map {g_name!r}")


def run_verify_solution(req: VerifySolutionRequest, registry=None) -> dict:
    get = registry.__getitem__ if registry is not None else library_function
    try:
        g = get(req.g)
        h = get(req.h)
    except KeyError as exc:
        raise ValueError(f"unknown library function: {exc}") from exc
    cfg = QuadratureConfig(
        gauss_hermite_nodes=req.gauss_hermite_nodes,
        t_panels=req.t_panels,
        tolerance=req.tolerance,
    )
    if req.sigma_diag is not None:
        sigma = CovarianceSpec.diagonal(req.sigma_diag)
    else:
        sigma = CovarianceSpec.identity(g.dim)
    if sigma.dim != g.dim:
        raise ValueError(f"covariance dimension {sigma.dim} does not match {req.g} ({g.dim})")
    grid_axis = np.linspace(req.grid_lo, req.grid_hi, req.grid_points)
    if g.dim == 1:
        grid = grid_axis
    else:
        mesh = np.meshgrid(*([grid_axis] * g.dim))
        grid = np.stack([m.ravel() for m in mesh], axis=-1)
    residual = stein_residual(h, g, sigma, grid, cfg)
    residual_pass = residual <= 10.0 * cfg.tolerance
    orders = sorted(set(req.orders))
    envelope = library_envelope(req.g, max(orders))
    dominance = verify_derivative_bounds(
        h, g, envelope, sigma, orders, grid, cfg, variant="i", target="f"
    )
    slack = 1.0 + 100.0 * cfg.tolerance
    order_rows = []
    for order in orders:
        worst = float(np.max(dominance.ratios[order]))
        order_rows.append(
            {"order": order, "max_ratio": worst, "passed": bool(worst <= slack)}
        )
    return {
        "g": req.g,
        "h": req.h,
        "residual": residual,
        "residual_tolerance": 10.0 * cfg.tolerance,
        "residual_pass": bool(residual_pass),
        "orders": order_rows,
        "dominance_max_ratio": dominance.max_ratio,
        "passed": bool(residual_pass and dominance.passed),
    }


def run_audit(req: AuditRequest, threads: int | None = None) -> dict:
    experiment = AuditExperiment(
        kind=req.kind,
        metric=req.metric,
        grid=tuple((n, p) for n, p in req.grid),
        N=req.N,
        seed=req.seed,
        lambdas=tuple(req.lambdas),
        battery=tuple(req.battery),
        strict=req.strict,
        n_boot=req.n_boot,
    )
    rows = audit(experiment, threads=threads)
    return {
        "rows": [asdict(row) for row in rows],
        "passed": all(row.passed for row in rows),
    }


def selfcheck_suite_names() -> list[str]:
    return list(SUITES)


def run_selfcheck(req: SelfcheckRequest) -> dict:
    results = run_suites(req.suites, seed=req.seed, cases=req.cases)
    return {
        "results": {name: {"passed": ok, "detail": detail} for name, (ok, detail) in results.items()},
        "passed": all(ok for ok, _ in results.values()),
    }
