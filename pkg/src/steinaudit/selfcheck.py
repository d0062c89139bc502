"""Self-check suites: randomized inequality batteries and exact constant reproductions.

Each suite is a callable taking a seed and a case count, returning (passed,
detail).  The registry order is the order the CLI runs and prints them in.
"""
from __future__ import annotations

import math

import numpy as np

from .limit_bounds import EWMomentPolicy, SumSpecification, make_moment_oracle, thm32_bound
from .reports import TestFunctionNorms
from .special_functions import (
    gamma_fn,
    gamma_half_ratio,
    ij_constants,
    t_r,
    upper_incomplete_gamma,
)
from .stein_solution import DominatingPolynomial

__all__ = ["SUITES", "run_suites"]

_SLACK = 1.0 + 1e-9


def _suite_lemma_axby(seed: int, cases: int) -> tuple[bool, str]:
    """(ax+by)^r <= (a+b)^r (x^r + y^r), and the three-term analogue."""
    rng = np.random.default_rng(seed)
    a, b, c = (rng.uniform(0.0, 5.0, cases) for _ in range(3))
    x, y, z = (rng.uniform(0.0, 8.0, cases) for _ in range(3))
    r = rng.uniform(0.0, 6.0, cases)
    lhs2 = (a * x + b * y) ** r
    rhs2 = (a + b) ** r * (x**r + y**r)
    bad2 = int(np.sum(lhs2 > rhs2 * _SLACK))
    lhs3 = (a * x + b * y + c * z) ** r
    rhs3 = (a + b + c) ** r * (x**r + y**r + z**r)
    bad3 = int(np.sum(lhs3 > rhs3 * _SLACK))
    ok = bad2 == 0 and bad3 == 0
    return ok, f"{cases} cases, two-term violations {bad2}, three-term violations {bad3}"


def _suite_t_r_bounds(seed: int, cases: int) -> tuple[bool, str]:
    """Tail-weight transform: t_r(r, w) <= w^r for r <= 1; <= 2 w^r for r > 1, w > r-1."""
    rng = np.random.default_rng(seed)
    bad = 0
    checked = 0
    for _ in range(cases):
        if rng.random() < 0.5:
            r = rng.uniform(0.0, 1.0)
            w = rng.uniform(1e-3, 30.0)
            cap = w**r
        else:
            r = rng.uniform(1.0, 6.0)
            w = rng.uniform(max(r - 1.0, 1e-3) + 1e-6, 35.0)
            cap = 2.0 * w**r
        if rng.random() < 0.01:
            w = rng.uniform(35.0, 60.0)  # exercise the large-argument branch
            cap = w**r if r <= 1.0 else 2.0 * w**r
        checked += 1
        if t_r(r, w) > cap * _SLACK:
            bad += 1
    return bad == 0, f"{checked} cases, violations {bad}"


def _suite_incgamma(seed: int, cases: int) -> tuple[bool, str]:
    """Upper incomplete gamma against its integrand-monotonicity envelopes."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        if rng.random() < 0.5:
            a = rng.uniform(1e-3, 1.0)
            x = rng.uniform(1e-3, 40.0)
            cap = x ** (a - 1.0) * math.exp(-x)
        else:
            a = rng.uniform(1.0, 6.0)
            x = rng.uniform(2.0 * (a - 1.0) + 1e-6, 2.0 * (a - 1.0) + 40.0)
            cap = 2.0 * x ** (a - 1.0) * math.exp(-x)
        if upper_incomplete_gamma(a, x) > cap * _SLACK:
            bad += 1
    return bad == 0, f"{cases} cases, violations {bad}"


def _suite_ij_caps(seed: int, cases: int) -> tuple[bool, str]:
    """One-axis kinds capped by 2^(r/2); two-axis kinds by 3^(r/2)."""
    rng = np.random.default_rng(seed)
    kinds = ("I_nr", "J_nr", "I_mnr", "J_mnr")
    per_kind = max(1, cases // len(kinds))
    bad = 0
    total = 0
    for kind in kinds:
        two_dim = kind in ("I_mnr", "J_mnr")
        for _ in range(per_kind):
            n = int(rng.integers(1, 9))
            r = float(rng.uniform(0.0, 6.0))
            m = int(rng.integers(1, 7)) if two_dim else None
            cap = (3.0 if two_dim else 2.0) ** (r / 2.0)
            total += 1
            if ij_constants(kind, n, r, m) > cap * _SLACK:
                bad += 1
    return bad == 0, f"{total} cases, violations {bad}"


def _suite_gamma_ratio(seed: int, cases: int) -> tuple[bool, str]:
    """sqrt(2/n) < Gamma(n/2)/Gamma((n+1)/2) < sqrt(2/(n - 1/2))."""
    rng = np.random.default_rng(seed)
    n = rng.uniform(0.51, 400.0, cases)
    ratio = np.array([gamma_half_ratio(v) for v in n])
    low = np.sqrt(2.0 / n)
    high = np.sqrt(2.0 / (n - 0.5))
    bad = int(np.sum((ratio <= low) | (ratio >= high)))
    return bad == 0, f"{cases} cases, violations {bad}"


def _rademacher_pair_spec() -> SumSpecification:
    return SumSpecification([100], [make_moment_oracle("rademacher")])


def _suite_constants_24_17(seed: int, cases: int) -> tuple[bool, str]:
    """Squared-sum Wasserstein constants: coefficients (12 sqrt 2 + 12/sqrt pi, 12 sqrt 2)."""
    report = thm32_bound(
        "ii",
        _rademacher_pair_spec(),
        DominatingPolynomial(0.0, 2.0, (1.0,)),
        TestFunctionNorms((1.0,)),
        2,
        EWMomentPolicy.holder_cap(),
    )
    k1 = report.term("abs-moment-p-plus-1").detail["coefficient"]
    k2 = report.term("abs-moment-r-plus-p-plus-1").detail["coefficient"]
    want1 = 12.0 * math.sqrt(2.0) + 12.0 / math.sqrt(math.pi)
    want2 = 12.0 * math.sqrt(2.0)
    ok = (
        abs(k1 - want1) <= 1e-9
        and abs(k2 - want2) <= 1e-9
        and math.ceil(k1) == 24
        and math.ceil(k2) == 17
    )
    return ok, f"coefficients ({k1:.12f}, {k2:.12f}), ceilings ({math.ceil(k1)}, {math.ceil(k2)})"


def _suite_constants_187(seed: int, cases: int) -> tuple[bool, str]:
    """Squared-sum smooth-metric constants: (187, 131, 704, 468) within one unit."""
    report = thm32_bound(
        "iv",
        _rademacher_pair_spec(),
        DominatingPolynomial(2.0, 4.0, (2.0,)),
        TestFunctionNorms((1.0, 1.0)),
        2,
        EWMomentPolicy.holder_cap(),
        g_even_asserted=True,
    )
    labels = (
        "abs-moment-p-plus-2",
        "abs-moment-r-plus-p-plus-2",
        "odd-times-abs-3",
        "odd-times-abs-r-plus-3",
    )
    got = [report.term(lbl).detail["coefficient_per_hweight"] for lbl in labels]
    want_exact = (
        7.0 / 6.0 * (122.0 + 48.0 * math.sqrt(2.0 / math.pi)),
        392.0 / 3.0,
        0.75 * (652.0 + 360.0 * math.sqrt(2.0 / math.pi)),
        468.0,
    )
    printed = (187, 131, 704, 468)
    ok = all(abs(g - w) <= 1e-9 for g, w in zip(got, want_exact)) and all(
        abs(g - p) <= 1.0 for g, p in zip(got, printed)
    )
    detail = ", ".join(f"{g:.4f}" for g in got)
    return ok, f"per-weight coefficients ({detail}) vs printed {printed}"


SUITES = {
    "lemma-axby": _suite_lemma_axby,
    "t-r-bounds": _suite_t_r_bounds,
    "incgamma": _suite_incgamma,
    "ij-caps": _suite_ij_caps,
    "gamma-ratio": _suite_gamma_ratio,
    "constants-24-17": _suite_constants_24_17,
    "constants-187-131-704-468": _suite_constants_187,
}


def run_suites(
    names: list[str] | None = None, *, seed: int = 0, cases: int = 10_000
) -> dict[str, tuple[bool, str]]:
    chosen = list(SUITES) if not names else names
    results: dict[str, tuple[bool, str]] = {}
    for name in chosen:
        if name not in SUITES:
            raise ValueError(f"unknown self-check suite {name!r}")
        results[name] = SUITES[name](seed, cases)
    return results
