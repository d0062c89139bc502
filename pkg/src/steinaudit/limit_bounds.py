"""Distance bounds between smooth statistics of standardized sums and their Gaussian limit.

The central objects are a :class:`SumSpecification` (component sizes plus one
moment oracle per component, i.i.d. within a component) and the four-part bound
evaluator :func:`thm32_bound`, which reproduces the displayed right-hand sides
exactly, term by term.  :func:`cor33_bound` evaluates the simplified
order-of-magnitude forms with a caller-supplied constant (flagged
non-certified).  Everything the formulas need about the summand law flows
through :class:`MomentOracle`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .reports import Assumption, BoundReport, BoundTerm, TestFunctionNorms
from .special_functions import (
    abc_coeffs,
    c_const,
    gamma_fn,
    mu_abs_moment,
)

__all__ = [
    "EWBound",
    "EWMomentPolicy",
    "MomentOracle",
    "SumSpecification",
    "cor33_bound",
    "ew_moment_upper",
    "make_moment_oracle",
    "thm32_bound",
]


def _require(condition: bool, clause: str) -> None:
    if not condition:
        raise ValueError(f"precondition failed: {clause}")


def _double_factorial_odd(k: int) -> int:
    """(k-1)!! for even k: the standard normal k-th moment."""
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


@dataclass(frozen=True)
class MomentOracle:
    """Absolute and signed moments of one standardized summand law.

    ``matching_order`` is the largest p such that the signed moments equal the
    standard-normal moments for every k <= p.  ``exact_fractional`` is False
    when non-integer absolute moments are interpolated rather than computed in
    closed form (table family), in which case bounds consuming them are
    reported as non-certified.
    """

    family: str
    abs_moment_fn: Callable[[float], float]
    signed_moment_fn: Callable[[int], float]
    matching_order: int
    exact_fractional: bool = True
    params: tuple[tuple[str, float], ...] = ()

    def param(self, name: str) -> float:
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(f"{self.family} oracle has no parameter {name!r}")

    def abs_moment(self, s: float) -> float:
        if s < 0:
            raise ValueError(f"absolute moment order must be nonnegative, got {s}")
        return float(self.abs_moment_fn(float(s)))

    def signed_moment(self, k: int) -> float:
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError(f"signed moment order must be a positive integer, got {k}")
        return float(self.signed_moment_fn(int(k)))

    def abs_moment_is_exact(self, s: float) -> bool:
        return self.exact_fractional or float(s).is_integer()

    def validate(self, max_order: int = 8, samples: int = 25) -> None:
        """Standardization, Gaussian matching, and Lyapunov monotonicity checks."""
        _require(abs(self.signed_moment(1)) < 1e-12, "standardized law has mean zero")
        _require(abs(self.signed_moment(2) - 1.0) < 1e-12, "standardized law has unit variance")
        for k in range(1, self.matching_order + 1):
            target = 0.0 if k % 2 else float(_double_factorial_odd(k))
            _require(
                abs(self.signed_moment(k) - target) < 1e-10,
                f"signed moment of order {k} must match the Gaussian value {target} "
                f"(matching order {self.matching_order})",
            )
        grid = np.linspace(2.0, float(max_order), samples)
        previous: float | None = None
        for s in grid:
            try:
                val = self.abs_moment(float(s))
            except ValueError:
                continue  # sparse table: skip orders it cannot produce
            if previous is not None:
                _require(
                    val >= previous - 1e-10,
                    "absolute moments must be nondecreasing above order 2",
                )
            previous = val
        for k in range(1, max_order + 1):
            try:
                signed = self.signed_moment(k)
                absolute = self.abs_moment(k)
            except ValueError:
                continue
            _require(
                abs(signed) <= absolute + 1e-10,
                f"|signed moment| exceeds absolute moment at order {k}",
            )


def make_moment_oracle(
    family: str,
    *,
    p1: float | None = None,
    abs_moments: Mapping[int, float] | None = None,
    signed_moments: Mapping[int, float] | None = None,
    matching_order: int | None = None,
) -> MomentOracle:
    """Build a moment oracle for a named summand family.

    ``bernoulli_standardized`` is the centered/scaled indicator (two-point law
    at -sqrt(p1/p2) and sqrt(p2/p1)); ``rademacher`` is the symmetric sign;
    ``uniform_standardized`` is uniform on [-sqrt(3), sqrt(3)]; ``table`` takes
    user-supplied integer-order moments and log-interpolates fractional
    absolute orders (flagged non-exact).
    """
    if family == "bernoulli_standardized":
        if p1 is None or not (0.0 < p1 < 1.0):
            raise ValueError(f"bernoulli_standardized requires 0 < p1 < 1, got {p1}")
        p2 = 1.0 - p1
        scale = math.sqrt(p1 * p2)

        def abs_m(s: float) -> float:
            return (p1 * p2**s + p2 * p1**s) / scale**s

        def signed_m(k: int) -> float:
            return (p1 * p2**k + p2 * (-p1) ** k) / scale**k

        matching = 3 if abs(p1 - 0.5) < 1e-15 else 2
        oracle = MomentOracle(
            "bernoulli_standardized", abs_m, signed_m, matching, params=(("p1", float(p1)),)
        )
    elif family == "rademacher":
        oracle = MomentOracle(
            "rademacher",
            lambda s: 1.0,
            lambda k: 0.0 if k % 2 else 1.0,
            matching_order=3,
        )
    elif family == "uniform_standardized":
        oracle = MomentOracle(
            "uniform_standardized",
            lambda s: 3.0 ** (s / 2.0) / (s + 1.0),
            lambda k: 0.0 if k % 2 else 3.0 ** (k / 2.0) / (k + 1.0),
            matching_order=3,
        )
    elif family == "table":
        if not abs_moments or not signed_moments:
            raise ValueError("table family requires abs_moments and signed_moments")
        abs_tab = {int(k): float(v) for k, v in abs_moments.items()}
        signed_tab = {int(k): float(v) for k, v in signed_moments.items()}
        _require(2 in abs_tab, "table must include the absolute moment of order 2")
        _require(
            1 in signed_tab and 2 in signed_tab,
            "table must include signed moments of orders 1 and 2",
        )
        if matching_order is None:
            raise ValueError("table family requires an explicit matching_order")

        def abs_m(s: float) -> float:
            if float(s).is_integer():
                k = int(round(s))
                if k == 0:
                    return 1.0
                if k not in abs_tab:
                    raise ValueError(f"table oracle has no absolute moment of order {k}")
                return abs_tab[k]
            lo = math.floor(s)
            hi = math.ceil(s)
            if lo == 0:
                lo_val = 1.0
            elif lo in abs_tab:
                lo_val = abs_tab[lo]
            else:
                raise ValueError(f"table oracle cannot interpolate order {s}: missing {lo}")
            if hi not in abs_tab:
                raise ValueError(f"table oracle cannot interpolate order {s}: missing {hi}")
            frac = s - lo
            return math.exp((1.0 - frac) * math.log(lo_val) + frac * math.log(abs_tab[hi]))

        def signed_m(k: int) -> float:
            if k not in signed_tab:
                raise ValueError(f"table oracle has no signed moment of order {k}")
            return signed_tab[k]

        oracle = MomentOracle("table", abs_m, signed_m, int(matching_order), exact_fractional=False)
    else:
        raise ValueError(f"unknown moment family {family!r}")
    oracle.validate(max_order=max(2, *(k for k in _probeable_orders(oracle))))
    return oracle


def _probeable_orders(oracle: MomentOracle) -> list[int]:
    """Integer orders safe to probe during validation (all of 1..8 for closed forms)."""
    if oracle.family != "table":
        return list(range(1, 9))
    orders = []
    for k in range(1, 9):
        try:
            oracle.abs_moment(k)
            oracle.signed_moment(k)
        except ValueError:
            continue
        orders.append(k)
    return orders or [2]


@dataclass(frozen=True)
class SumSpecification:
    """Sizes and summand laws of the component sums being compared to the Gaussian."""

    sizes: tuple[int, ...]
    oracles: tuple[MomentOracle, ...]

    def __init__(self, sizes: Sequence[int], oracles: Sequence[MomentOracle]):
        sizes_t = tuple(int(n) for n in sizes)
        oracles_t = tuple(oracles)
        if not sizes_t:
            raise ValueError("at least one component is required")
        if any(n < 1 for n in sizes_t):
            raise ValueError("component sizes must be >= 1")
        if len(sizes_t) != len(oracles_t):
            raise ValueError("sizes and oracles must have equal length")
        object.__setattr__(self, "sizes", sizes_t)
        object.__setattr__(self, "oracles", oracles_t)

    @property
    def d(self) -> int:
        return len(self.sizes)


@dataclass(frozen=True)
class EWMomentPolicy:
    """How E|W_k|^r is upper-bounded inside the distance formulas.

    holder_cap: 1 for r <= 2 (power-mean from unit variance), errors above 2.
    even_moment_interpolation: exact even moments of the standardized sum up to
      order 8, then the power-mean cap for fractional r.
    monte_carlo_ci: empirical mean + 5 sigma of the mean (non-certified).
    fixed_cap: caller-asserted caps per exponent (certified, but recorded as an
      asserted assumption).
    """

    kind: str
    mc_samples: int = 200_000
    mc_seed: int = 12345
    fixed_caps: tuple[tuple[float, float], ...] = ()

    _KINDS = ("holder_cap", "even_moment_interpolation", "monte_carlo_ci", "fixed_cap")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"policy kind must be one of {self._KINDS}, got {self.kind!r}")

    @classmethod
    def holder_cap(cls) -> "EWMomentPolicy":
        return cls("holder_cap")

    @classmethod
    def even_moment_interpolation(cls) -> "EWMomentPolicy":
        return cls("even_moment_interpolation")

    @classmethod
    def monte_carlo_ci(cls, samples: int = 200_000, seed: int = 12345) -> "EWMomentPolicy":
        return cls("monte_carlo_ci", mc_samples=samples, mc_seed=seed)

    @classmethod
    def fixed_cap(cls, caps: Mapping[float, float]) -> "EWMomentPolicy":
        return cls("fixed_cap", fixed_caps=tuple(sorted((float(r), float(v)) for r, v in caps.items())))


@dataclass(frozen=True)
class EWBound:
    value: float
    certified: bool
    description: str


def _exact_even_sum_moment(oracle: MomentOracle, n: int, two_m: int) -> float:
    """Exact E[W^{2m}] for W = n^{-1/2} (X_1 + ... + X_n), i.i.d. standardized X."""
    if two_m == 2:
        return 1.0
    m3 = oracle.signed_moment(3)
    m4 = oracle.signed_moment(4)
    if two_m == 4:
        return 3.0 * (n - 1) / n + m4 / n
    m5 = oracle.signed_moment(5)
    m6 = oracle.signed_moment(6)
    if two_m == 6:
        return (
            n * m6 + 15.0 * n * (n - 1) * m4 + 10.0 * n * (n - 1) * m3**2
            + 15.0 * n * (n - 1) * (n - 2)
        ) / n**3
    m8 = oracle.signed_moment(8)
    if two_m == 8:
        return (
            n * m8
            + 28.0 * n * (n - 1) * m6
            + 56.0 * n * (n - 1) * m5 * m3
            + 35.0 * n * (n - 1) * m4**2
            + 210.0 * n * (n - 1) * (n - 2) * m4
            + 280.0 * n * (n - 1) * (n - 2) * m3**2
            + 105.0 * n * (n - 1) * (n - 2) * (n - 3)
        ) / n**4
    raise ValueError(f"even moment of order {two_m} is not supported")


def ew_moment_upper(
    spec: SumSpecification, k: int, r: float, policy: EWMomentPolicy
) -> EWBound:
    """Certified upper bound on E|W_k|^r under the chosen policy."""
    if not (0 <= k < spec.d):
        raise ValueError(f"component index {k} out of range for d={spec.d}")
    if r < 0:
        raise ValueError(f"moment exponent must be nonnegative, got {r}")
    if r == 0:
        return EWBound(1.0, True, "trivial: zeroth moment")
    if policy.kind == "holder_cap":
        if r > 2.0:
            raise ValueError("holder_cap policy supports exponents r <= 2 only")
        return EWBound(1.0, True, "power-mean cap from unit variance (r <= 2)")
    if policy.kind == "even_moment_interpolation":
        if r > 8.0:
            raise ValueError("even_moment_interpolation supports exponents r <= 8 only")
        two_m = int(2 * math.ceil(r / 2.0))
        exact = _exact_even_sum_moment(spec.oracles[k], spec.sizes[k], two_m)
        return EWBound(
            exact ** (r / two_m),
            True,
            f"power-mean of the exact even moment of order {two_m}",
        )
    if policy.kind == "fixed_cap":
        for rr, cap in policy.fixed_caps:
            if abs(rr - r) < 1e-12:
                return EWBound(cap, True, f"caller-asserted cap {cap} for exponent {r}")
        raise ValueError(f"fixed_cap policy has no cap for exponent {r}")
    # monte_carlo_ci
    from .monte_carlo import sample_component_sum  # local import to avoid a cycle

    draws = sample_component_sum(spec, k, policy.mc_samples, policy.mc_seed)
    powered = np.abs(draws) ** r
    mean = float(powered.mean())
    sigma_of_mean = float(powered.std(ddof=1) / math.sqrt(len(powered)))
    return EWBound(
        mean + 5.0 * sigma_of_mean,
        False,
        f"empirical mean + 5 sigma from {policy.mc_samples} draws (not a proof)",
    )


# --------------------------------------------------------------------------
# the four-part distance bound


def _probe_moment(oracle: MomentOracle, s: float, clause: str) -> float:
    value = oracle.abs_moment(s)
    if not math.isfinite(value):
        raise ValueError(f"precondition failed: {clause} (moment of order {s} is not finite)")
    return value


def _cross_abs_moment(
    spec: SumSpecification, j: int, k: int, base: float, r: float
) -> float:
    """E|X_j^base * X_k^r| for one summand pairing: factorizes across components."""
    if j == k:
        return spec.oracles[j].abs_moment(base + r)
    return spec.oracles[j].abs_moment(base) * spec.oracles[k].abs_moment(r)


def _moment_exactness(spec: SumSpecification, orders: Sequence[tuple[int, float]]) -> bool:
    return all(spec.oracles[j].abs_moment_is_exact(s) for j, s in orders)


def thm32_bound(
    part: str,
    spec: SumSpecification,
    P,
    norms: TestFunctionNorms,
    p: int,
    ew_policy: EWMomentPolicy,
    *,
    g_even_asserted: bool = False,
) -> BoundReport:
    """Evaluate one part of the four-part distance bound, exactly as displayed.

    ``p`` is the Gaussian moment-matching order of the summands, checked
    against each oracle.  Cross absolute moments factorize across distinct
    components (independence); within a component they merge into a single
    higher-order moment.  ``E|W_k|^{r_k}`` enters through ``ew_policy``.
    Parts "iii"/"iv" additionally require p even and the caller's assertion
    that the statistic's inner map is even (``g_even_asserted=True``).
    """
    from .stein_solution import DominatingPolynomial  # typing-level import

    if part not in ("i", "ii", "iii", "iv"):
        raise ValueError(f"part must be i/ii/iii/iv, got {part!r}")
    if not isinstance(P, DominatingPolynomial):
        raise ValueError("P must be a DominatingPolynomial")
    _require(P.dim == spec.d, "envelope dimension matches the number of components")
    _require(p >= 1, "matching order p must be >= 1")
    for j, oracle in enumerate(spec.oracles):
        _require(
            oracle.matching_order >= p,
            f"component {j} must match Gaussian moments to order p={p} "
            f"(oracle matches to {oracle.matching_order})",
        )
    d = spec.d
    assumptions = [
        Assumption(f"summand moments match the Gaussian to order {p}", "checked"),
    ]
    certified = True
    if part in ("ii", "iv"):
        _require(d == 1, f"part ({part}) requires a single component")
    if part in ("iii", "iv"):
        _require(p % 2 == 0, f"part ({part}) requires even matching order p")
        _require(
            g_even_asserted,
            f"part ({part}) requires the caller to assert the statistic's inner map is even",
        )
        assumptions.append(Assumption("inner map of the statistic is even", "asserted"))

    ew_cache: dict[tuple[int, float], EWBound] = {}

    def ew(k: int, r: float) -> EWBound:
        key = (k, r)
        if key not in ew_cache:
            ew_cache[key] = ew_moment_upper(spec, k, r, ew_policy)
        return ew_cache[key]

    terms: list[BoundTerm] = []
    used_orders: list[tuple[int, float]] = []

    if part == "i":
        hp = norms.stirling_weight(p)
        pref = (
            (p + 1)
            * math.sqrt(math.pi)
            * gamma_fn((p + 1) / 2.0)
            / (2.0 * math.factorial(p) * gamma_fn(p / 2.0 + 1.0))
            * hp
        )
        for j in range(d):
            n_j = spec.sizes[j]
            m_p1 = _probe_moment(
                spec.oracles[j], p + 1, f"component {j} needs a finite moment of order {p + 1}"
            )
            used_orders.append((j, p + 1.0))
            bracket = P.A * m_p1
            detail: dict[str, float] = {"base_moment": m_p1}
            for k in range(d):
                r_k = P.exponents[k]
                ew_k = ew(k, r_k)
                certified &= ew_k.certified
                cross = _cross_abs_moment(spec, j, k, p + 1.0, r_k)
                used_orders.append((j, p + 1.0 + r_k) if j == k else (k, float(r_k)))
                piece = 2.0 ** (r_k / 2.0) * (
                    c_const(r_k) * m_p1 * ew_k.value
                    + c_const(r_k) / spec.sizes[k] ** (r_k / 2.0) * cross
                    + mu_abs_moment(r_k + 1.0) * m_p1
                )
                bracket += P.B * piece
                detail[f"cross_with_{k}"] = cross
            value_j = pref * n_j ** (-(p - 1) / 2.0) * bracket
            terms.append(BoundTerm(f"component-{j}", value_j, detail))
        value = sum(t.value for t in terms)
        provenance = "sum-distance-bound/part-i"

    elif part == "ii":
        _require(p >= 2, "part (ii) requires matching order p >= 2 (weight of order p-1)")
        hp = norms.stirling_weight(p - 1)
        n = spec.sizes[0]
        oracle = spec.oracles[0]
        r = P.exponents[0]
        coeffs = abc_coeffs(r, "plain")
        m_p1 = _probe_moment(oracle, p + 1, f"finite moment of order {p + 1}")
        m_rp1 = _probe_moment(oracle, r + p + 1, f"finite moment of order {r + p + 1}")
        used_orders += [(0, p + 1.0), (0, r + p + 1.0)]
        ew_0 = ew(0, r)
        certified &= ew_0.certified
        base = (p + 1) / math.factorial(p) * hp
        kappa1 = base * (
            coeffs.alpha * P.A
            + 2.0 ** (r / 2.0) * P.B * (c_const(r) * coeffs.beta * ew_0.value + coeffs.gamma)
        )
        kappa2 = base * 2.0 ** (r / 2.0) * P.B * c_const(r) * coeffs.beta
        n_pow1 = -(p - 1) / 2.0
        n_pow2 = -(p - 1) / 2.0 - r / 2.0
        terms.append(
            BoundTerm(
                "abs-moment-p-plus-1",
                kappa1 * n**n_pow1 * m_p1,
                {
                    "coefficient": kappa1,
                    "coefficient_per_hweight": kappa1 / hp if hp > 0 else math.inf,
                    "n_power": n_pow1,
                    "moment_order": p + 1.0,
                    "moment": m_p1,
                },
            )
        )
        terms.append(
            BoundTerm(
                "abs-moment-r-plus-p-plus-1",
                kappa2 * n**n_pow2 * m_rp1,
                {
                    "coefficient": kappa2,
                    "coefficient_per_hweight": kappa2 / hp if hp > 0 else math.inf,
                    "n_power": n_pow2,
                    "moment_order": r + p + 1.0,
                    "moment": m_rp1,
                },
            )
        )
        value = sum(t.value for t in terms)
        provenance = "sum-distance-bound/part-ii"

    elif part == "iii":
        hp = norms.stirling_weight(p + 2)
        scale = hp / math.factorial(p)
        direct_coeff = (2.0 * p + 3.0) / ((p + 1.0) * (p + 2.0))
        for j in range(d):
            n_j = spec.sizes[j]
            m_p2 = _probe_moment(
                spec.oracles[j], p + 2, f"component {j} needs a finite moment of order {p + 2}"
            )
            used_orders.append((j, p + 2.0))
            bracket = P.A * m_p2
            for k in range(d):
                r_k = P.exponents[k]
                ew_k = ew(k, r_k)
                certified &= ew_k.certified
                cross = _cross_abs_moment(spec, j, k, p + 2.0, r_k)
                piece = 2.0 ** (r_k / 2.0) * (
                    c_const(r_k) * m_p2 * ew_k.value
                    + c_const(r_k) / spec.sizes[k] ** (r_k / 2.0) * cross
                    + mu_abs_moment(r_k) * m_p2
                )
                bracket += P.B * piece
            terms.append(
                BoundTerm(
                    f"even-direct/component-{j}",
                    scale * direct_coeff * n_j ** (-p / 2.0) * bracket,
                    {"moment_order": p + 2.0},
                )
            )
        odd_pref = (
            3.0
            * math.pi
            * gamma_fn(p / 2.0 + 2.0)
            / (8.0 * math.sqrt(2.0) * gamma_fn((p + 5.0) / 2.0))
        )
        t1 = 0.0
        for j in range(d):
            m_signed = spec.oracles[j].signed_moment(p + 1)
            t1 += abs(m_signed) * spec.sizes[j] ** (-(p - 1) / 2.0)
        t2 = 0.0
        for k in range(d):
            m3_k = _probe_moment(
                spec.oracles[k], 3, f"component {k} needs a finite moment of order 3"
            )
            inner = P.A * m3_k
            for t_idx in range(d):
                r_t = P.exponents[t_idx]
                ew_t = ew(t_idx, r_t)
                certified &= ew_t.certified
                cross = _cross_abs_moment(spec, k, t_idx, 3.0, r_t)
                inner += P.B * 3.0 ** (r_t / 2.0) * (
                    c_const(r_t) * m3_k * ew_t.value
                    + c_const(r_t) / spec.sizes[t_idx] ** (r_t / 2.0) * cross
                    + 2.0 * mu_abs_moment(r_t + 1.0) * m3_k
                )
            t2 += spec.sizes[k] ** (-0.5) * inner
        terms.append(
            BoundTerm(
                "odd-correction",
                scale * odd_pref * t1 * t2,
                {"signed_moment_factor": t1, "third_moment_factor": t2, "prefactor": odd_pref},
            )
        )
        value = sum(t.value for t in terms)
        provenance = "sum-distance-bound/part-iii"

    else:  # part == "iv"
        hp = norms.stirling_weight(p)
        n = spec.sizes[0]
        oracle = spec.oracles[0]
        r = P.exponents[0]
        plain = abc_coeffs(r, "plain")
        tilde = abc_coeffs(r, "tilde")
        m_p2 = _probe_moment(oracle, p + 2, f"finite moment of order {p + 2}")
        m_rp2 = _probe_moment(oracle, r + p + 2, f"finite moment of order {r + p + 2}")
        m_3 = _probe_moment(oracle, 3, "finite moment of order 3")
        m_r3 = _probe_moment(oracle, r + 3, f"finite moment of order {r + 3}")
        m_signed = abs(oracle.signed_moment(p + 1))
        used_orders += [(0, p + 2.0), (0, r + p + 2.0), (0, 3.0), (0, r + 3.0)]
        ew_0 = ew(0, r)
        certified &= ew_0.certified
        base = hp / math.factorial(p)
        even_coeff = (2.0 * p + 3.0) / (p + 1.0)
        kappa1 = base * even_coeff * (
            plain.alpha * P.A
            + 2.0 ** (r / 2.0) * P.B * (c_const(r) * plain.beta * ew_0.value + plain.gamma)
        )
        kappa2 = base * even_coeff * 2.0 ** (r / 2.0) * P.B * c_const(r) * plain.beta
        kappa3 = base * 1.5 * (
            tilde.alpha * P.A
            + 3.0 ** (r / 2.0) * P.B * (c_const(r) * tilde.beta * ew_0.value + tilde.gamma)
        )
        kappa4 = base * 1.5 * 3.0 ** (r / 2.0) * P.B * c_const(r) * tilde.beta
        rows = [
            ("abs-moment-p-plus-2", kappa1, -p / 2.0, m_p2, p + 2.0, 1.0),
            ("abs-moment-r-plus-p-plus-2", kappa2, -p / 2.0 - r / 2.0, m_rp2, r + p + 2.0, 1.0),
            ("odd-times-abs-3", kappa3, -p / 2.0 - 1.0, m_3, 3.0, m_signed),
            ("odd-times-abs-r-plus-3", kappa4, -p / 2.0 - 1.0 - r / 2.0, m_r3, r + 3.0, m_signed),
        ]
        for label, kappa, n_pow, moment, order, extra in rows:
            terms.append(
                BoundTerm(
                    label,
                    kappa * n**n_pow * moment * extra,
                    {
                        "coefficient": kappa,
                        "coefficient_per_hweight": kappa / hp if hp > 0 else math.inf,
                        "n_power": n_pow,
                        "moment_order": order,
                        "moment": moment,
                        "signed_factor": extra,
                    },
                )
            )
        value = sum(t.value for t in terms)
        provenance = "sum-distance-bound/part-iv"

    certified &= _moment_exactness(spec, used_orders)
    if not certified:
        assumptions.append(
            Assumption("a non-certified moment estimate entered this value", "asserted")
        )
    for (k, r_used), bound in ew_cache.items():
        status = "checked" if bound.certified else "asserted"
        assumptions.append(
            Assumption(
                f"E|W_{k}|^{r_used} <= {bound.value:.6g} ({bound.description})", status
            )
        )
    return BoundReport(
        value=value,
        metric="smooth",
        provenance=provenance,
        certified=certified,
        terms=terms,
        assumptions=assumptions,
    )


def cor33_bound(
    part: str,
    spec: SumSpecification,
    r_star: float,
    norms: TestFunctionNorms,
    p: int,
    C: float,
    *,
    g_even_asserted: bool = False,
) -> BoundReport:
    """Order-of-magnitude distance bound with a caller-supplied constant.

    The constant C is not pinned by any closed formula here, so the report is
    flagged non-certified; route through :func:`thm32_bound` for certified
    values.
    """
    if part not in ("i", "ii", "iii", "iv"):
        raise ValueError(f"part must be i/ii/iii/iv, got {part!r}")
    if C <= 0:
        raise ValueError(f"order constant C must be positive, got {C}")
    if r_star < 0:
        raise ValueError(f"r_star must be nonnegative, got {r_star}")
    _require(p >= 1, "matching order p must be >= 1")
    for j, oracle in enumerate(spec.oracles):
        _require(
            oracle.matching_order >= p,
            f"component {j} must match Gaussian moments to order p={p}",
        )
    if part in ("ii", "iv"):
        _require(spec.d == 1, f"part ({part}) requires a single component")
    if part in ("iii", "iv"):
        _require(p % 2 == 0, f"part ({part}) requires even matching order p")
        _require(
            g_even_asserted,
            f"part ({part}) requires the caller to assert the statistic's inner map is even",
        )
    d = spec.d
    n_star = min(spec.sizes)
    assumptions = [
        Assumption("order constant supplied by the caller (no closed form exists)", "asserted"),
    ]
    terms: list[BoundTerm] = []

    def checked_moment(j: int, s: float) -> float:
        val = spec.oracles[j].abs_moment(s)
        if not math.isfinite(val):
            raise ValueError(f"precondition failed: component {j} moment of order {s} infinite")
        if s >= 2 and val < 1.0 - 1e-12:
            raise ValueError(
                f"precondition failed: component {j} absolute moment of order {s} is "
                f"{val}, but standardization forces moments of order >= 2 to be >= 1"
            )
        return val

    if part == "i":
        hp = norms.plain_sum(p)
        for j in range(d):
            m = checked_moment(j, r_star + p + 1.0)
            terms.append(
                BoundTerm(
                    f"component-{j}",
                    C * d * hp * spec.sizes[j] * m / n_star ** ((p + 1) / 2.0),
                    {"moment_order": r_star + p + 1.0},
                )
            )
        provenance = "sum-distance-simplified/part-i"
    elif part == "ii":
        _require(p >= 2, "part (ii) requires matching order p >= 2 (weight of order p-1)")
        hp = norms.plain_sum(p - 1)
        n = spec.sizes[0]
        m = checked_moment(0, r_star + p + 1.0)
        terms.append(
            BoundTerm(
                "single-component",
                C * hp * n ** (-(p - 1) / 2.0) * m,
                {"moment_order": r_star + p + 1.0},
            )
        )
        provenance = "sum-distance-simplified/part-ii"
    elif part == "iii":
        hp = norms.plain_sum(p + 2)
        total = 0.0
        for j in range(d):
            m_even = checked_moment(j, r_star + p + 2.0)
            m_signed = abs(spec.oracles[j].signed_moment(p + 1))
            for k in range(d):
                m_odd = checked_moment(k, r_star + 3.0)
                total += spec.sizes[j] * spec.sizes[k] * (m_even + m_signed * m_odd)
        terms.append(
            BoundTerm(
                "double-sum",
                C * d * hp * total / n_star ** (p / 2.0 + 2.0),
                {"r_star": r_star},
            )
        )
        provenance = "sum-distance-simplified/part-iii"
    else:
        hp = norms.plain_sum(p)
        n = spec.sizes[0]
        m_even = checked_moment(0, r_star + p + 2.0)
        m_signed = abs(spec.oracles[0].signed_moment(p + 1))
        m_odd = checked_moment(0, r_star + 3.0)
        terms.append(
            BoundTerm(
                "double-sum",
                C * hp * n**2 * (m_even + m_signed * m_odd) / n ** (p / 2.0 + 2.0),
                {"r_star": r_star},
            )
        )
        provenance = "sum-distance-simplified/part-iv"
    value = sum(t.value for t in terms)
    return BoundReport(
        value=value,
        metric="smooth",
        provenance=provenance,
        certified=False,
        terms=terms,
        assumptions=assumptions,
    )
