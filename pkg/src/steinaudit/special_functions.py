"""Scalar special functions and combinatorial constants for the bound formulas.

Everything downstream (derivative bounds, distance bounds, the divergence-family
constants) is assembled from the primitives in this module.  Each function is
either exact (integer combinatorics, closed forms) or certified quadrature with
an explicit accuracy target, so the self-check suites can lean on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "AbcCoefficients",
    "abc_coeffs",
    "bell",
    "c_const",
    "chi2_1_cdf",
    "gamma_fn",
    "gamma_half_ratio",
    "h_weight",
    "ij_constants",
    "mu_abs_moment",
    "stirling2",
    "t_r",
    "upper_incomplete_gamma",
]

_SQRT_PI = math.sqrt(math.pi)

# exp(x) stays finite in double precision well past this, but the closed-form
# tail product loses nothing by switching to direct quadrature earlier
_T_R_EXP_CUTOFF = 600.0


@lru_cache(maxsize=8)
def _legendre_on_half_pi(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped from [-1, 1] to [0, pi/2]."""
    x, w = np.polynomial.legendre.leggauss(order)
    half_pi = 0.5 * math.pi
    return 0.25 * math.pi * (x + 1.0), 0.5 * half_pi * w


def gamma_fn(x: float) -> float:
    """Gamma function on the positive half line."""
    if x <= 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    return float(special.gamma(x))


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma integral of u^(a-1)·e^(-u) over [x, inf)."""
    if a <= 0:
        raise ValueError(f"upper_incomplete_gamma requires a > 0, got a={a}")
    if x < 0:
        raise ValueError(f"upper_incomplete_gamma requires x >= 0, got x={x}")
    return float(special.gammaincc(a, x) * special.gamma(a))


def gamma_half_ratio(n: float) -> float:
    """Ratio Γ(n/2) / Γ((n+1)/2), computed in log space for stability.

    This ratio is the building block of every second-form bound prefactor; it
    is trapped between √(2/n) and √(2/(n−1/2)) for n ≥ 1, which the property
    suite asserts.
    """
    if n <= 0:
        raise ValueError(f"gamma_half_ratio requires n > 0, got {n}")
    return float(math.exp(special.gammaln(n / 2.0) - special.gammaln((n + 1) / 2.0)))


def mu_abs_moment(r: float) -> float:
    """r-th absolute moment of the standard normal: 2^(r/2)·Γ((r+1)/2)/√π."""
    if r < 0:
        raise ValueError(f"mu_abs_moment requires r >= 0, got {r}")
    return float(2.0 ** (r / 2.0) * special.gamma((r + 1.0) / 2.0) / _SQRT_PI)


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple[int, ...]:
    """Row n of the second-kind Stirling triangle, entries k = 0..n (exact ints)."""
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        upper = prev[k] if k < n else 0
        row[k] = k * upper + prev[k - 1]
    return tuple(row)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind (set partitions of n into k blocks)."""
    if not isinstance(n, (int, np.integer)) or not isinstance(k, (int, np.integer)):
        raise ValueError("stirling2 requires integer arguments")
    if n < 1 or k < 1 or k > n:
        raise ValueError(f"stirling2 requires 1 <= k <= n, got n={n}, k={k}")
    return _stirling_row(int(n))[int(k)]


def h_weight(norms: Sequence[float]) -> float:
    """Stirling-weighted norm combination sum_k {n brace k}·‖h^(k)‖.

    `norms` lists the supremum norms of the first n derivatives of the
    univariate test function, in order.
    """
    if len(norms) == 0:
        raise ValueError("h_weight requires a nonempty list of norms")
    n = len(norms)
    row = _stirling_row(n)
    total = 0.0
    for k, norm in enumerate(norms, start=1):
        if norm < 0:
            raise ValueError(f"h_weight requires nonnegative norms, got {norm}")
        total += row[k] * float(norm)
    return total


def bell(p: int) -> int:
    """p-th Bell number (total set partitions), as the Stirling row sum."""
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValueError(f"bell requires an integer p >= 1, got {p}")
    return sum(_stirling_row(int(p))[1:])


def c_const(r: float) -> float:
    """Power-mean splitting constant max{1, 2^(r-1)}."""
    if r < 0:
        raise ValueError(f"c_const requires r >= 0, got {r}")
    return max(1.0, 2.0 ** (r - 1.0))


@dataclass(frozen=True)
class AbcCoefficients:
    """Coefficient triple (alpha, beta, gamma) for the third-form derivative bounds.

    The `plain` variant feeds the second-derivative-free bound on the solution's
    n-th derivative; the `tilde` variant feeds the third-derivative bound for
    the iterated solution.  Both are piecewise in the polynomial exponent r.
    """

    alpha: float
    beta: float
    gamma: float
    variant: str

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("AbcCoefficients fields must be nonnegative")
        if self.variant not in ("plain", "tilde"):
            raise ValueError(f"unknown variant {self.variant!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


def abc_coeffs(r: float, variant: str) -> AbcCoefficients:
    """Piecewise coefficient triples for the one-dimensional derivative bounds.

    plain:  (4, 4, 2·μ_r)                      for 0 <= r <= 1,
            (r+3, r+5, (r+1)·μ_{r+1})          for r > 1.
    tilde:  (10, 10, 10·μ_{r+1})               for 0 <= r <= 1,
            (r²+r+8, r²+2r+18, (2r²+r+5)·μ_{r+1})  for r > 1.
    """
    if r < 0:
        raise ValueError(f"abc_coeffs requires r >= 0, got {r}")
    if variant == "plain":
        if r <= 1.0:
            return AbcCoefficients(4.0, 4.0, 2.0 * mu_abs_moment(r), "plain")
        return AbcCoefficients(r + 3.0, r + 5.0, (r + 1.0) * mu_abs_moment(r + 1.0), "plain")
    if variant == "tilde":
        if r <= 1.0:
            return AbcCoefficients(10.0, 10.0, 10.0 * mu_abs_moment(r + 1.0), "tilde")
        return AbcCoefficients(
            r * r + r + 8.0,
            r * r + 2.0 * r + 18.0,
            (2.0 * r * r + r + 5.0) * mu_abs_moment(r + 1.0),
            "tilde",
        )
    raise ValueError(f"abc_coeffs variant must be 'plain' or 'tilde', got {variant!r}")


def t_r(r: float, w: float) -> float:
    """Exponentially tilted Gaussian tail moment w·e^(w²/2)·∫_w^∞ t^r e^(-t²/2) dt.

    Uses the incomplete-gamma closed form 2^((r-1)/2)·w·e^(w²/2)·Γ((r+1)/2, w²/2)
    while the exponential factor is representable; for very large w the tail is
    integrated directly with the exponential absorbed (substituting t = w + u),
    which avoids overflow entirely.
    """
    if r < 0:
        raise ValueError(f"t_r requires r >= 0, got {r}")
    if w <= 0:
        raise ValueError(f"t_r requires w > 0, got {w}")
    x = 0.5 * w * w
    if x < _T_R_EXP_CUTOFF:
        a = 0.5 * (r + 1.0)
        return float(2.0 ** ((r - 1.0) / 2.0) * w * math.exp(x) * upper_incomplete_gamma(a, x))
    val, _ = integrate.quad(
        lambda u: (w + u) ** r * math.exp(-w * u - 0.5 * u * u), 0.0, np.inf
    )
    return float(w * val)


_IJ_KINDS = ("I_nr", "J_nr", "I_mnr", "J_mnr")


def ij_constants(kind: str, n: int, r: float, m: int | None = None) -> float:
    """Weighted tail-coefficient integrals from the derivative-bound prefactors.

    kind selects one of four normalized integrals over the unit square/interval:

      I_nr   = n·∫₀¹ t^(n-1)·(t+√(1-t²))^r dt
      J_nr   = (2Γ((n+1)/2)/(√π·Γ(n/2)))·∫₀¹ (t^(n-1)/√(1-t²))·(t+√(1-t²))^r dt
      I_mnr  = n(m+n)·∫₀¹∫₀¹ t^(m+n-1)·s^(n-1)·(st+t√(1-s²)+√(1-t²))^r ds dt
      J_mnr  = like I_mnr but with 1/√(1-t²)·1/√(1-s²) weights and the matching
               gamma-ratio normalization.

    All are evaluated after the substitution t = sin(θ) (and s = sin(θ') in the
    two-dimensional cases), which removes the endpoint square-root weights and
    leaves smooth integrands for adaptive quadrature.  Each value is capped by
    2^(r/2) (one-dimensional kinds) or 3^(r/2) (two-dimensional kinds); the
    property suite asserts the caps, nothing else.
    """
    if kind not in _IJ_KINDS:
        raise ValueError(f"ij_constants kind must be one of {_IJ_KINDS}, got {kind!r}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"ij_constants requires integer n >= 1, got {n}")
    if r < 0:
        raise ValueError(f"ij_constants requires r >= 0, got {r}")
    two_dim = kind in ("I_mnr", "J_mnr")
    if two_dim:
        if m is None or not isinstance(m, (int, np.integer)) or m < 1:
            raise ValueError(f"kind {kind} requires integer m >= 1, got {m}")
    elif m is not None:
        raise ValueError(f"kind {kind} does not take an m index")

    half_pi = 0.5 * math.pi
    if kind == "I_nr":
        val, _ = integrate.quad(
            lambda th: math.sin(th) ** (n - 1)
            * (math.sin(th) + math.cos(th)) ** r
            * math.cos(th),
            0.0,
            half_pi,
            epsabs=1e-12,
            epsrel=1e-10,
        )
        return float(n * val)
    if kind == "J_nr":
        val, _ = integrate.quad(
            lambda th: math.sin(th) ** (n - 1) * (math.sin(th) + math.cos(th)) ** r,
            0.0,
            half_pi,
            epsabs=1e-12,
            epsrel=1e-10,
        )
        return float(2.0 / (_SQRT_PI * gamma_half_ratio(n)) * val)

    mm = int(m)  # type: ignore[arg-type]
    with_cosines = kind == "I_mnr"

    def tensor_value(order: int) -> float:
        x, wts = _legendre_on_half_pi(order)
        st, ct = np.sin(x), np.cos(x)
        t_fac = st ** (mm + n - 1) * (ct if with_cosines else 1.0)
        s_fac = st ** (n - 1) * (ct if with_cosines else 1.0)
        core = (st[None, :] * st[:, None] + st[None, :] * ct[:, None] + ct[None, :]) ** r
        # axis 0: the s angle, axis 1: the t angle
        return float(wts @ (s_fac[:, None] * core * t_fac[None, :]) @ wts)

    coarse, fine = tensor_value(48), tensor_value(72)
    if abs(fine - coarse) > 1e-10 * max(1.0, abs(fine)):
        raise ValueError(
            f"two-axis quadrature for {kind}(m={mm}, n={n}, r={r}) did not settle: "
            f"{coarse} vs {fine}"
        )
    if kind == "I_mnr":
        return float(n * (mm + n) * fine)
    pref = 4.0 / (math.pi * gamma_half_ratio(n) * gamma_half_ratio(mm + n))
    return float(pref * fine)


def chi2_1_cdf(x: float) -> float:
    """CDF of the squared standard normal, P(Z² <= x) = erf(√(x/2)).

    Negative inputs return 0 (convention: the law has no mass below zero).
    """
    if x < 0:
        return 0.0
    return float(math.erf(math.sqrt(0.5 * x)))
