"""Shared result types: certified bound reports and test-function norm bundles.

Every bound evaluator in the package returns a :class:`BoundReport` so callers
(and the service layer) always see the same shape: a headline value, an exact
per-term breakdown, the assumption checklist, and a provenance tag naming the
internal formula that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .special_functions import h_weight

__all__ = ["Assumption", "BoundReport", "BoundTerm", "TestFunctionNorms"]

_ASSUMPTION_STATUSES = ("checked", "asserted")


@dataclass(frozen=True)
class Assumption:
    """One precondition of a bound: either verified here or asserted by the caller."""

    clause: str
    status: str = "checked"

    def __post_init__(self) -> None:
        if self.status not in _ASSUMPTION_STATUSES:
            raise ValueError(
                f"assumption status must be one of {_ASSUMPTION_STATUSES}, got {self.status!r}"
            )


@dataclass
class BoundTerm:
    label: str
    value: float
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class BoundReport:
    """A bound value together with how it was assembled.

    ``combination`` records how ``value`` relates to ``terms``: ``"sum"`` means
    value is exactly the sum of the term values, ``"min"`` means value is
    exactly the smallest term value (used where several certified bounds
    compete and the best one is reported).
    """

    value: float
    metric: str
    provenance: str
    certified: bool = True
    combination: str = "sum"
    terms: list[BoundTerm] = field(default_factory=list)
    assumptions: list[Assumption] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.combination not in ("sum", "min"):
            raise ValueError(f"unknown combination {self.combination!r}")
        if self.terms:
            if self.combination == "sum":
                total = sum(t.value for t in self.terms)
                if abs(total - self.value) > 1e-9 * max(1.0, abs(self.value)):
                    raise ValueError(
                        f"term breakdown does not sum to the value: {total} vs {self.value}"
                    )
            else:
                best = min(t.value for t in self.terms)
                if best != self.value:
                    raise ValueError(
                        f"value must equal the minimum term, got {self.value} vs {best}"
                    )

    def term(self, label: str) -> BoundTerm:
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(f"no term labelled {label!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "metric": self.metric,
            "provenance": self.provenance,
            "certified": self.certified,
            "combination": self.combination,
            "terms": [
                {"label": t.label, "value": t.value, "detail": dict(t.detail)}
                for t in self.terms
            ],
            "assumptions": [
                {"clause": a.clause, "status": a.status} for a in self.assumptions
            ],
            "extras": dict(self.extras),
        }


@dataclass(frozen=True)
class TestFunctionNorms:
    """Supremum norms of the first K derivatives of the univariate test function.

    Derived weights are recomputed on demand (never stored), so the object can
    be shared freely.
    """

    __test__ = False  # name collides with pytest's collection prefix

    norms: tuple[float, ...]

    def __init__(self, norms: Sequence[float]):
        values = tuple(float(v) for v in norms)
        if not values:
            raise ValueError("TestFunctionNorms requires at least one norm")
        if any(v < 0 for v in values):
            raise ValueError("derivative norms must be nonnegative")
        object.__setattr__(self, "norms", values)

    @property
    def max_order(self) -> int:
        return len(self.norms)

    def norm(self, k: int) -> float:
        """Norm of the k-th derivative (1-indexed)."""
        if k < 1 or k > len(self.norms):
            raise ValueError(f"norm order {k} outside 1..{len(self.norms)}")
        return self.norms[k - 1]

    def stirling_weight(self, n: int) -> float:
        """Stirling-weighted combination of the first n norms."""
        if n < 1 or n > len(self.norms):
            raise ValueError(
                f"stirling weight of order {n} needs {n} norms, have {len(self.norms)}"
            )
        return h_weight(self.norms[:n])

    def plain_sum(self, p: int) -> float:
        """Plain sum of the first p norms."""
        if p < 1 or p > len(self.norms):
            raise ValueError(f"plain sum of order {p} needs {p} norms, have {len(self.norms)}")
        return float(sum(self.norms[:p]))
