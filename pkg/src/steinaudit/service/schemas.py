"""Request models shared by the HTTP service and the CLI config files.

Every model rejects unknown keys so a typo in a config fails loudly instead of
silently running defaults.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class BoundRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["pearson", "pd", "general"]
    metric: Literal["wasserstein", "smooth", "kolmogorov"]
    n: int = Field(ge=1)
    p1: float | None = None
    lam: float | None = Field(default=None, alias="lambda")
    norms: tuple[float, float] | None = None
    family: str | None = None  # general kind: summand family
    alpha_policy: Literal["optimize", "fixed"] = "optimize"
    alpha: float | None = None


class VerifySolutionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    g: str
    h: str = "identity"
    orders: list[int] = [1, 2, 3]
    grid_lo: float = -5.0
    grid_hi: float = 5.0
    grid_points: int = Field(default=7, ge=2)
    sigma_diag: list[float] | None = None  # default: identity
    gauss_hermite_nodes: int = 64
    t_panels: int = 200
    tolerance: float = 1e-8


class AuditRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["pearson", "power_divergence"]
    metric: Literal["wasserstein", "kolmogorov", "smooth"]
    grid: list[tuple[int, float]]
    N: int = Field(default=1_000_000, ge=1)
    seed: int = 0
    lambdas: list[float] = [1.0]
    battery: list[str] = ["sin", "exp-neg", "reciprocal", "bump-1-1"]
    strict: bool = True
    n_boot: int = Field(default=200, ge=0)


class SelfcheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    suites: list[str] | None = None
    seed: int = 0
    cases: int = Field(default=10_000, ge=1)
