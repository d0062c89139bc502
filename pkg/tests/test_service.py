"""HTTP layer: request validation, dispatch wiring, and error mapping."""

import math

import pytest
from fastapi.testclient import TestClient

import steinaudit
from steinaudit.service import dispatch
from steinaudit.service.app import app
from steinaudit.service.schemas import VerifySolutionRequest
from steinaudit.stein_solution import SmoothFunction, library_function

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": steinaudit.__version__}


# --------------------------------------------------------------------------
# /bound


def test_bound_pearson_wasserstein():
    resp = client.post(
        "/bound",
        json={"kind": "pearson", "metric": "wasserstein", "n": 10_000, "p1": 0.5},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["value"] == pytest.approx(0.5)
    assert body["metric"] == "wasserstein"
    assert body["certified"] is True
    assert body["combination"] == "min"
    assert body["request"]["kind"] == "pearson"
    labels = [t["label"] for t in body["terms"]]
    assert "trivial-cap" in labels


def test_bound_pd_uses_lambda_alias():
    resp = client.post(
        "/bound",
        json={
            "kind": "pd",
            "metric": "wasserstein",
            "n": 10_000,
            "p1": 0.5,
            "lambda": 1.0,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["value"] == pytest.approx(0.5)
    assert body["extras"]["constant"] == pytest.approx(25.0)
    assert body["request"]["lambda"] == 1.0


def test_bound_pd_kolmogorov_policies():
    base = {"kind": "pd", "metric": "kolmogorov", "n": 10_000, "p1": 0.5, "lambda": 1.0}
    opt = client.post("/bound", json=base)
    assert opt.status_code == 200
    assert opt.json()["value"] <= 1.0

    fixed = client.post("/bound", json={**base, "alpha_policy": "fixed", "alpha": 2.0})
    assert fixed.status_code == 200
    q = 2500.0
    raw = (2.0 * 892.0 / q) / 2.0 + (4.0 * 892.0 / q) / 4.0 + math.sqrt(2.0 / math.pi) * math.sqrt(2.0)
    assert fixed.json()["value"] == pytest.approx(min(raw, 1.0))

    missing_alpha = client.post("/bound", json={**base, "alpha_policy": "fixed"})
    assert missing_alpha.status_code == 400
    assert "alpha" in missing_alpha.json()["detail"]


def test_bound_general_families():
    resp = client.post(
        "/bound",
        json={"kind": "general", "metric": "wasserstein", "n": 400, "family": "rademacher"},
    )
    assert resp.status_code == 200
    assert resp.json()["value"] == pytest.approx(24.0 / 20.0 + 17.0 / 400.0)

    bern = client.post(
        "/bound",
        json={
            "kind": "general",
            "metric": "smooth",
            "n": 400,
            "family": "bernoulli_standardized",
            "p1": 0.3,
            "norms": [1.0, 1.0],
        },
    )
    assert bern.status_code == 200
    assert bern.json()["value"] > 0

    no_family = client.post(
        "/bound", json={"kind": "general", "metric": "wasserstein", "n": 400}
    )
    assert no_family.status_code == 400

    bad_metric = client.post(
        "/bound",
        json={"kind": "general", "metric": "kolmogorov", "n": 400, "family": "rademacher"},
    )
    assert bad_metric.status_code == 400


def test_bound_validation_errors():
    # unknown keys are rejected by the schema, not silently dropped
    extra_key = client.post(
        "/bound",
        json={"kind": "pearson", "metric": "wasserstein", "n": 100, "p1": 0.5, "mode": "x"},
    )
    assert extra_key.status_code == 422

    bad_kind = client.post(
        "/bound", json={"kind": "chisq", "metric": "wasserstein", "n": 100, "p1": 0.5}
    )
    assert bad_kind.status_code == 422

    bad_n = client.post(
        "/bound", json={"kind": "pearson", "metric": "wasserstein", "n": 0, "p1": 0.5}
    )
    assert bad_n.status_code == 422

    # domain errors from the library map to 400 with the message preserved
    missing_p1 = client.post(
        "/bound", json={"kind": "pearson", "metric": "wasserstein", "n": 100}
    )
    assert missing_p1.status_code == 400
    assert "p1" in missing_p1.json()["detail"]

    missing_norms = client.post(
        "/bound", json={"kind": "pearson", "metric": "smooth", "n": 100, "p1": 0.5}
    )
    assert missing_norms.status_code == 400


# --------------------------------------------------------------------------
# /verify-solution


def test_verify_solution_square():
    resp = client.post(
        "/verify-solution",
        json={"g": "square", "orders": [1, 2], "grid_lo": -3.0, "grid_hi": 3.0, "grid_points": 5},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert body["residual_pass"] is True
    assert body["residual"] <= body["residual_tolerance"]
    assert [row["order"] for row in body["orders"]] == [1, 2]
    assert all(row["passed"] for row in body["orders"])
    assert body["dominance_max_ratio"] <= 1.0 + 1e-6


def test_verify_solution_unknown_function():
    resp = client.post("/verify-solution", json={"g": "septic"})
    assert resp.status_code == 400
    assert "unknown library function" in resp.json()["detail"]


def test_verify_solution_negative_control():
    # a registry whose "square" secretly grows like w^4 must be caught by the
    # envelope membership check, not waved through
    impostor = SmoothFunction(
        lambda w: __import__("numpy").asarray(w, dtype=float) ** 4,
        name="square",
        parity="even",
        max_order=6,
    )
    registry = {"square": impostor, "identity": library_function("identity")}
    req = VerifySolutionRequest(g="square", orders=[2], grid_lo=-4.0, grid_hi=4.0, grid_points=5)
    with pytest.raises(ValueError) as exc:
        dispatch.run_verify_solution(req, registry=registry)
    assert "envelope" in str(exc.value)


def test_verify_solution_dimension_mismatch():
    resp = client.post(
        "/verify-solution", json={"g": "sum-of-squares", "sigma_diag": [1.0]}
    )
    assert resp.status_code == 400
    assert "dimension" in resp.json()["detail"]


# --------------------------------------------------------------------------
# /audit


def test_audit_endpoint_small_run():
    resp = client.post(
        "/audit",
        json={
            "kind": "pearson",
            "metric": "wasserstein",
            "grid": [[500, 0.5]],
            "N": 20_000,
            "seed": 0,
            "n_boot": 5,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert len(body["rows"]) == 1
    row = body["rows"][0]
    assert row["params"] == {"n": 500, "p1": 0.5}
    assert set(row) == {
        "params",
        "bound",
        "estimate",
        "standard_error",
        "margin",
        "passed",
        "certified",
    }
    assert row["margin"] == pytest.approx(
        row["bound"] - row["estimate"] - 5.0 * row["standard_error"]
    )


def test_audit_endpoint_validation():
    bad_battery = client.post(
        "/audit",
        json={
            "kind": "power_divergence",
            "metric": "smooth",
            "grid": [[100, 0.5]],
            "N": 1000,
            "battery": ["sin", "tanh"],
        },
    )
    assert bad_battery.status_code == 400
    empty_grid = client.post(
        "/audit", json={"kind": "pearson", "metric": "smooth", "grid": [], "N": 1000}
    )
    assert empty_grid.status_code == 400


# --------------------------------------------------------------------------
# /selfcheck


def test_selfcheck_suites_listing():
    resp = client.get("/selfcheck/suites")
    assert resp.status_code == 200
    suites = resp.json()["suites"]
    assert "lemma-axby" in suites
    assert "constants-24-17" in suites
    assert len(suites) == 7


def test_selfcheck_run_subset():
    resp = client.post(
        "/selfcheck", json={"suites": ["gamma-ratio", "t-r-bounds"], "seed": 2, "cases": 300}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert set(body["results"]) == {"gamma-ratio", "t-r-bounds"}
    for entry in body["results"].values():
        assert entry["passed"] is True
        assert entry["detail"]


def test_selfcheck_unknown_suite():
    resp = client.post("/selfcheck", json={"suites": ["zeta"], "cases": 10})
    assert resp.status_code == 400
    assert "zeta" in resp.json()["detail"]
