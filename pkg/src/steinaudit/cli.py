"""Command-line front end.

Subcommands compute distribution bounds, verify constructed solutions against
their claimed derivative envelopes, run seeded Monte Carlo audits, and run the
inequality self-check suites.  Each command runs in-process by default or, with
--server URL, posts the same validated payload to a running service instance.

Exit codes: 0 pass, 1 audit/verification failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone

from pydantic import ValidationError

from . import __version__
from .service import dispatch
from .service.schemas import (
    AuditRequest,
    BoundRequest,
    SelfcheckRequest,
    VerifySolutionRequest,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _fmt(x) -> str:
    """Floats with 17 significant digits so report files are diffable."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    if x is None:
        return ""
    return str(x)


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_grid_axis(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo,hi,count, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    return doc


def _write_json(path: str, payload: dict, deterministic: bool) -> None:
    doc = dict(payload)
    if not deterministic:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


def _emit(ns, payload: dict, columns: list[str], rows: list[dict]) -> None:
    if not ns.out:
        return
    if ns.format == "json":
        _write_json(ns.out, payload, ns.deterministic)
    else:
        _write_csv(ns.out, columns, rows)


def _post(server: str, path: str, req) -> dict:
    import httpx

    url = server.rstrip("/") + path
    try:
        resp = httpx.post(url, json=req.model_dump(mode="json", by_alias=True), timeout=None)
    except httpx.HTTPError as exc:
        raise ValueError(f"request to {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise ValueError(f"{url} returned {resp.status_code}: {resp.text}")
    return resp.json()


# --------------------------------------------------------------------------
# subcommands


def _cmd_bound(ns) -> int:
    merged = _load_config(ns.config)
    for key, value in (
        ("kind", ns.kind),
        ("metric", ns.metric),
        ("n", ns.n),
        ("p1", ns.p1),
        ("lambda", ns.lam),
        ("norms", ns.norms),
        ("family", ns.family),
        ("alpha_policy", ns.alpha_policy),
        ("alpha", ns.alpha),
    ):
        if value is not None:
            merged[key] = value
    merged.setdefault("metric", "wasserstein")
    req = BoundRequest.model_validate(merged)
    out = _post(ns.server, "/bound", req) if ns.server else dispatch.run_bound(req)
    print(
        f"{req.kind} {req.metric} bound = {_fmt(out['value'])}"
        f" (certified={_fmt(out['certified'])})"
    )
    row = {
        "kind": req.kind,
        "metric": req.metric,
        "n": req.n,
        "p1": req.p1,
        "lambda": req.lam,
        "family": req.family,
        "bound": out["value"],
        "certified": out["certified"],
    }
    columns = ["kind", "metric", "n", "p1", "lambda", "family", "bound", "certified"]
    _emit(ns, out, columns, [row])
    return EXIT_OK


def _cmd_verify_solution(ns, registry=None) -> int:
    lo, hi, count = ns.grid
    req = VerifySolutionRequest(
        g=ns.g,
        h=ns.h,
        orders=ns.orders,
        grid_lo=lo,
        grid_hi=hi,
        grid_points=count,
        sigma_diag=ns.sigma_diag,
        gauss_hermite_nodes=ns.gh_nodes,
        t_panels=ns.t_panels,
        tolerance=ns.tolerance,
    )
    if ns.server:
        out = _post(ns.server, "/verify-solution", req)
    else:
        out = dispatch.run_verify_solution(req, registry=registry)
    print(
        f"solution residual for (g={req.g}, h={req.h}): {_fmt(out['residual'])}"
        f" (tolerance {_fmt(out['residual_tolerance'])})"
    )
    rows = []
    for entry in out["orders"]:
        status = "ok" if entry["passed"] else "FAIL"
        print(f"  order {entry['order']}: max ratio {_fmt(entry['max_ratio'])} {status}")
        rows.append(
            {
                "g": req.g,
                "h": req.h,
                "order": entry["order"],
                "max_ratio": entry["max_ratio"],
                "residual": out["residual"],
                "pass": entry["passed"],
            }
        )
    verdict = "PASS" if out["passed"] else "FAIL"
    print(verdict)
    columns = ["g", "h", "order", "max_ratio", "residual", "pass"]
    _emit(ns, out, columns, rows)
    return EXIT_OK if out["passed"] else EXIT_FAIL


_AUDIT_COLUMNS = ["n", "p1", "lambda", "h", "bound", "estimate", "se", "margin", "pass"]


def _audit_csv_row(row: dict) -> dict:
    params = row["params"]
    return {
        "n": params.get("n"),
        "p1": params.get("p1"),
        "lambda": params.get("lambda"),
        "h": params.get("h"),
        "bound": row["bound"],
        "estimate": row["estimate"],
        "se": row["standard_error"],
        "margin": row["margin"],
        "pass": row["passed"],
    }


def _cmd_audit(ns) -> int:
    merged = _load_config(ns.config)
    if ns.seed is not None:
        merged["seed"] = ns.seed
    if ns.strict is not None:
        merged["strict"] = ns.strict
    req = AuditRequest.model_validate(merged)
    if ns.server:
        out = _post(ns.server, "/audit", req)
    else:
        out = dispatch.run_audit(req, threads=ns.threads)
    for row in out["rows"]:
        flat = _audit_csv_row(row)
        bits = [f"{k}={_fmt(flat[k])}" for k in ("n", "p1", "lambda", "h") if flat[k] is not None]
        bits.append(f"bound={_fmt(flat['bound'])}")
        bits.append(f"estimate={_fmt(flat['estimate'])}")
        bits.append(f"se={_fmt(flat['se'])}")
        bits.append(f"margin={_fmt(flat['margin'])}")
        bits.append("pass" if flat["pass"] else "FAIL")
        print("  ".join(bits))
    verdict = "PASS" if out["passed"] else "FAIL"
    print(f"audit: {verdict} ({len(out['rows'])} rows)")
    _emit(ns, out, _AUDIT_COLUMNS, [_audit_csv_row(r) for r in out["rows"]])
    return EXIT_OK if out["passed"] else EXIT_FAIL


def _cmd_selfcheck(ns) -> int:
    if ns.list:
        if ns.server:
            import httpx

            url = ns.server.rstrip("/") + "/selfcheck/suites"
            names = httpx.get(url, timeout=None).json()["suites"]
        else:
            names = dispatch.selfcheck_suite_names()
        for name in names:
            print(name)
        return EXIT_OK
    req = SelfcheckRequest(
        suites=ns.suite or None,
        seed=ns.seed if ns.seed is not None else 0,
        cases=ns.cases,
    )
    if ns.server:
        out = _post(ns.server, "/selfcheck", req)
    else:
        out = dispatch.run_selfcheck(req)
    rows = []
    for name, result in out["results"].items():
        status = "ok" if result["passed"] else "FAIL"
        print(f"{status:4s} {name}: {result['detail']}")
        rows.append({"suite": name, "passed": result["passed"], "detail": result["detail"]})
    _emit(ns, out, ["suite", "passed", "detail"], rows)
    return EXIT_OK if out["passed"] else EXIT_FAIL


def _cmd_serve(ns) -> int:
    import uvicorn

    uvicorn.run("steinaudit.service.app:app", host=ns.host, port=ns.port)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="write machine-readable report to this path")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument(
        "--server", default=None, help="base URL of a running service; post there instead of running in-process"
    )
    common.add_argument(
        "--deterministic",
        action="store_true",
        help="suppress the timestamp field so identical runs give identical bytes",
    )
    common.add_argument("--seed", type=int, default=None, help="master seed for randomized commands")

    parser = argparse.ArgumentParser(
        prog="steinaudit",
        description="normal-approximation error bounds and their numerical audits",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", parents=[common], help="evaluate a distribution bound")
    p_bound.add_argument("kind", choices=("pearson", "pd", "general"))
    p_bound.add_argument("--n", type=int, default=None, help="sample size / trial count")
    p_bound.add_argument("--p1", type=float, default=None, help="first cell probability")
    p_bound.add_argument("--lambda", dest="lam", type=float, default=None, help="divergence index")
    p_bound.add_argument("--metric", choices=("wasserstein", "smooth", "kolmogorov"), default=None)
    p_bound.add_argument("--norms", type=_parse_pair, default=None, metavar="A,B",
                         help="first and second derivative sup norms for the smooth metric")
    p_bound.add_argument("--family", default=None, help="summand family for the general bound")
    p_bound.add_argument("--alpha-policy", choices=("optimize", "fixed"), default=None)
    p_bound.add_argument("--alpha", type=float, default=None, help="smoothing width when --alpha-policy fixed")
    p_bound.add_argument("--config", default=None, help="JSON file with the same fields; flags override")
    p_bound.set_defaults(handler=_cmd_bound)

    p_verify = sub.add_parser(
        "verify-solution", parents=[common], help="check a constructed solution and its derivative envelope"
    )
    p_verify.add_argument("--g", required=True, help="inner map name from the function registry")
    p_verify.add_argument("--h", default="identity", help="outer test function name")
    p_verify.add_argument("--orders", type=_parse_int_list, default=[1, 2, 3], metavar="K1,K2,...")
    p_verify.add_argument("--grid", type=_parse_grid_axis, default=(-5.0, 5.0, 7), metavar="LO,HI,COUNT")
    p_verify.add_argument("--sigma-diag", type=_parse_float_list, default=None, metavar="S1,S2,...")
    p_verify.add_argument("--gh-nodes", type=int, default=64)
    p_verify.add_argument("--t-panels", type=int, default=200)
    p_verify.add_argument("--tolerance", type=float, default=1e-8)
    p_verify.set_defaults(handler=_cmd_verify_solution)

    p_audit = sub.add_parser("audit", parents=[common], help="Monte Carlo audit of a bound family")
    p_audit.add_argument("--config", required=True, help="JSON experiment config")
    p_audit.add_argument("--threads", type=int, default=None)
    p_audit.add_argument("--strict", dest="strict", action="store_true", default=None)
    p_audit.add_argument("--no-strict", dest="strict", action="store_false")
    p_audit.set_defaults(handler=_cmd_audit)

    p_check = sub.add_parser("selfcheck", parents=[common], help="run the inequality property suites")
    p_check.add_argument("--list", action="store_true", help="print suite names without running")
    p_check.add_argument("--suite", action="append", default=None, help="run only this suite (repeatable)")
    p_check.add_argument("--cases", type=int, default=10_000)
    p_check.set_defaults(handler=_cmd_selfcheck)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return ns.handler(ns)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
