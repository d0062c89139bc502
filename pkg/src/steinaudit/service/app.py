from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from . import dispatch
from .schemas import AuditRequest, BoundRequest, SelfcheckRequest, VerifySolutionRequest

app = FastAPI(title="steinaudit", version=__version__)


@app.exception_handler(ValueError)
def value_error_handler(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/bound")
def bound(req: BoundRequest):
    return dispatch.run_bound(req)


@app.post("/verify-solution")
def verify_solution(req: VerifySolutionRequest):
    return dispatch.run_verify_solution(req)


@app.post("/audit")
def run_audit(req: AuditRequest):
    return dispatch.run_audit(req)


@app.get("/selfcheck/suites")
def selfcheck_suites():
    return {"suites": dispatch.selfcheck_suite_names()}


@app.post("/selfcheck")
def selfcheck(req: SelfcheckRequest):
    return dispatch.run_selfcheck(req)
