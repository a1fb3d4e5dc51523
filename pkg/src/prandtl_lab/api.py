"""HTTP front end for the compute layer."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import service
from .schemas import (BlowupRequest, BlowupResponse, ErrorResponse, ProfileRequest,
                      SimulateRequest, SimulateResponse, Table, VerifyResponse)

app = FastAPI(title="prandtl-lab", version="0.1.0")


@app.exception_handler(service.InputError)
async def _input_error(request: Request, exc: service.InputError):
    body = ErrorResponse(kind="input", message=str(exc))
    return JSONResponse(status_code=400, content=body.model_dump())


@app.exception_handler(service.RunDegeneracy)
async def _degeneracy(request: Request, exc: service.RunDegeneracy):
    body = ErrorResponse(kind="degeneracy", message=str(exc), t=exc.t, x=exc.x)
    return JSONResponse(status_code=409, content=body.model_dump())


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/profile", response_model=Table)
def profile(req: ProfileRequest) -> Table:
    return service.profile_table(req)


@app.post("/blowup", response_model=BlowupResponse)
def blowup(req: BlowupRequest) -> BlowupResponse:
    return service.blowup(req)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    return service.simulate(req)


@app.get("/verify/{suite}", response_model=VerifyResponse)
def verify(suite: str) -> VerifyResponse:
    return service.verify(suite)
