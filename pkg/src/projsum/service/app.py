"""FastAPI service wrapping the decomposition library.

Domain outcomes (feasible / infeasible / prefix-only) travel in the response
body; malformed spectra map to HTTP 422.  All handlers are pure functions of
the request, so concurrent requests are safe.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..core import InfeasibleError, SpectrumError
from . import handlers
from . import models as m

app = FastAPI(
    title="projsum",
    description="Decide and construct decompositions of positive operators "
                "into sums of projections.",
    version="0.1.0",
)


def _translate(fn, req):
    try:
        return fn(req)
    except (SpectrumError, ValueError) as exc:
        if isinstance(exc, InfeasibleError):
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/classify", response_model=m.ClassifyResponse)
def classify(req: m.ClassifyRequest) -> m.ClassifyResponse:
    return _translate(handlers.classify_handler, req)


@app.post("/decompose", response_model=m.DecomposeResponse)
def decompose(req: m.DecomposeRequest) -> m.DecomposeResponse:
    return _translate(handlers.decompose_handler, req)


@app.post("/two-proj", response_model=m.TwoProjResponse)
def two_proj(req: m.TwoProjRequest) -> m.TwoProjResponse:
    return _translate(handlers.two_proj_handler, req)


@app.post("/frames", response_model=m.FramesResponse)
def frames(req: m.FramesRequest) -> m.FramesResponse:
    return _translate(handlers.frames_handler, req)


@app.post("/index", response_model=m.IndexResponse)
def index(req: m.IndexRequest) -> m.IndexResponse:
    return _translate(handlers.index_handler, req)


@app.post("/simulate", response_model=m.SimulateResponse)
def simulate(req: m.SimulateRequest) -> m.SimulateResponse:
    return _translate(handlers.simulate_handler, req)


@app.post("/verify", response_model=m.VerifyResponse)
def verify(req: m.VerifyRequest) -> m.VerifyResponse:
    return _translate(handlers.verify_handler, req)
