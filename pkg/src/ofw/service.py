"""Gateway HTTP service: a thin FastAPI wrapper over a gateway runtime.

POST /query   evaluate an address against the shared filter
POST /insert  add an address to the filter on every server (admin token)
GET  /status  configuration summary and digest
GET  /health  liveness probe
"""

from __future__ import annotations

import ipaddress

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, field_validator

from .errors import ConnectivityError, OfwError
from .firewall import Verdict


class QueryRequest(BaseModel):
    addr: str

    @field_validator("addr")
    @classmethod
    def _valid_ipv4(cls, v: str) -> str:
        ipaddress.IPv4Address(v)
        return v


class QueryResponse(BaseModel):
    decision: str
    value: int | None
    m_prime: int
    malicious: bool
    suspects: list[int]
    method: str
    note: str = ""

    @classmethod
    def from_verdict(cls, verdict: Verdict) -> "QueryResponse":
        return cls(
            decision=verdict.decision,
            value=verdict.value,
            m_prime=verdict.m_prime,
            malicious=verdict.malicious,
            suspects=sorted(verdict.suspects),
            method=verdict.method,
            note=verdict.note,
        )


class InsertRequest(BaseModel):
    addr: str
    admin_token: str

    @field_validator("addr")
    @classmethod
    def _valid_ipv4(cls, v: str) -> str:
        ipaddress.IPv4Address(v)
        return v


class InsertResponse(BaseModel):
    ok: bool
    parties: list[int]
    detail: str = ""


class StatusResponse(BaseModel):
    mode: str
    digest: str
    scheme: str
    m: int
    t: int
    modulus: int
    protocol: str
    product_path: str
    fail_policy: str
    beta: int
    kappa: int
    window_ms: float
    collective: bool


def create_app(runtime) -> FastAPI:
    app = FastAPI(title="oblivious firewall gateway", version="0.1.0")
    app.state.runtime = runtime

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest) -> QueryResponse:
        try:
            verdict = runtime.query(req.addr)
        except ConnectivityError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except OfwError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return QueryResponse.from_verdict(verdict)

    @app.post("/insert", response_model=InsertResponse)
    def insert(req: InsertRequest) -> InsertResponse:
        try:
            result = runtime.insert(req.addr, req.admin_token)
        except ConnectivityError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except OfwError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if not result.get("ok") and "token" in result.get("detail", ""):
            raise HTTPException(status_code=403, detail=result["detail"])
        return InsertResponse(
            ok=result["ok"],
            parties=result.get("parties", []),
            detail=result.get("detail", ""),
        )

    @app.get("/status", response_model=StatusResponse)
    def status() -> StatusResponse:
        info = runtime.status()
        info.pop("servers", None)
        return StatusResponse(**info)

    @app.get("/health")
    def health() -> dict:
        return {"ok": True}

    return app
