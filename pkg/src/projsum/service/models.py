"""Pydantic request/response models for the decomposition service."""

from __future__ import annotations

from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Number = Union[str, int, float]


class TailModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["geometric", "harmonic", "constant"]
    side: Literal["excess", "defect"] = "excess"
    sum: Union[Number, Literal["infinite"]] = "infinite"
    first: Optional[Number] = None
    ratio: Optional[Number] = None
    scale: Optional[Number] = None
    value: Optional[Number] = None


class EntryModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    value: Number
    mult: Number = 1


class SpectrumModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["type1", "type2"] = "type1"
    entries: List[EntryModel]
    tail: Optional[Union[TailModel, List[TailModel]]] = None

    def to_plain(self) -> dict:
        out = {"mode": self.mode,
               "entries": [e.model_dump() for e in self.entries]}
        if self.tail is not None:
            if isinstance(self.tail, list):
                out["tail"] = [t.model_dump(exclude_none=True) for t in self.tail]
            else:
                out["tail"] = self.tail.model_dump(exclude_none=True)
        return out


class ClassifyRequest(BaseModel):
    spectrum: SpectrumModel
    factor: Optional[Literal["type1", "type2", "type3"]] = None


class VerdictModel(BaseModel):
    outcome: str
    k: Optional[int] = None
    reason: Optional[str] = None
    detail: str = ""
    gap: Optional[float] = None


class ClassifyResponse(BaseModel):
    verdict: VerdictModel
    status: Literal["ok", "infeasible"]


class DecomposeRequest(BaseModel):
    spectrum: SpectrumModel
    factor: Optional[Literal["type1", "type2", "type3"]] = None
    mode: Literal["exact", "float"] = "exact"
    steps: int = Field(default=50, ge=1)
    blocks: int = Field(default=8, ge=1)
    collision_budget: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-9, gt=0)
    denominator: int = Field(default=1, ge=1)


class ProjectionModel(BaseModel):
    vector: Optional[List[float]] = None
    frame: Optional[List[List[float]]] = None   # list of orthonormal columns
    label: str = ""


class RemainderModel(BaseModel):
    coeff: Number
    vector: List[float]


class ReportModel(BaseModel):
    projections: List[dict]
    reconstruction_residual: Optional[float] = None
    trace: dict = {}
    overlap_probes: List[dict] = []
    notes: List[str] = []


class DecomposeResponse(BaseModel):
    status: Literal["ok", "prefix-only", "indeterminate", "infeasible"]
    verdict: VerdictModel
    routing: str = ""
    dimension: int = 0
    projections: List[ProjectionModel] = []
    remainder: Optional[RemainderModel] = None
    target_diag: List[float] = []
    tail_note: str = ""
    report: Optional[ReportModel] = None
    diagnostics: List[dict] = []


class TwoProjRequest(BaseModel):
    spectrum: SpectrumModel


class TwoProjResponse(BaseModel):
    status: Literal["ok", "infeasible"]
    p_frame: List[List[float]] = []
    q_frame: List[List[float]] = []
    reason: Optional[str] = None
    witness: Optional[Number] = None
    report: Optional[ReportModel] = None


class FramesRequest(BaseModel):
    spectrum: SpectrumModel


class FramesResponse(BaseModel):
    status: Literal["ok", "infeasible"]
    block_dimension: int = 0
    range_residual: Optional[float] = None
    compression_residual: Optional[float] = None
    roundtrip_residual: Optional[float] = None
    compressed_diagonal: List[float] = []
    reason: Optional[str] = None


class IndexRequest(BaseModel):
    c: List[Number]


class IndexResponse(BaseModel):
    a: Number
    b: Number
    index: Number
    is_integer: bool


class SimulateRequest(BaseModel):
    kind: Literal["single-defect", "single-excess", "interleave",
                  "trace-iterate", "greedy"]
    spectrum: Optional[SpectrumModel] = None
    lam: Optional[Number] = None
    mu: Optional[Number] = None
    mu_seq: Optional[List[Number]] = None
    lambda_seq: Optional[List[Number]] = None
    mu_tail: Optional[TailModel] = None
    lambda_tail: Optional[TailModel] = None
    state: Optional[List[Number]] = None     # (mu, lambda, tauE, tauF)
    steps: int = Field(default=30, ge=0)
    blocks: int = Field(default=3, ge=1)


class SimulateResponse(BaseModel):
    kind: str
    columns: List[str]
    rows: List[List[str]]


class VerifyRequest(BaseModel):
    projections: List[ProjectionModel]
    remainder: Optional[RemainderModel] = None
    target_diag: Optional[List[float]] = None
    spectrum: Optional[SpectrumModel] = None
    tol: float = Field(default=1e-9, gt=0)


class VerifyResponse(BaseModel):
    status: Literal["ok", "failed"]
    report: ReportModel
