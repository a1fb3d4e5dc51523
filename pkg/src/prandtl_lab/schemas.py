"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

Number = Optional[float]
Cell = Union[float, str, None]


class Grid(BaseModel):
    x0: float
    x1: float
    nx: int = Field(ge=0)
    y0: float
    y1: float
    ny: int = Field(ge=0)


class Table(BaseModel):
    columns: list[str]
    rows: list[list[Cell]] = []
    error: Optional[str] = None


class ProfileRequest(BaseModel):
    kind: Literal["generic", "degenerate"]
    what: Literal["theta", "ystar", "axis", "asymptotics"]
    x: Optional[list[float]] = None
    y: Optional[list[float]] = None
    grid: Optional[Grid] = None
    derivative: Literal["d1", "d3"] = "d1"
    mode: Literal["restricted", "periodic"] = "restricted"


class BlowupRequest(BaseModel):
    scenario: str
    t_max: Optional[float] = None
    window: Optional[tuple[float, float, float, float]] = None
    n: Optional[int] = Field(default=None, ge=3)


class GenericityModel(BaseModel):
    generic: bool
    flags: dict[str, bool]
    values: dict[str, Number]
    reasons: list[str]
    scope: str


class BlowupResponse(BaseModel):
    name: str
    T: Union[float, str]
    T_a: Union[float, str]
    T_b: Union[float, str]
    X0: Number = None
    Y0: Number = None
    t_max: float
    window: tuple[float, float, float, float]
    n: int
    genericity: Optional[GenericityModel] = None
    grad_xY: Optional[tuple[Number, Number]] = None
    uX_at_T: Number = None
    p0_sq: Number = None
    mu: Number = None
    nu: Number = None
    iota: Optional[int] = None


class SimulateRequest(BaseModel):
    scenario: str
    times: list[float]
    grid: Grid
    renorm: bool = False
    window: Optional[tuple[float, float, float, float]] = None
    delta: float = Field(default=0.3, gt=0.0)
    guard: float = Field(default=1e-3, ge=0.0)

    @field_validator("times")
    @classmethod
    def _non_negative(cls, v: list[float]) -> list[float]:
        if any(t < 0.0 for t in v):
            raise ValueError("times must be non-negative")
        return v


class SnapshotModel(BaseModel):
    t: float
    x: list[float]
    y: list[float]
    u: list[list[Number]]
    y_star: list[Number]
    x_star: Number = None
    renorm_error: Number = None
    renorm_window: Optional[tuple[float, float, float, float]] = None


class SimulateResponse(BaseModel):
    name: str
    T: Union[float, str]
    mu: Number = None
    nu: Number = None
    iota: Optional[int] = None
    snapshots: list[SnapshotModel]


class CheckModel(BaseModel):
    id: str
    name: str
    measured: Number
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0


class VerifyResponse(BaseModel):
    suite: str
    passed: bool
    checks: list[CheckModel]


class ErrorResponse(BaseModel):
    kind: Literal["input", "degeneracy", "evaluation"]
    message: str
    t: Number = None
    x: Number = None
