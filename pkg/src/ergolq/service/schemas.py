"""Request and response bodies for the HTTP service.

The `problem` field of every request mirrors the problem-file document;
numbers must be finite (NaN/Infinity are rejected at validation).  Domain
conversion and the dimension checks are delegated to ergolq.problemfile,
so the CLI and the service accept exactly the same documents.
"""

from __future__ import annotations

from typing import Annotated, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .. import problemfile

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
Vector = list[FiniteFloat]
Matrix = list[Vector]


class SystemModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    d: int = Field(ge=0)
    A: Matrix
    B: Matrix
    C: list[Matrix]
    D: list[Matrix]
    b: Optional[Vector] = None
    sigma: list[Vector]


class WeightsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Q: Matrix
    S: Optional[Matrix] = None
    R: Matrix
    q: Optional[Vector] = None
    rho: Optional[Vector] = None


class StrategyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Theta: Matrix
    v: Optional[Vector] = None


class SimModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: Optional[FiniteFloat] = None
    horizon_t: Optional[FiniteFloat] = None
    n_paths: Optional[int] = None
    burn_in_t: Optional[FiniteFloat] = None
    seed: Optional[int] = None
    abel_lambda: Optional[FiniteFloat] = None


class ProblemModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int
    system: SystemModel
    weights: WeightsModel
    strategy: Optional[StrategyModel] = None
    sim: Optional[SimModel] = None
    schedule: Optional[list[FiniteFloat]] = None

    def to_domain(self) -> problemfile.Problem:
        return problemfile.problem_from_dict(self.model_dump(exclude_none=True))


class ScalarVerdictModel(BaseModel):
    family: str
    case_label: str
    finite: Optional[bool] = None
    solvable: Optional[bool] = None
    value: Optional[float] = None
    description: str
    details: dict = {}


class CertificateModel(BaseModel):
    """A certificate attempt: the witness on success, the first violated
    condition on failure."""

    ok: bool
    kind: Literal["solvability", "finiteness"]
    condition: Optional[str] = None
    residual: Optional[float] = None
    value: Optional[float] = None
    P: Optional[Matrix] = None
    Theta: Optional[Matrix] = None
    eta: Optional[Vector] = None
    v: Optional[Vector] = None
    residuals: dict = {}


class HealthResponse(BaseModel):
    status: str
    version: str


class CheckRequest(BaseModel):
    problem: ProblemModel
    pi0: Optional[Matrix] = None
    scan: bool = True


class CheckResponse(BaseModel):
    stabilizer: Optional[Matrix] = None
    stability_margin: Optional[float] = None
    positive_definite: bool = False
    riccati_residual: Optional[float] = None
    riccati_iterations: Optional[int] = None
    solvability: Optional[CertificateModel] = None
    finiteness: Optional[CertificateModel] = None
    scalar: Optional[ScalarVerdictModel] = None
    notes: list[str] = []


class EvalRequest(BaseModel):
    problem: ProblemModel
    theta: Optional[Matrix] = None
    v: Optional[Vector] = None
    probes: int = Field(default=3, ge=0, le=64)
    probe_seed: int = 0


class EvalResponse(BaseModel):
    cost: float
    m1: Vector
    m2: Matrix
    theta: Matrix
    v: Vector
    stability_margin: float
    representation_error: Optional[float] = None


class SolveRequest(BaseModel):
    problem: ProblemModel


class SolveResponse(BaseModel):
    value: float
    theta: Matrix
    v: Vector


class RegularizeRequest(BaseModel):
    problem: ProblemModel
    schedule: Optional[list[FiniteFloat]] = None
    conv_tol: FiniteFloat = 1e-6


class RegularizeEntryModel(BaseModel):
    delta: float
    value: float
    theta: Matrix
    v: Vector
    theta_norm: float
    v_norm: float
    are_residual: float
    iterations: int


class RegularizeResponse(BaseModel):
    entries: list[RegularizeEntryModel]
    converged: bool
    monotone: bool
    limit_estimate: float
    extrapolated: Optional[float] = None
    strategy_convergent: Optional[bool] = None


class SimulateRequest(BaseModel):
    problem: ProblemModel
    x0: Vector | FiniteFloat = 0.0
    estimator: Literal["cesaro", "abel"] = "cesaro"


class SimulateResponse(BaseModel):
    cesaro_mean: float
    cesaro_stderr: float
    abel_mean: float
    abel_stderr: float
    abel_valid: bool
    emp_m1: Vector
    emp_m1_stderr: Vector
    emp_m2: Matrix
    emp_m2_stderr: Matrix
    n_paths: int
    predicted_cost: Optional[float] = None


class ClassifyRequest(BaseModel):
    problem: ProblemModel
    pi0: Optional[Matrix] = None
    scan: bool = True
    conv_tol: FiniteFloat = 1e-6


class TraceSummaryModel(BaseModel):
    deltas: list[float]
    values: list[float]
    converged: bool
    monotone: bool
    extrapolated: Optional[float] = None
    strategy_convergent: Optional[bool] = None


class ClassifyResponse(BaseModel):
    status: str
    value: Optional[float] = None
    lower_bound: Optional[float] = None
    theta: Optional[Matrix] = None
    v: Optional[Vector] = None
    scalar: Optional[ScalarVerdictModel] = None
    trace: Optional[TraceSummaryModel] = None
    notes: list[str] = []


class ErrorBody(BaseModel):
    """Domain failures come back as HTTP 400 with this body."""

    error_kind: str
    message: str
    entries: Optional[list[RegularizeEntryModel]] = None
