"""Stateless HTTP service over the power engine.

JSON request/response bodies mirror the CLI vocabulary; every endpoint is a
pure function of its body, so interleaved requests behave like serial ones.
Validation failures come back as 400 with machine-readable codes and
field-level diagnostics. Long-running simulation is CLI-only by design.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from .design import DesignError, build_balanced_design, parse_design_matrix, render_design_matrix
from .power import PowerRequest, evaluate_power, sensitivity_grid, solve_clusters
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0
from .varengine import treatment_effect_variance

app = FastAPI(title="swpower", version="1")
app.add_middleware(
    CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
)


class DesignBody(BaseModel):
    """Balanced layout by default; ``matrix`` uploads an explicit schedule."""

    J: int = Field(ge=2)
    m: int = Field(ge=1)
    n: int | None = Field(default=None, ge=1)
    matrix: str | None = None


class StudyBody(BaseModel):
    design: DesignBody
    beta: float
    beta0: float = 0.0
    tau_w: float | None = None
    tau_b: float | None = None
    rho_w: float | None = None
    rho_b: float | None = None
    pa: float = Field(gt=0, lt=1)
    trend: float = 0.0
    c_star: float = Field(default=1.0, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    dof_rule: Literal["n-1", "n-2", "normal"] = "n-2"

    @model_validator(mode="after")
    def _one_correlation_mode(self):
        kendall = self.tau_w is not None or self.tau_b is not None
        direct = self.rho_w is not None or self.rho_b is not None
        if kendall and direct:
            raise ValueError("give either Kendall's taus or direct g-ICCs, not both")
        return self

    def correlation(self) -> CorrelationSpec:
        if self.rho_w is not None or self.rho_b is not None:
            return CorrelationSpec(mode="gicc", rho_w=self.rho_w or 0.0, rho_b=self.rho_b or 0.0)
        return CorrelationSpec(mode="kendall", tau_w=self.tau_w or 0.0, tau_b=self.tau_b or 0.0)

    def request(self, need_n: bool = True) -> PowerRequest:
        body = self.design
        if body.matrix is not None:
            design = parse_design_matrix(body.matrix, m=body.m)
            if design.J != body.J:
                raise ValueError(f"J={body.J} disagrees with the uploaded design ({design.J} periods)")
        else:
            if need_n and body.n is None:
                raise ValueError("n is required unless a design matrix is uploaded")
            design = build_balanced_design(body.J, body.n if body.n is not None else body.J - 1, m=body.m)
        corr = self.correlation()
        hazard = HazardSpec(
            lambda0=solve_lambda0(self.pa, self.c_star),
            beta=self.beta,
            trend="constant" if self.trend == 0 else "additive",
            trend_delta=self.trend,
            p_a=self.pa,
        )
        methods = ("wald_t",) if corr.mode == "gicc" else ("wald_t", "score_sm", "score_tang")
        return PowerRequest(
            design=design,
            hazard=hazard,
            censoring=CensoringSpec(c_star=self.c_star),
            corr=corr,
            beta1=self.beta,
            beta0=self.beta0,
            alpha=self.alpha,
            dof_rule=self.dof_rule,
            methods=methods,
        )


class SampleSizeBody(StudyBody):
    target_power: float = Field(gt=0, lt=1)


class SensitivityBody(StudyBody):
    tau_w_values: list[float]
    ratio_values: list[float]


class DesignMatrixBody(BaseModel):
    matrix: str
    m: int = Field(default=1, ge=1)


def _bad_request(code: str, message: str, field: str | None = None) -> JSONResponse:
    detail = {"code": code, "message": message}
    if field:
        detail["field"] = field
    return JSONResponse(status_code=400, content={"error": detail})


@app.exception_handler(ValueError)
async def _value_error(_, exc: ValueError):
    code = "invalid_design" if isinstance(exc, DesignError) else "invalid_parameters"
    return _bad_request(code, str(exc))


@app.exception_handler(RequestValidationError)
async def _schema_error(_, exc: RequestValidationError):
    fields = [
        {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
        for err in exc.errors()
    ]
    return JSONResponse(
        status_code=400,
        content={"error": {"code": "invalid_body", "message": "malformed request body", "fields": fields}},
    )


@app.post("/v1/power")
def post_power(body: StudyBody):
    req = body.request()
    result = evaluate_power(req)
    return {
        "powers": result.powers,
        "rho_w": result.variance.giccs.rho_w,
        "rho_b": result.variance.giccs.rho_b,
        "design_effect": result.variance.design_effect,
        "var_beta": result.variance.var_beta,
        "n": req.design.n,
        "sequences": [list(s) for s in req.design.sequences],
        "cluster_counts": list(req.design.cluster_counts),
    }


@app.post("/v1/samplesize")
def post_samplesize(body: SampleSizeBody):
    req = body.request(need_n=False)
    solution = solve_clusters(req, body.target_power)
    return {
        "wald": solution.clusters.get("wald_t"),
        "sm": solution.clusters.get("score_sm"),
        "tang": solution.clusters.get("score_tang"),
        "exact": solution.exact,
        "balanced": solution.balanced_ok,
        "sequences": [list(s) for s in req.design.sequences],
        "rho_w": solution.variance.giccs.rho_w,
        "rho_b": solution.variance.giccs.rho_b,
        "target_power": body.target_power,
    }


@app.post("/v1/gicc")
def post_gicc(body: StudyBody):
    req = body.request(need_n=False)
    if req.corr.mode != "kendall":
        return _bad_request("invalid_parameters", "g-ICC computation needs Kendall's taus", "tau_w")
    report = treatment_effect_variance(req.design, req.hazard, req.censoring, req.corr, beta1=req.beta1)
    return {
        "rho_w": report.giccs.rho_w,
        "rho_b": report.giccs.rho_b,
        "sum_upsilon0": report.giccs.sum_upsilon0,
        "design_effect": report.design_effect,
    }


@app.post("/v1/sensitivity")
def post_sensitivity(body: SensitivityBody):
    req = body.request()
    grids = sensitivity_grid(req, np.asarray(body.tau_w_values), np.asarray(body.ratio_values))
    return {
        "tau_w_values": body.tau_w_values,
        "ratio_values": body.ratio_values,
        "powers": {method: grid.tolist() for method, grid in grids.items()},
    }


@app.post("/v1/design/validate")
def post_design_validate(body: DesignMatrixBody):
    design = parse_design_matrix(body.matrix, m=body.m)
    return {
        "J": design.J,
        "n": design.n,
        "m": design.m,
        "sequences": [list(s) for s in design.sequences],
        "cluster_counts": list(design.cluster_counts),
        "canonical": render_design_matrix(design),
    }
