"""HTTP front door for the solver library.

Every endpoint takes a problem document (same format as the problem
files) plus endpoint-specific options, and returns plain JSON.  Domain
failures map to HTTP 400 with an ErrorBody whose error_kind is stable
API; validation failures surface as FastAPI's usual 422.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__, ergodic, problemfile
from ..errors import (
    ConfigError,
    DimensionError,
    Diverging,
    ErgolqError,
    LostPositivity,
    LostStability,
    MaxIterations,
    NotPositiveDefinite,
    NotStabilizing,
    NumericalBlowup,
    ProblemFormatError,
    RangeViolation,
    RiccatiError,
    SingularLinearSystem,
    StabilizerNotFound,
)
from ..model import Strategy, find_stabilizer, is_stabilizer, stability_margin
from ..riccati import (
    finiteness_certificate,
    newton_kleinman,
    solvability_certificate,
)
from ..simulate import SimConfig, path_stats
from ..stationary import cost_representation, ergodic_cost, stationary_moments
from . import schemas

_KINDS = (
    (ProblemFormatError, "problem_format"),
    (DimensionError, "dimension"),
    (StabilizerNotFound, "stabilizer_not_found"),
    (NotStabilizing, "not_stabilizing"),
    (Diverging, "diverging"),
    (NotPositiveDefinite, "not_positive_definite"),
    (RangeViolation, "range_violation"),
    (SingularLinearSystem, "singular_linear_system"),
    (NumericalBlowup, "numerical_blowup"),
    (ConfigError, "config"),
    (LostPositivity, "lost_positivity"),
    (LostStability, "lost_stability"),
    (MaxIterations, "max_iterations"),
    (RiccatiError, "riccati"),
    (ErgolqError, "internal"),
)


def error_kind(exc: ErgolqError) -> str:
    for cls, kind in _KINDS:
        if isinstance(exc, cls):
            return kind
    return "internal"


def _mat(x) -> list | None:
    return None if x is None else np.asarray(x, dtype=float).tolist()


def _entry_model(ent) -> schemas.RegularizeEntryModel:
    return schemas.RegularizeEntryModel(
        delta=ent.delta,
        value=ent.value,
        theta=ent.Theta.tolist(),
        v=ent.v.tolist(),
        theta_norm=float(np.linalg.norm(ent.Theta)),
        v_norm=float(np.linalg.norm(ent.v)),
        are_residual=ent.are_residual,
        iterations=ent.iterations,
    )


def _cert_model(cert, kind: str) -> schemas.CertificateModel:
    if not cert.ok:
        return schemas.CertificateModel(
            ok=False, kind=kind, condition=cert.condition, residual=cert.residual
        )
    value = cert.value if kind == "solvability" else cert.lower_bound
    return schemas.CertificateModel(
        ok=True,
        kind=kind,
        value=value,
        P=_mat(cert.P),
        Theta=_mat(cert.Theta),
        eta=_mat(cert.eta),
        v=_mat(getattr(cert, "v", None)),
        residuals={k: float(val) for k, val in cert.residuals.items()},
    )


def _scalar_model(system, weights) -> schemas.ScalarVerdictModel | None:
    fam = ergodic.drift_control_family(system, weights)
    family = "drift_control"
    if fam is None:
        fam = ergodic.noise_control_family(system, weights)
        family = "noise_control"
    if fam is None:
        return None
    try:
        verdict = fam.classify()
    except StabilizerNotFound:
        return None
    return schemas.ScalarVerdictModel(
        family=family,
        case_label=verdict.case_label,
        finite=verdict.finite,
        solvable=verdict.solvable,
        value=verdict.value,
        description=verdict.description,
        details={k: v for k, v in verdict.details.items()},
    )


def _strategy_for(problem, theta, v) -> Strategy:
    if theta is not None:
        Theta = np.asarray(theta, dtype=float)
        vv = np.zeros(Theta.shape[0]) if v is None else np.asarray(v, dtype=float)
        return Strategy(Theta=Theta, v=vv)
    if problem.strategy is None:
        raise ProblemFormatError(
            "no strategy: provide one in the problem file or as an override"
        )
    if v is not None:
        return Strategy(Theta=problem.strategy.Theta, v=np.asarray(v, dtype=float))
    return problem.strategy


def create_app() -> FastAPI:
    app = FastAPI(title="ergolq", version=__version__)

    @app.exception_handler(ErgolqError)
    async def _domain_error(request, exc: ErgolqError):
        body = schemas.ErrorBody(error_kind=error_kind(exc), message=str(exc))
        if isinstance(exc, Diverging) and exc.trace is not None:
            body.entries = [_entry_model(e) for e in exc.trace.entries]
        return JSONResponse(status_code=400, content=body.model_dump(exclude_none=True))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc: RequestValidationError):
        # the default handler echoes offending inputs verbatim; a non-finite
        # float in the request would then crash the JSON renderer, so stringify
        errors = []
        for err in exc.errors():
            err = dict(err)
            if "input" in err:
                err["input"] = repr(err["input"])
            if "ctx" in err:
                err["ctx"] = {k: repr(v) for k, v in err["ctx"].items()}
            err.pop("url", None)
            errors.append(err)
        return JSONResponse(status_code=422, content={"detail": errors})

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/check", response_model=schemas.CheckResponse)
    def check(req: schemas.CheckRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        notes: list[str] = []

        theta = None
        if problem.strategy is not None and is_stabilizer(system, problem.strategy.Theta):
            theta = problem.strategy.Theta
            notes.append("gain from the problem file stabilizes the closed loop")
        else:
            try:
                theta = find_stabilizer(system)
                notes.append("stabilizing gain found by subgradient search")
            except StabilizerNotFound as exc:
                notes.append(f"stabilizer search failed: {exc}")
        margin = None if theta is None else stability_margin(system, theta)

        blk = np.block([[weights.Q, weights.S.T], [weights.S, weights.R]])
        pd = bool(
            float(np.linalg.eigvalsh(blk)[0]) > 1e-12 * (1.0 + np.linalg.norm(blk, 2))
        )
        if pd:
            notes.append("joint weight block is positive definite: direct solve available")

        nk = None
        solv = None
        if theta is not None:
            try:
                nk = newton_kleinman(system, weights, theta)
                notes.append(
                    f"Riccati iteration converged (residual {nk.residual:.3e}, "
                    f"{nk.iterations} steps)"
                )
                cert = solvability_certificate(system, weights, nk.P)
                solv = _cert_model(cert, "solvability")
                if not cert.ok:
                    notes.append(f"solvability certificate failed: {cert.condition}")
            except (RiccatiError, SingularLinearSystem, NotStabilizing) as exc:
                notes.append(f"Riccati iteration failed: {exc}")

        fin = None
        if req.pi0 is not None:
            p0 = np.asarray(req.pi0, dtype=float)
            cert = finiteness_certificate(system, weights, p0)
            if not cert.ok and theta is not None:
                retry = finiteness_certificate(system, weights, p0, free=theta)
                if retry.ok:
                    cert = retry
            fin = _cert_model(cert, "finiteness")
            if not cert.ok:
                notes.append(f"finiteness certificate at the supplied P0 failed: {cert.condition}")
            if solv is None or not solv.ok:
                cert_s = solvability_certificate(
                    system, weights, p0, free=theta if theta is not None else None
                )
                if cert_s.ok or solv is None:
                    solv = _cert_model(cert_s, "solvability")
        if (fin is None or not fin.ok) and req.scan:
            opts = ergodic.ClassifyOptions(
                P0=None if req.pi0 is None else np.asarray(req.pi0, dtype=float)
            )
            frees = (None,) if theta is None else (None, theta)
            for cand in ergodic.certificate_seeds(system, weights, theta, nk, opts):
                hit = None
                for free in frees:
                    cert = finiteness_certificate(system, weights, cand, free=free)
                    if cert.ok:
                        hit = cert
                        break
                if hit is not None:
                    fin = _cert_model(hit, "finiteness")
                    notes.append(
                        f"finiteness certificate found by scan "
                        f"(lower bound {hit.lower_bound:.12g})"
                    )
                    break
            else:
                notes.append("certificate scan found no finiteness witness")

        return schemas.CheckResponse(
            stabilizer=_mat(theta),
            stability_margin=margin,
            positive_definite=pd,
            riccati_residual=None if nk is None else nk.residual,
            riccati_iterations=None if nk is None else nk.iterations,
            solvability=solv,
            finiteness=fin,
            scalar=_scalar_model(system, weights),
            notes=notes,
        )

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        strategy = _strategy_for(problem, req.theta, req.v)
        if not is_stabilizer(system, strategy.Theta):
            raise NotStabilizing("the supplied gain is not a mean-square stabilizer")
        moments = stationary_moments(system, strategy)
        cost = ergodic_cost(system, weights, strategy)
        rep_err = None
        if req.probes > 0:
            rng = np.random.default_rng(req.probe_seed)
            rep_err = 0.0
            for _ in range(req.probes):
                raw = rng.standard_normal((system.n, system.n))
                probe = 0.5 * (raw + raw.T)
                rep = cost_representation(system, weights, strategy, probe)
                rep_err = max(rep_err, abs(rep - cost))
        return schemas.EvalResponse(
            cost=cost,
            m1=moments.m1.tolist(),
            m2=moments.m2.tolist(),
            theta=strategy.Theta.tolist(),
            v=strategy.v.tolist(),
            stability_margin=stability_margin(system, strategy.Theta),
            representation_error=rep_err,
        )

    @app.post("/solve", response_model=schemas.SolveResponse)
    def solve(req: schemas.SolveRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        theta_init = None
        if problem.strategy is not None and is_stabilizer(system, problem.strategy.Theta):
            theta_init = problem.strategy.Theta
        strategy, value = ergodic.solve_positive_definite(
            system, weights, Theta_init=theta_init
        )
        return schemas.SolveResponse(
            value=value, theta=strategy.Theta.tolist(), v=strategy.v.tolist()
        )

    @app.post("/regularize", response_model=schemas.RegularizeResponse)
    def regularize(req: schemas.RegularizeRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        schedule = req.schedule if req.schedule is not None else problem.schedule
        theta_init = None
        if problem.strategy is not None and is_stabilizer(system, problem.strategy.Theta):
            theta_init = problem.strategy.Theta
        trace = ergodic.value_by_regularization(
            system,
            weights,
            schedule=schedule,
            conv_tol=req.conv_tol,
            Theta_init=theta_init,
        )
        return schemas.RegularizeResponse(
            entries=[_entry_model(e) for e in trace.entries],
            converged=trace.converged,
            monotone=trace.monotone,
            limit_estimate=trace.limit_estimate,
            extrapolated=trace.extrapolated,
            strategy_convergent=trace.strategy_convergent,
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        strategy = _strategy_for(problem, None, None)
        cfg = problem.sim if problem.sim is not None else SimConfig()
        if req.estimator == "abel" and cfg.abel_lambda * cfg.horizon_t < 20.0:
            raise ConfigError(
                "horizon too short for the requested discount rate: need "
                "abel_lambda * horizon_t >= 20"
            )
        x0 = np.asarray(req.x0, dtype=float)
        stats = path_stats(system, weights, strategy, x0, cfg)
        try:
            predicted = ergodic_cost(system, weights, strategy)
        except ErgolqError:
            predicted = None
        return schemas.SimulateResponse(
            cesaro_mean=stats.cesaro_mean,
            cesaro_stderr=stats.cesaro_stderr,
            abel_mean=stats.abel_mean,
            abel_stderr=stats.abel_stderr,
            abel_valid=cfg.abel_lambda * cfg.horizon_t >= 20.0,
            emp_m1=stats.emp_m1.tolist(),
            emp_m1_stderr=stats.emp_m1_stderr.tolist(),
            emp_m2=stats.emp_m2.tolist(),
            emp_m2_stderr=stats.emp_m2_stderr.tolist(),
            n_paths=stats.n_paths,
            predicted_cost=predicted,
        )

    @app.post("/classify", response_model=schemas.ClassifyResponse)
    def classify(req: schemas.ClassifyRequest):
        problem = req.problem.to_domain()
        system, weights = problem.system, problem.weights
        options = ergodic.ClassifyOptions(
            P0=None if req.pi0 is None else np.asarray(req.pi0, dtype=float),
            schedule=problem.schedule,
            conv_tol=req.conv_tol,
            scan=req.scan,
        )
        report = ergodic.classify(system, weights, options)
        scalar = None
        if report.scalar_verdict is not None:
            family = (
                "drift_control"
                if ergodic.drift_control_family(system, weights) is not None
                else "noise_control"
            )
            verdict = report.scalar_verdict
            scalar = schemas.ScalarVerdictModel(
                family=family,
                case_label=verdict.case_label,
                finite=verdict.finite,
                solvable=verdict.solvable,
                value=verdict.value,
                description=verdict.description,
                details={k: v for k, v in verdict.details.items()},
            )
        trace = None
        if report.trace is not None:
            trace = schemas.TraceSummaryModel(
                deltas=list(report.trace.deltas),
                values=list(report.trace.values),
                converged=report.trace.converged,
                monotone=report.trace.monotone,
                extrapolated=report.trace.extrapolated,
                strategy_convergent=report.trace.strategy_convergent,
            )
        return schemas.ClassifyResponse(
            status=report.status,
            value=report.value,
            lower_bound=report.lower_bound,
            theta=None if report.strategy is None else report.strategy.Theta.tolist(),
            v=None if report.strategy is None else report.strategy.v.tolist(),
            scalar=scalar,
            trace=trace,
            notes=list(report.notes),
        )

    return app


app = create_app()
