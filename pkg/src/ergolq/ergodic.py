"""Solvers and the overall classification driver.

Three computational routes to the optimal (or infimal) average cost:

  * solve_positive_definite: jointly positive definite weights; the Riccati
    equation is solved by Newton-Kleinman and the optimal strategy follows
    in closed form.
  * solve_regularized / value_by_regularization: add delta * |u|^2 to the
    running cost, solve the now uniformly convex problem, and drive delta
    down a geometric schedule; the values decrease monotonically to the
    unregularized infimum when that is finite.
  * classify: orchestrates stabilizer search, certificates, scalar closed
    forms and regularization into a single report that never overclaims -
    divergence is reported descriptively, not as a proof of unboundedness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytic1d
from .errors import (
    ConfigError,
    Diverging,
    ErgolqError,
    NotPositiveDefinite,
    RiccatiError,
    SingularLinearSystem,
    StabilizerNotFound,
)
from .model import (
    CostWeights,
    LinearSystem,
    Strategy,
    check_compatible,
    find_stabilizer,
    is_stabilizer,
    stability_margin,
)
from .riccati import (
    DEFAULT_POLICY,
    PinvPolicy,
    control_curvature,
    newton_kleinman,
    finiteness_certificate,
    solvability_certificate,
)
from .stationary import adjoint_offset, ergodic_cost

STATUS_SOLVABLE = "solvable_with_strategy"
STATUS_FINITE = "finite_with_value"
STATUS_DIVERGED = "regularization_diverged"
STATUS_INCONCLUSIVE = "inconclusive"


def shifted_weights(weights: CostWeights, delta: float) -> CostWeights:
    """Weights with R replaced by R + delta I."""
    return CostWeights(
        Q=weights.Q,
        S=weights.S,
        R=weights.R + delta * np.eye(weights.m),
        q=weights.q,
        rho=weights.rho,
    )


def _joint_weight_block(weights: CostWeights) -> np.ndarray:
    return np.block([[weights.Q, weights.S.T], [weights.S, weights.R]])


def _cross_check_value(system, weights, strategy, value: float, what: str) -> None:
    direct = ergodic_cost(system, weights, strategy)
    if abs(direct - value) > 1e-8 * (1.0 + abs(value) + abs(direct)):
        raise ErgolqError(
            f"{what}: certificate value {value!r} disagrees with the "
            f"moment route {direct!r}"
        )


def solve_positive_definite(
    system: LinearSystem,
    weights: CostWeights,
    Theta_init: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> tuple[Strategy, float]:
    """Optimal strategy and value under jointly positive definite weights.

    The block matrix [[Q, S^T], [S, R]] must be positive definite.  The
    reported value is cross-checked against the stationary-moment route
    before being returned.
    """
    check_compatible(system, weights)
    blk = _joint_weight_block(weights)
    low = float(np.linalg.eigvalsh(blk)[0])
    if low <= 1e-12 * (1.0 + np.linalg.norm(blk, 2)):
        raise NotPositiveDefinite(
            f"joint weight block is not positive definite (smallest eigenvalue {low:.3e})"
        )
    if Theta_init is None:
        Theta_init = find_stabilizer(system)
    sol = newton_kleinman(system, weights, Theta_init, policy=policy)
    eta = adjoint_offset(system, weights, sol.Theta, sol.P)
    M = control_curvature(system, weights, sol.P)
    rhs = system.B.T @ eta + weights.rho
    for dk, s in zip(system.D, system.sigma):
        rhs = rhs + dk.T @ (sol.P @ s)
    v = -np.linalg.solve(M, rhs)
    value = 2.0 * float(eta @ system.b) - float(v @ M @ v)
    for s in system.sigma:
        value += float(s @ sol.P @ s)
    strategy = Strategy(Theta=sol.Theta, v=v)
    _cross_check_value(system, weights, strategy, value, "positive definite solve")
    return strategy, value


@dataclass(frozen=True)
class RegularizedSolution:
    """Solution of the problem with running cost g + delta |u|^2."""

    delta: float
    P: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray
    v: np.ndarray
    value: float
    are_residual: float
    iterations: int


def solve_regularized(
    system: LinearSystem,
    weights: CostWeights,
    delta: float,
    Theta_init: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> RegularizedSolution:
    """Solve the control-penalized problem at a fixed level delta > 0."""
    if delta <= 0.0:
        raise ConfigError("delta must be positive")
    check_compatible(system, weights)
    wd = shifted_weights(weights, delta)
    if Theta_init is None:
        Theta_init = find_stabilizer(system)
    sol = newton_kleinman(system, wd, Theta_init, policy=policy)
    eta = adjoint_offset(system, wd, sol.Theta, sol.P)
    M = control_curvature(system, wd, sol.P)
    rhs = system.B.T @ eta + wd.rho
    for dk, s in zip(system.D, system.sigma):
        rhs = rhs + dk.T @ (sol.P @ s)
    v = -np.linalg.solve(M, rhs)
    value = 2.0 * float(eta @ system.b) - float(v @ M @ v)
    for s in system.sigma:
        value += float(s @ sol.P @ s)
    strategy = Strategy(Theta=sol.Theta, v=v)
    _cross_check_value(system, wd, strategy, value, f"regularized solve at delta={delta:g}")
    return RegularizedSolution(
        delta=delta,
        P=sol.P,
        Theta=sol.Theta,
        eta=eta,
        v=v,
        value=value,
        are_residual=sol.residual,
        iterations=sol.iterations,
    )


def default_schedule(first: float = 1e-2, ratio: float = 0.25, count: int = 12) -> tuple:
    return tuple(first * ratio**j for j in range(count))


@dataclass(frozen=True)
class RegularizationTrace:
    """Outcome of driving the penalty level down a schedule.

    limit_estimate is the last raw value (authoritative); extrapolated is a
    sqrt(delta) Richardson fit over the last three points, reported for
    diagnostics only.  strategy_convergent is a heuristic flag based on the
    relative movement of (Theta, v) over the final step.
    """

    entries: tuple
    converged: bool
    monotone: bool
    limit_estimate: float
    extrapolated: float | None
    strategy_convergent: bool | None

    @property
    def deltas(self) -> tuple:
        return tuple(e.delta for e in self.entries)

    @property
    def values(self) -> tuple:
        return tuple(e.value for e in self.entries)


def _extrapolate_sqrt(entries) -> float | None:
    if len(entries) < 3:
        return None
    pts = entries[-3:]
    x = np.array([np.sqrt(e.delta) for e in pts])
    y = np.array([e.value for e in pts])
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def _strategy_movement(prev, last) -> float:
    dth = np.linalg.norm(last.Theta - prev.Theta) / (1.0 + np.linalg.norm(last.Theta))
    dv = np.linalg.norm(last.v - prev.v) / (1.0 + np.linalg.norm(last.v))
    return max(dth, dv)


def _assemble_trace(entries, conv_tol: float):
    values = [e.value for e in entries]
    decs = [a - b for a, b in zip(values, values[1:])]
    tol_here = conv_tol * (1.0 + abs(values[-1]))
    converged = len(decs) >= 2 and abs(decs[-1]) <= tol_here and abs(decs[-2]) <= tol_here
    monotone = all(d >= -1e-10 * (1.0 + abs(v)) for d, v in zip(decs, values))
    move = _strategy_movement(entries[-2], entries[-1]) if len(entries) >= 2 else None
    trace = RegularizationTrace(
        entries=tuple(entries),
        converged=converged,
        monotone=monotone,
        limit_estimate=values[-1],
        extrapolated=_extrapolate_sqrt(entries),
        strategy_convergent=None if move is None else bool(move <= 0.05),
    )
    return trace, decs, tol_here


def value_by_regularization(
    system: LinearSystem,
    weights: CostWeights,
    schedule=None,
    conv_tol: float = 1e-6,
    Theta_init: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> RegularizationTrace:
    """Run the penalty schedule and report the limiting value.

    The schedule must be positive and strictly decreasing (default: 12
    levels from 1e-2 with ratio 1/4).  Convergence requires the last two
    decrements to fall below conv_tol * (1 + |value|).  Divergence (values
    falling with growing decrements) raises Diverging with the partial
    trace attached; it is detected mid-schedule after two consecutive
    growth events, before the penalty gets small enough to poison the
    arithmetic.  An undecided trace is returned with converged=False.
    """
    if schedule is None:
        schedule = default_schedule()
    schedule = tuple(float(d) for d in schedule)
    if not schedule or any(d <= 0.0 for d in schedule):
        raise ConfigError("schedule must contain positive levels")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("schedule must be strictly decreasing")
    if Theta_init is None:
        Theta_init = find_stabilizer(system)

    entries = []
    warm = Theta_init
    for delta in schedule:
        ent = solve_regularized(system, weights, delta, Theta_init=warm, policy=policy)
        entries.append(ent)
        warm = ent.Theta
        if len(entries) >= 4:
            trace, decs, tol_here = _assemble_trace(entries, conv_tol)
            if (
                decs[-1] > tol_here
                and decs[-1] >= 1.5 * decs[-2] > 0.0
                and decs[-2] >= 1.5 * decs[-3] > 0.0
            ):
                raise Diverging(
                    f"regularized values fall with growing decrements "
                    f"({decs[-3]:.3e}, {decs[-2]:.3e}, {decs[-1]:.3e}); "
                    f"stopped at delta={delta:g}",
                    trace=trace,
                )

    trace, decs, tol_here = _assemble_trace(entries, conv_tol)
    diverging = (
        not trace.converged
        and len(decs) >= 2
        and decs[-1] > tol_here
        and decs[-1] >= 1.5 * decs[-2] > 0.0
    )
    if diverging:
        raise Diverging(
            f"regularized values fall without stabilizing (last decrement "
            f"{decs[-1]:.3e} vs previous {decs[-2]:.3e})",
            trace=trace,
        )
    return trace


@dataclass(frozen=True)
class ClassifyOptions:
    """Tuning knobs for classify; all optional.

    P0: user-supplied certificate candidate (symmetric n x n).
    free / kernel_shift: selectors inside degenerate minimizer families.
    schedule / conv_tol: forwarded to the regularization driver.
    scan: enable the built-in candidate scan when P0 fails or is absent.
    """

    P0: np.ndarray | None = None
    free: np.ndarray | None = None
    kernel_shift: np.ndarray | None = None
    schedule: tuple | None = None
    conv_tol: float = 1e-6
    scan: bool = True


@dataclass(frozen=True)
class Report:
    """Everything classify found out, in one place.

    status is one of solvable_with_strategy, finite_with_value,
    regularization_diverged, inconclusive.  Divergence describes the
    regularization trace; it is never presented as a proof that no finite
    value exists.
    """

    status: str
    value: float | None = None
    lower_bound: float | None = None
    strategy: Strategy | None = None
    solvability: object | None = None
    finiteness: object | None = None
    trace: RegularizationTrace | None = None
    scalar_verdict: analytic1d.Verdict1D | None = None
    notes: tuple = ()


def _is_scalar(system: LinearSystem) -> bool:
    return system.n == 1 and system.m == 1 and system.d == 1


def drift_control_family(system, weights):
    """The scalar drift-control closed forms, when the data fits them."""
    if not _is_scalar(system):
        return None
    if system.D[0][0, 0] != 0.0 or system.B[0, 0] != 1.0:
        return None
    if weights.R[0, 0] != 0.0 or weights.q[0] != 0.0 or weights.rho[0] != 0.0:
        return None
    return analytic1d.DriftControlFamily(
        A=system.A[0, 0],
        C=system.C[0][0, 0],
        b=system.b[0],
        sigma=system.sigma[0][0],
        Q=weights.Q[0, 0],
        S=weights.S[0, 0],
    )


def noise_control_family(system, weights):
    """The scalar noise-control closed forms, when the data fits them."""
    if not _is_scalar(system) or system.D[0][0, 0] == 0.0:
        return None
    return analytic1d.NoiseControlFamily(
        A=system.A[0, 0],
        B=system.B[0, 0],
        C=system.C[0][0, 0],
        D=system.D[0][0, 0],
        Q=weights.Q[0, 0],
        S=weights.S[0, 0],
        R=weights.R[0, 0],
        b=system.b[0],
        sigma=system.sigma[0][0],
        q=weights.q[0],
        rho=weights.rho[0],
    )


def certificate_seeds(system, weights, theta_s, nk_solution, options):
    """Deterministic candidate list for the finiteness certificate scan."""
    n = system.n
    cands = []
    if options.P0 is not None:
        cands.append(np.asarray(options.P0, dtype=float))
    if nk_solution is not None:
        cands.append(nk_solution.P)
    # exact cancellation of the gain numerator when R and D vanish
    if system.B.shape[0] == system.B.shape[1]:
        try:
            cand = np.linalg.solve(system.B.T, -weights.S)
            if np.linalg.norm(cand - cand.T) <= 1e-9 * (1.0 + np.linalg.norm(cand)):
                cands.append(0.5 * (cand + cand.T))
        except np.linalg.LinAlgError:
            pass
    fam = noise_control_family(system, weights)
    if fam is not None:
        alpha, beta, gamma = fam.invariants()
        base = -weights.R[0, 0] / system.D[0][0, 0] ** 2
        cands.append(np.array([[base]]))
        if alpha > 0.0:
            root = np.sqrt(gamma / alpha)
            cands.append(np.array([[root + base]]))
            cands.append(np.array([[-root + base]]))
    if options.scan:
        scale = 1.0 + np.linalg.norm(weights.Q, 2) + np.linalg.norm(weights.R, 2)
        if n == 1:
            grid = np.linspace(-10.0, 10.0, 81)
        else:
            grid = np.array([0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0])
        for s in (1.0, scale):
            for c in grid:
                cands.append(c * s * np.eye(n))
    return cands


def classify(
    system: LinearSystem,
    weights: CostWeights,
    options: ClassifyOptions | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> Report:
    """Classify the problem: solvable, finite, diverging, or inconclusive.

    Pipeline: stabilizer search, then (in order) the positive definite fast
    path, a Newton-Kleinman attempt on the original weights followed by a
    solvability certificate, scalar closed-form verdicts, a finiteness
    certificate scan, and finally the regularization drive.  Certificates
    carry their residuals into the report.
    """
    check_compatible(system, weights)
    if options is None:
        options = ClassifyOptions()
    notes: list[str] = []

    try:
        theta_s = find_stabilizer(system)
    except StabilizerNotFound as exc:
        return Report(
            status=STATUS_INCONCLUSIVE,
            notes=(f"stabilizer search failed: {exc}",),
        )
    notes.append(
        f"found stabilizing gain with margin {stability_margin(system, theta_s):.6g}"
    )

    blk = _joint_weight_block(weights)
    jointly_pd = float(np.linalg.eigvalsh(blk)[0]) > 1e-12 * (1.0 + np.linalg.norm(blk, 2))
    if jointly_pd:
        notes.append("joint weight block is positive definite")

    nk_solution = None
    try:
        nk_solution = newton_kleinman(system, weights, theta_s, policy=policy)
        notes.append(
            f"Riccati iteration converged on the original weights "
            f"(residual {nk_solution.residual:.3e}, {nk_solution.iterations} steps)"
        )
    except (RiccatiError, SingularLinearSystem) as exc:
        notes.append(f"Riccati iteration on the original weights failed: {exc}")

    scalar_verdict = None
    fam_drift = drift_control_family(system, weights)
    fam_noise = noise_control_family(system, weights)
    if fam_drift is not None:
        scalar_verdict = fam_drift.classify()
        notes.append(
            f"scalar drift-control verdict: case {scalar_verdict.case_label}, "
            f"{scalar_verdict.description}"
        )
    elif fam_noise is not None:
        try:
            scalar_verdict = fam_noise.classify()
            notes.append(
                f"scalar noise-control verdict: case {scalar_verdict.case_label}, "
                f"{scalar_verdict.description}"
            )
        except StabilizerNotFound as exc:
            notes.append(f"scalar noise-control verdict unavailable: {exc}")

    # solvability via a Riccati solution on the original weights
    if nk_solution is not None:
        cert = solvability_certificate(
            system,
            weights,
            nk_solution.P,
            free=options.free,
            kernel_shift=options.kernel_shift,
            policy=policy,
        )
        if cert.ok:
            strategy = Strategy(Theta=cert.Theta, v=cert.v)
            _cross_check_value(system, weights, strategy, cert.value, "classify")
            return Report(
                status=STATUS_SOLVABLE,
                value=cert.value,
                lower_bound=cert.value,
                strategy=strategy,
                solvability=cert,
                scalar_verdict=scalar_verdict,
                notes=tuple(notes),
            )
        notes.append(
            f"solvability certificate at the Riccati solution failed: "
            f"{cert.condition} ({cert.residual:.3e})"
        )

    # scalar degenerate-curvature solvable branches
    if scalar_verdict is not None and scalar_verdict.solvable:
        if fam_drift is not None:
            candidate = np.array([[-weights.S[0, 0]]])  # cancels the gain numerator
            cert = solvability_certificate(
                system, weights, candidate, free=theta_s, policy=policy
            )
            if cert.ok:
                strategy = Strategy(Theta=cert.Theta, v=cert.v)
                _cross_check_value(system, weights, strategy, cert.value, "classify")
                return Report(
                    status=STATUS_SOLVABLE,
                    value=cert.value,
                    lower_bound=cert.value,
                    strategy=strategy,
                    solvability=cert,
                    scalar_verdict=scalar_verdict,
                    notes=tuple(notes),
                )
            # row I with attained infimum: build the strategy from closed forms
            if scalar_verdict.case_label == "I":
                theta0 = float(theta_s[0, 0])
                v0 = fam_drift.optimal_v(theta0)
                strategy = Strategy(Theta=np.array([[theta0]]), v=np.array([v0]))
                value = scalar_verdict.value
                _cross_check_value(system, weights, strategy, value, "scalar drift route")
                return Report(
                    status=STATUS_SOLVABLE,
                    value=value,
                    lower_bound=value,
                    strategy=strategy,
                    scalar_verdict=scalar_verdict,
                    notes=tuple(notes),
                )
        if fam_noise is not None and scalar_verdict.case_label == "II":
            base = -weights.R[0, 0] / system.D[0][0, 0] ** 2
            cert = solvability_certificate(
                system, weights, np.array([[base]]), free=theta_s, policy=policy
            )
            if cert.ok:
                strategy = Strategy(Theta=cert.Theta, v=cert.v)
                _cross_check_value(system, weights, strategy, cert.value, "classify")
                return Report(
                    status=STATUS_SOLVABLE,
                    value=cert.value,
                    lower_bound=cert.value,
                    strategy=strategy,
                    solvability=cert,
                    scalar_verdict=scalar_verdict,
                    notes=tuple(notes),
                )
            notes.append(
                f"degenerate-curvature solvability failed: {cert.condition} "
                f"({cert.residual:.3e})"
            )

    # finiteness certificate scan
    finite_cert = None
    for cand in certificate_seeds(system, weights, theta_s, nk_solution, options):
        for free in (None, theta_s):
            cert = finiteness_certificate(system, weights, cand, free=free, policy=policy)
            if cert.ok:
                finite_cert = cert
                break
        if finite_cert is not None:
            break
    if finite_cert is not None:
        notes.append(
            f"finiteness certificate found (lower bound {finite_cert.lower_bound:.12g})"
        )
    else:
        notes.append("no finiteness certificate found among the scanned candidates")

    # regularization drive
    trace = None
    try:
        trace = value_by_regularization(
            system,
            weights,
            schedule=options.schedule,
            conv_tol=options.conv_tol,
            Theta_init=theta_s,
            policy=policy,
        )
    except Diverging as exc:
        return Report(
            status=STATUS_DIVERGED,
            lower_bound=None if finite_cert is None else finite_cert.lower_bound,
            finiteness=finite_cert,
            trace=exc.trace,
            scalar_verdict=scalar_verdict,
            notes=tuple(notes + [f"regularization diverged: {exc}"]),
        )
    except (RiccatiError, SingularLinearSystem, StabilizerNotFound) as exc:
        notes.append(f"regularization failed: {exc}")

    if trace is not None and trace.converged and finite_cert is not None:
        return Report(
            status=STATUS_FINITE,
            value=trace.limit_estimate,
            lower_bound=finite_cert.lower_bound,
            finiteness=finite_cert,
            trace=trace,
            scalar_verdict=scalar_verdict,
            notes=tuple(notes),
        )
    if trace is not None:
        state = "converged" if trace.converged else "did not settle"
        why = (
            "no certificate backs a conclusion"
            if finite_cert is None
            else "convergence was not reached"
        )
        notes.append(
            f"regularized values {state} (last value {trace.limit_estimate:.12g}); {why}"
        )
    return Report(
        status=STATUS_INCONCLUSIVE,
        lower_bound=None if finite_cert is None else finite_cert.lower_bound,
        finiteness=finite_cert,
        trace=trace,
        scalar_verdict=scalar_verdict,
        notes=tuple(notes),
    )
