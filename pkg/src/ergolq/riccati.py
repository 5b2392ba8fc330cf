"""Riccati algebra, certificates, and the Newton-Kleinman solver.

Everything here revolves around a symmetric matrix P playing the role of a
candidate quadratic value coefficient.  Derived objects:

    curvature    M(P)    = R + sum_k D_k^T P D_k
    numerator    L(P)    = B^T P + sum_k D_k^T P C_k + S
    residual     Rc(P)   = P A + A^T P + sum_k C_k^T P C_k + Q
                           - L(P)^T M(P)^+ L(P)

A finiteness certificate at P (with offset eta) bounds the long-run average
cost from below for every admissible strategy; a solvability certificate
additionally requires Rc(P) = 0 and produces an optimal strategy together
with the optimal value.  Pseudoinverses are Moore-Penrose with a relative
truncation threshold, and each pseudoinverse application is preceded by an
explicit range check so that degenerate curvature cannot silently corrupt a
formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ErgolqError,
    LostPositivity,
    LostStability,
    MaxIterations,
    NotPositiveDefinite,
    NotStabilizing,
    RangeViolation,
    SingularLinearSystem,
)
from .model import (
    CostWeights,
    LinearSystem,
    check_compatible,
    is_stabilizer,
    stability_margin,
)
from .stationary import adjoint_offset


@dataclass(frozen=True)
class PinvPolicy:
    """Truncation policy for Moore-Penrose pseudoinverses.

    Singular values below rel_tol * sigma_max are treated as zero.  Range
    checks pass when the relative defect is at most 10 * rel_tol.
    """

    rel_tol: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-4):
            raise ValueError(f"rel_tol must lie in (0, 1e-4], got {self.rel_tol}")


DEFAULT_POLICY = PinvPolicy()


def pinv(M: np.ndarray, policy: PinvPolicy = DEFAULT_POLICY) -> np.ndarray:
    return np.linalg.pinv(np.asarray(M, dtype=float), rcond=policy.rel_tol)


@dataclass(frozen=True)
class RangeCheck:
    ok: bool
    defect: float


def check_range(
    Y: np.ndarray, M: np.ndarray, policy: PinvPolicy = DEFAULT_POLICY
) -> RangeCheck:
    """Does every column of Y lie in the range of M?

    Reports the relative defect ||(I - M M^+) Y|| / (1 + ||Y||); passes when
    it is at most 10 * policy.rel_tol.
    """
    Y = np.asarray(Y, dtype=float)
    M = np.asarray(M, dtype=float)
    proj = np.eye(M.shape[0]) - M @ pinv(M, policy)
    defect = float(np.linalg.norm(proj @ Y) / (1.0 + np.linalg.norm(Y)))
    return RangeCheck(ok=defect <= 10.0 * policy.rel_tol, defect=defect)


def control_curvature(
    system: LinearSystem, weights: CostWeights, P: np.ndarray
) -> np.ndarray:
    """R + sum_k D_k^T P D_k, the curvature of the cost in the control."""
    M = weights.R.copy()
    for dk in system.D:
        M = M + dk.T @ P @ dk
    return 0.5 * (M + M.T)


def gain_numerator(
    system: LinearSystem, weights: CostWeights, P: np.ndarray
) -> np.ndarray:
    """B^T P + sum_k D_k^T P C_k + S; the state-control coupling that the
    optimal gain has to cancel."""
    L = system.B.T @ P + weights.S
    for c, dk in zip(system.C, system.D):
        L = L + dk.T @ P @ c
    return L


def lyapunov_quadratic(
    system: LinearSystem,
    weights: CostWeights,
    Theta: np.ndarray,
    P: np.ndarray,
) -> np.ndarray:
    """Closed-loop quadratic coefficient attached to (Theta, P).

    Two algebraically equal expansions (closed-loop form and coupling form)
    are evaluated and required to agree to 1e-12 relative; disagreement
    would mean the surrounding algebra is broken, so it raises.
    """
    Theta = np.asarray(Theta, dtype=float)
    P = np.asarray(P, dtype=float)
    Acl = system.A + system.B @ Theta
    form1 = P @ Acl + Acl.T @ P + weights.Q
    form1 = form1 + weights.S.T @ Theta + Theta.T @ weights.S + Theta.T @ weights.R @ Theta
    for c, dk in zip(system.C, system.D):
        Ccl = c + dk @ Theta
        form1 = form1 + Ccl.T @ P @ Ccl

    L = gain_numerator(system, weights, P)
    M = control_curvature(system, weights, P)
    form2 = P @ system.A + system.A.T @ P + weights.Q
    form2 = form2 + L.T @ Theta + Theta.T @ L + Theta.T @ M @ Theta
    for c in system.C:
        form2 = form2 + c.T @ P @ c

    scale = 1.0 + np.linalg.norm(form1) + np.linalg.norm(form2)
    if np.linalg.norm(form1 - form2) > 1e-12 * scale:
        raise ErgolqError(
            "internal inconsistency: the two expansions of the closed-loop "
            "quadratic disagree"
        )
    return 0.5 * (form1 + form1.T)


def riccati_residual_matrix(
    system: LinearSystem,
    weights: CostWeights,
    P: np.ndarray,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> np.ndarray:
    """P A + A^T P + sum_k C_k^T P C_k + Q - L^T M^+ L, symmetrized.

    Zero exactly at solutions of the algebraic Riccati equation; positive
    semidefiniteness of this matrix is the inequality half of the
    finiteness certificate.
    """
    P = np.asarray(P, dtype=float)
    L = gain_numerator(system, weights, P)
    M = control_curvature(system, weights, P)
    out = P @ system.A + system.A.T @ P + weights.Q - L.T @ pinv(M, policy) @ L
    for c in system.C:
        out = out + c.T @ P @ c
    return 0.5 * (out + out.T)


def optimal_gain(
    system: LinearSystem,
    weights: CostWeights,
    P: np.ndarray,
    free: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> np.ndarray:
    """Gain minimizing the closed-loop quadratic at P.

    When the curvature M is singular the minimizers form an affine family
    -M^+ L + (I - M^+ M) free; requires the numerator to lie in the range
    of M and raises RangeViolation otherwise.
    """
    P = np.asarray(P, dtype=float)
    L = gain_numerator(system, weights, P)
    M = control_curvature(system, weights, P)
    rc = check_range(L, M, policy)
    if not rc.ok:
        raise RangeViolation(
            f"gain numerator is outside the range of the curvature "
            f"(defect {rc.defect:.3e})"
        )
    Mp = pinv(M, policy)
    Theta = -Mp @ L
    if free is not None:
        free = np.asarray(free, dtype=float)
        if free.shape != Theta.shape:
            raise ValueError(f"free term must have shape {Theta.shape}")
        Theta = Theta + (np.eye(M.shape[0]) - Mp @ M) @ free
    return Theta


def solve_generalized_lyapunov(
    Acl: np.ndarray, Ccl: tuple, rhs: np.ndarray
) -> np.ndarray:
    """Solve P Acl + Acl^T P + sum_k Ccl_k^T P Ccl_k + rhs = 0.

    Assembled by Kronecker vectorization (column-major); fine at the n <= 10
    scale this package targets.  The residual is verified after the solve.
    """
    Acl = np.asarray(Acl, dtype=float)
    n = Acl.shape[0]
    eye = np.eye(n)
    Lop = np.kron(Acl.T, eye) + np.kron(eye, Acl.T)
    for c in Ccl:
        c = np.asarray(c, dtype=float)
        Lop = Lop + np.kron(c.T, c.T)
    rhs = np.asarray(rhs, dtype=float)
    try:
        vec = np.linalg.solve(Lop, -rhs.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularLinearSystem(f"generalized Lyapunov solve: {exc}") from exc
    P = vec.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    resid = P @ Acl + Acl.T @ P + rhs
    for c in Ccl:
        resid = resid + c.T @ P @ c
    rn = float(np.linalg.norm(resid))
    if not np.isfinite(rn) or rn > 1e-10 * (1.0 + np.linalg.norm(P) + np.linalg.norm(rhs)):
        raise SingularLinearSystem(
            f"generalized Lyapunov solve unreliable (residual {rn:.3e})"
        )
    return P


@dataclass(frozen=True)
class AreSolution:
    """Converged Riccati solution with the induced stabilizing gain."""

    P: np.ndarray
    Theta: np.ndarray
    iterations: int
    residual: float
    residual_history: tuple = field(default=())


def newton_kleinman(
    system: LinearSystem,
    weights: CostWeights,
    Theta_init: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
    policy: PinvPolicy = DEFAULT_POLICY,
) -> AreSolution:
    """Newton-Kleinman iteration for the algebraic Riccati equation.

    Alternates a closed-loop generalized Lyapunov solve with the gain update
    Theta <- -M(P)^{-1} L(P).  Only the uniformly convex regime is handled:
    the curvature must stay positive definite at every iterate
    (LostPositivity otherwise), and every updated gain must remain a
    stabilizer (LostStability).  Accepts when the Riccati residual drops
    below tol * (1 + ||P||), or when the iteration stagnates at the
    double-precision floor while still meeting 1e-10 * (1 + ||P||).
    """
    check_compatible(system, weights)
    Theta = np.asarray(Theta_init, dtype=float)
    if not is_stabilizer(system, Theta):
        raise NotStabilizing("Newton-Kleinman needs a stabilizing initial gain")

    history: list[float] = []
    prev_P = None
    for k in range(max_iter):
        Acl = system.A + system.B @ Theta
        Ccl = tuple(c + dk @ Theta for c, dk in zip(system.C, system.D))
        G = weights.Q + weights.S.T @ Theta + Theta.T @ weights.S
        G = G + Theta.T @ weights.R @ Theta
        P = solve_generalized_lyapunov(Acl, Ccl, 0.5 * (G + G.T))

        M = control_curvature(system, weights, P)
        m_low = float(np.linalg.eigvalsh(M)[0])
        if m_low <= tol * (1.0 + np.linalg.norm(M, 2)):
            raise LostPositivity(
                f"control curvature lost positivity at iteration {k} "
                f"(smallest eigenvalue {m_low:.3e})"
            )
        L = gain_numerator(system, weights, P)
        K = np.linalg.solve(M, L)
        resid_mat = P @ system.A + system.A.T @ P + weights.Q - L.T @ K
        for c in system.C:
            resid_mat = resid_mat + c.T @ P @ c
        resid = float(np.linalg.norm(resid_mat))
        history.append(resid)

        scale = 1.0 + np.linalg.norm(P)
        stalled = (
            prev_P is not None
            and (resid >= 0.25 * history[-2] or np.linalg.norm(P - prev_P) <= 64 * np.finfo(float).eps * scale)
        )
        if resid <= tol * scale or (stalled and resid <= 1e-10 * scale):
            Theta_out = -K
            if not is_stabilizer(system, Theta_out):
                raise LostStability(
                    "converged Riccati solution induces a non-stabilizing gain"
                )
            return AreSolution(
                P=P,
                Theta=Theta_out,
                iterations=k + 1,
                residual=resid,
                residual_history=tuple(history),
            )
        Theta_new = -K
        if not is_stabilizer(system, Theta_new):
            raise LostStability(f"gain update left the stabilizer set at iteration {k}")
        Theta = Theta_new
        prev_P = P
    raise MaxIterations(
        f"Riccati residual still {history[-1]:.3e} after {max_iter} iterations"
    )


@dataclass(frozen=True)
class CertificateFailure:
    """First violated certificate condition, with its measured residual."""

    condition: str
    residual: float

    ok = False


@dataclass(frozen=True)
class FinitenessCertificate:
    """Witness (P, Theta, eta) that the average cost is bounded below.

    lower_bound is valid for every admissible strategy.
    """

    P: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray
    lower_bound: float
    residuals: dict

    ok = True


@dataclass(frozen=True)
class SolvabilityCertificate:
    """Witness that an optimal strategy exists, together with that strategy
    (Theta, v), the offset eta, and the optimal value."""

    P: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray
    v: np.ndarray
    value: float
    residuals: dict

    ok = True


def _offset_rhs(system, weights, Theta, P):
    rhs = P @ system.b + weights.q + Theta.T @ weights.rho
    for c, dk, s in zip(system.C, system.D, system.sigma):
        rhs = rhs + (c + dk @ Theta).T @ (P @ s)
    return rhs


def _noise_curvature_shift(system, weights, P):
    w = weights.rho.copy()
    for dk, s in zip(system.D, system.sigma):
        w = w + dk.T @ (P @ s)
    return w


def _noise_quadratic(system, P):
    return sum(float(s @ P @ s) for s in system.sigma)


def finiteness_certificate(
    system: LinearSystem,
    weights: CostWeights,
    P0: np.ndarray,
    free: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
):
    """Try to certify that the average cost is bounded below using P0.

    Conditions: curvature M(P0) and residual Rc(P0) positive semidefinite,
    gain numerator in the range of the curvature, and an offset eta0 whose
    two induced vectors land in the ranges of M(P0) and Rc(P0).  The offset
    is computed by stacked projected least squares (projectors onto the
    range complements of M and Rc), then both memberships are verified.
    Returns a FinitenessCertificate carrying the universal lower bound, or
    a CertificateFailure naming the first violated condition.
    """
    check_compatible(system, weights)
    P0 = np.asarray(P0, dtype=float)
    P0 = 0.5 * (P0 + P0.T)
    tol = 10.0 * policy.rel_tol

    M = control_curvature(system, weights, P0)
    m_low = float(np.linalg.eigvalsh(M)[0])
    if m_low < -tol * (1.0 + np.linalg.norm(M, 2)):
        return CertificateFailure("control curvature not positive semidefinite", m_low)

    L = gain_numerator(system, weights, P0)
    rc_gain = check_range(L, M, policy)
    if not rc_gain.ok:
        return CertificateFailure("gain numerator outside curvature range", rc_gain.defect)

    G = riccati_residual_matrix(system, weights, P0, policy)
    g_low = float(np.linalg.eigvalsh(G)[0])
    if g_low < -tol * (1.0 + np.linalg.norm(G, 2)):
        return CertificateFailure("riccati residual not positive semidefinite", g_low)

    Theta0 = optimal_gain(system, weights, P0, free=free, policy=policy)
    Acl0 = system.A + system.B @ Theta0

    Mp = pinv(M, policy)
    Gp = pinv(G, policy)
    proj_m = np.eye(system.m) - M @ Mp
    proj_g = np.eye(system.n) - G @ Gp
    w2 = _noise_curvature_shift(system, weights, P0)
    rhs0 = _offset_rhs(system, weights, Theta0, P0)
    lhs = np.vstack([proj_m @ system.B.T, proj_g @ Acl0.T])
    target = np.concatenate([-proj_m @ w2, -proj_g @ rhs0])
    eta0 = np.linalg.lstsq(lhs, target, rcond=None)[0]

    u2 = system.B.T @ eta0 + w2
    rc_u2 = check_range(u2, M, policy)
    if not rc_u2.ok:
        return CertificateFailure("offset misses curvature range", rc_u2.defect)
    u1 = Acl0.T @ eta0 + rhs0
    rc_u1 = check_range(u1, G, policy)
    if not rc_u1.ok:
        return CertificateFailure("offset misses residual range", rc_u1.defect)

    lower = -float(u1 @ Gp @ u1) - float(u2 @ Mp @ u2)
    lower += _noise_quadratic(system, P0) + 2.0 * float(eta0 @ system.b)
    return FinitenessCertificate(
        P=P0,
        Theta=Theta0,
        eta=eta0,
        lower_bound=lower,
        residuals={
            "curvature_min_eig": m_low,
            "residual_min_eig": g_low,
            "gain_range_defect": rc_gain.defect,
            "offset_curvature_defect": rc_u2.defect,
            "offset_residual_defect": rc_u1.defect,
        },
    )


def solvability_certificate(
    system: LinearSystem,
    weights: CostWeights,
    P0: np.ndarray,
    free: np.ndarray | None = None,
    kernel_shift: np.ndarray | None = None,
    policy: PinvPolicy = DEFAULT_POLICY,
):
    """Try to certify solvability at a Riccati solution P0.

    Needs Rc(P0) = 0, positive semidefinite curvature with the numerator in
    its range, an induced gain (optionally steered inside the minimizing
    family by `free`) that stabilizes, and the exactly solved offset to land
    in the curvature range.  On success returns the optimal strategy and
    value; kernel_shift picks a member of the optimal offset family when the
    curvature is singular.
    """
    check_compatible(system, weights)
    P0 = np.asarray(P0, dtype=float)
    P0 = 0.5 * (P0 + P0.T)
    tol = 10.0 * policy.rel_tol

    G = riccati_residual_matrix(system, weights, P0, policy)
    are_resid = float(np.linalg.norm(G))
    if are_resid > 1e-10 * (1.0 + np.linalg.norm(P0) + np.linalg.norm(weights.Q)):
        return CertificateFailure("riccati equation not satisfied", are_resid)

    M = control_curvature(system, weights, P0)
    m_low = float(np.linalg.eigvalsh(M)[0])
    if m_low < -tol * (1.0 + np.linalg.norm(M, 2)):
        return CertificateFailure("control curvature not positive semidefinite", m_low)
    L = gain_numerator(system, weights, P0)
    rc_gain = check_range(L, M, policy)
    if not rc_gain.ok:
        return CertificateFailure("gain numerator outside curvature range", rc_gain.defect)

    try:
        Theta = optimal_gain(system, weights, P0, free=free, policy=policy)
    except RangeViolation as exc:
        return CertificateFailure(str(exc), rc_gain.defect)
    if not is_stabilizer(system, Theta):
        return CertificateFailure(
            "induced gain does not stabilize", stability_margin(system, Theta)
        )

    eta = adjoint_offset(system, weights, Theta, P0)
    u2 = system.B.T @ eta + _noise_curvature_shift(system, weights, P0)
    rc_u2 = check_range(u2, M, policy)
    if not rc_u2.ok:
        return CertificateFailure("offset misses curvature range", rc_u2.defect)

    Mp = pinv(M, policy)
    v = -Mp @ u2
    if kernel_shift is not None:
        kernel_shift = np.asarray(kernel_shift, dtype=float)
        v = v + (np.eye(system.m) - Mp @ M) @ kernel_shift
    value = _noise_quadratic(system, P0) + 2.0 * float(eta @ system.b)
    value -= float(v @ M @ v)
    return SolvabilityCertificate(
        P=P0,
        Theta=Theta,
        eta=eta,
        v=v,
        value=value,
        residuals={
            "are_residual": are_resid,
            "curvature_min_eig": m_low,
            "gain_range_defect": rc_gain.defect,
            "offset_curvature_defect": rc_u2.defect,
        },
    )


@dataclass(frozen=True)
class ConvexityCertificate:
    """Uniform convexity margin delta > 0 with its Lyapunov witness."""

    delta: float
    P: np.ndarray

    ok = True


def uniform_convexity_certificate(
    system: LinearSystem,
    weights: CostWeights,
    Theta: np.ndarray,
    Q0: np.ndarray,
):
    """Certify that the control problem is uniformly convex.

    Given a stabilizer Theta and a positive definite probe Q0, solves the
    closed-loop Lyapunov equation whose right-hand side replaces Q by
    Q - Q0, then checks that the Schur-type complement

        R + sum_k D_k^T P D_k - W^T Q0^{-1} W,
        W = P B + sum_k (C_k + D_k Theta)^T P D_k + S^T + Theta^T R

    is positive definite.  Returns the margin (its smallest eigenvalue) on
    success, a CertificateFailure otherwise.
    """
    check_compatible(system, weights)
    Theta = np.asarray(Theta, dtype=float)
    if not is_stabilizer(system, Theta):
        raise NotStabilizing("uniform convexity certificate needs a stabilizer")
    Q0 = np.asarray(Q0, dtype=float)
    Q0 = 0.5 * (Q0 + Q0.T)
    if float(np.linalg.eigvalsh(Q0)[0]) <= 0.0:
        raise NotPositiveDefinite("probe Q0 must be positive definite")

    Acl = system.A + system.B @ Theta
    Ccl = tuple(c + dk @ Theta for c, dk in zip(system.C, system.D))
    rhs = weights.S.T @ Theta + Theta.T @ weights.S + Theta.T @ weights.R @ Theta
    rhs = rhs + weights.Q - Q0
    P = solve_generalized_lyapunov(Acl, Ccl, 0.5 * (rhs + rhs.T))

    W = P @ system.B + weights.S.T + Theta.T @ weights.R
    for c, dk in zip(system.C, system.D):
        W = W + (c + dk @ Theta).T @ P @ dk
    mat = control_curvature(system, weights, P) - W.T @ np.linalg.solve(Q0, W)
    delta = float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])
    if delta <= 0.0:
        return CertificateFailure("not uniformly convex for this probe", delta)
    return ConvexityCertificate(delta=delta, P=P)
