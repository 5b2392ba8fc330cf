"""Invariant-measure moments and the long-run average cost.

Under a stabilizing affine strategy the closed loop admits a unique
invariant measure with finite second moment.  Its mean m1 and raw second
moment m2 solve linear equations obtained by setting the Ito drift of X and
of X X^T to zero; the long-run average cost is then a quadratic expression
in (m1, m2).  The same average cost admits a representation through an
arbitrary symmetric matrix P and the associated adjoint offset vector,
which is what the certificate machinery in `riccati` exploits; equality of
the two routes for every symmetric P is the strongest internal consistency
check this package has, and tests lean on it heavily.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotStabilizing, SingularLinearSystem
from .model import (
    ClosedLoop,
    CostWeights,
    LinearSystem,
    Strategy,
    check_compatible,
    closed_loop,
    is_stabilizer,
)

_PSD_TOL = 1e-8


@dataclass(frozen=True)
class StationaryMoments:
    """Mean and raw second moment of the invariant measure.

    m2 - m1 m1^T is a covariance matrix; construction enforces it to be
    positive semidefinite up to 1e-8 * (1 + ||m2||).
    """

    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        cov = self.m2 - np.outer(self.m1, self.m1)
        low = float(np.linalg.eigvalsh(0.5 * (cov + cov.T))[0])
        if low < -_PSD_TOL * (1.0 + np.linalg.norm(self.m2)):
            raise SingularLinearSystem(
                f"stationary second moment is not consistent (covariance "
                f"eigenvalue {low:.3e})"
            )


def _solve_checked(L: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        x = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularLinearSystem(f"{what}: {exc}") from exc
    resid = np.linalg.norm(L @ x - rhs)
    if not np.isfinite(resid) or resid > 1e-8 * (1.0 + np.linalg.norm(rhs) + np.linalg.norm(x)):
        raise SingularLinearSystem(f"{what}: unreliable solve, residual {resid:.3e}")
    return x


def _moment_operator(cl: ClosedLoop) -> np.ndarray:
    """Matrix of M |-> A_cl M + M A_cl^T + sum_k C_k M C_k^T in the
    column-major vectorization."""
    n = cl.A.shape[0]
    eye = np.eye(n)
    L = np.kron(eye, cl.A) + np.kron(cl.A, eye)
    for c in cl.C:
        L = L + np.kron(c, c)
    return L


def stationary_moments(
    system: LinearSystem, strategy: Strategy
) -> StationaryMoments:
    """Moments of the invariant measure of the closed loop.

    m1 solves A_cl m1 + (Bv + b) = 0 and m2 solves the stationary
    second-moment equation assembled by Kronecker vectorization.  Requires
    the gain to be a mean-square stabilizer.
    """
    if not is_stabilizer(system, strategy.Theta):
        raise NotStabilizing("stationary moments need a mean-square stabilizing gain")
    cl = closed_loop(system, strategy)
    n = system.n
    m1 = _solve_checked(cl.A, -cl.drift_const, "stationary mean")
    K = np.outer(cl.drift_const, m1) + np.outer(m1, cl.drift_const)
    for c, s in zip(cl.C, cl.noise_const):
        cm1 = c @ m1
        K = K + np.outer(cm1, s) + np.outer(s, cm1) + np.outer(s, s)
    L = _moment_operator(cl)
    vec = _solve_checked(L, -K.reshape(-1, order="F"), "stationary second moment")
    m2 = vec.reshape((n, n), order="F")
    m2 = 0.5 * (m2 + m2.T)
    return StationaryMoments(m1=m1, m2=m2)


def cost_term_matrices(weights: CostWeights, strategy: Strategy):
    """Quadratic, linear and constant parts of x -> g(x, Theta x + v)."""
    Theta, v = strategy.Theta, strategy.v
    Qg = weights.Q + weights.S.T @ Theta + Theta.T @ weights.S + Theta.T @ weights.R @ Theta
    cg = (weights.S + weights.R @ Theta).T @ v + weights.q + Theta.T @ weights.rho
    kg = float(v @ weights.R @ v + 2.0 * weights.rho @ v)
    return 0.5 * (Qg + Qg.T), cg, kg


def ergodic_cost(
    system: LinearSystem, weights: CostWeights, strategy: Strategy
) -> float:
    """Long-run average cost of an admissible strategy, computed from the
    stationary moments."""
    check_compatible(system, weights)
    mom = stationary_moments(system, strategy)
    Qg, cg, kg = cost_term_matrices(weights, strategy)
    return float(np.trace(Qg @ mom.m2) + 2.0 * cg @ mom.m1 + kg)


def adjoint_offset(
    system: LinearSystem,
    weights: CostWeights,
    Theta: np.ndarray,
    P: np.ndarray,
) -> np.ndarray:
    """Offset vector eta solving

        (A + B Theta)^T eta + P b + sum_k (C_k + D_k Theta)^T P sigma_k
            + q + Theta^T rho = 0.

    Well defined whenever A + B Theta is invertible, which holds for every
    stabilizing gain.
    """
    Theta = np.asarray(Theta, dtype=float)
    P = np.asarray(P, dtype=float)
    rhs = P @ system.b + weights.q + Theta.T @ weights.rho
    for c, dk, s in zip(system.C, system.D, system.sigma):
        rhs = rhs + (c + dk @ Theta).T @ (P @ s)
    return _solve_checked((system.A + system.B @ Theta).T, -rhs, "adjoint offset")


def cost_representation(
    system: LinearSystem,
    weights: CostWeights,
    strategy: Strategy,
    P: np.ndarray,
) -> float:
    """Long-run average cost written through an arbitrary symmetric matrix P.

    For every symmetric P this equals ergodic_cost(system, weights,
    strategy); the block quadratic form under the invariant measure is
    expanded into moment terms, and eta is the adjoint offset for (Theta, P).
    """
    check_compatible(system, weights)
    from .riccati import gain_numerator, lyapunov_quadratic  # local to avoid a cycle

    Theta, v = strategy.Theta, strategy.v
    P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
    mom = stationary_moments(system, strategy)
    eta = adjoint_offset(system, weights, Theta, P)

    M = weights.R.copy()
    for dk in system.D:
        M = M + dk.T @ P @ dk
    L = gain_numerator(system, weights, P)
    Qq = lyapunov_quadratic(system, weights, Theta, P)

    quad = float(np.trace(Qq @ mom.m2))
    quad += 2.0 * float(v @ ((L + M @ Theta) @ mom.m1))
    quad += float(v @ M @ v)

    lin = system.B.T @ eta + weights.rho
    const = 2.0 * float(eta @ system.b)
    for dk, s in zip(system.D, system.sigma):
        lin = lin + dk.T @ (P @ s)
    for s in system.sigma:
        const += float(s @ P @ s)
    return quad + 2.0 * float(lin @ v) + const
