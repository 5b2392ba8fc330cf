"""Problem data and mean-square stability for controlled linear SDEs.

The state follows

    dX_t = (A X_t + B u_t + b) dt + sum_k (C_k X_t + D_k u_t + sigma_k) dW^k_t

with d independent scalar Brownian motions, and the running cost is the
quadratic form

    g(x, u) = <Qx, x> + 2<Sx, u> + <Ru, u> + 2<q, x> + 2<rho, u>.

Q and R need not be definite.  Strategies are affine feedbacks
u = Theta x + v.  A gain Theta is called a stabilizer when the closed loop
is exponentially stable in mean square, which for this class of systems is
equivalent to negative definiteness of

    stability_matrix(Theta) = (A + B Theta) + (A + B Theta)^T
                              + sum_k (C_k + D_k Theta)^T (C_k + D_k Theta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StabilizerNotFound

_SYM_TOL = 1e-12


def _as_matrix(x, shape, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != shape:
        raise DimensionError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} contains non-finite entries")
    return a


def _symmetrize(a: np.ndarray, name: str) -> np.ndarray:
    skew = np.linalg.norm(a - a.T)
    if skew > _SYM_TOL * (1.0 + np.linalg.norm(a)):
        raise DimensionError(f"{name} is not symmetric (asymmetry {skew:.3e})")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class LinearSystem:
    """Coefficients (A, B, C_k, D_k, b, sigma_k) of the controlled SDE."""

    A: np.ndarray
    B: np.ndarray
    C: tuple
    D: tuple
    b: np.ndarray
    sigma: tuple

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got shape {B.shape}")
        m = B.shape[1]
        C = tuple(np.asarray(c, dtype=float) for c in self.C)
        D = tuple(np.asarray(dk, dtype=float) for dk in self.D)
        sigma = tuple(np.asarray(s, dtype=float) for s in self.sigma)
        d = len(C)
        if len(D) != d or len(sigma) != d:
            raise DimensionError(
                f"C, D, sigma must have equal length, got {len(C)}, {len(D)}, {len(sigma)}"
            )
        object.__setattr__(self, "A", _as_matrix(A, (n, n), "A"))
        object.__setattr__(self, "B", _as_matrix(B, (n, m), "B"))
        object.__setattr__(
            self, "C", tuple(_as_matrix(c, (n, n), f"C[{k}]") for k, c in enumerate(C))
        )
        object.__setattr__(
            self, "D", tuple(_as_matrix(dk, (n, m), f"D[{k}]") for k, dk in enumerate(D))
        )
        object.__setattr__(self, "b", _as_matrix(self.b, (n,), "b"))
        object.__setattr__(
            self,
            "sigma",
            tuple(_as_matrix(s, (n,), f"sigma[{k}]") for k, s in enumerate(sigma)),
        )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def d(self) -> int:
        return len(self.C)


@dataclass(frozen=True)
class CostWeights:
    """Quadratic running-cost weights (Q, S, R, q, rho).

    Q and R are symmetrized on ingestion; inputs asymmetric beyond
    1e-12 * (1 + norm) are rejected.
    """

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    q: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        n = Q.shape[0]
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[1] != n:
            raise DimensionError(f"S must have {n} columns, got shape {S.shape}")
        m = S.shape[0]
        object.__setattr__(self, "Q", _symmetrize(_as_matrix(Q, (n, n), "Q"), "Q"))
        object.__setattr__(self, "S", _as_matrix(S, (m, n), "S"))
        object.__setattr__(
            self, "R", _symmetrize(_as_matrix(self.R, (m, m), "R"), "R")
        )
        q = np.zeros(n) if self.q is None else self.q
        rho = np.zeros(m) if self.rho is None else self.rho
        object.__setattr__(self, "q", _as_matrix(q, (n,), "q"))
        object.__setattr__(self, "rho", _as_matrix(rho, (m,), "rho"))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class Strategy:
    """Affine feedback u = Theta x + v."""

    Theta: np.ndarray
    v: np.ndarray | None = None

    def __post_init__(self):
        Theta = np.asarray(self.Theta, dtype=float)
        if Theta.ndim != 2:
            raise DimensionError(f"Theta must be a matrix, got shape {Theta.shape}")
        m, n = Theta.shape
        object.__setattr__(self, "Theta", _as_matrix(Theta, (m, n), "Theta"))
        v = np.zeros(m) if self.v is None else self.v
        object.__setattr__(self, "v", _as_matrix(v, (m,), "v"))


@dataclass(frozen=True)
class ClosedLoop:
    """Coefficients of the SDE after substituting u = Theta x + v."""

    A: np.ndarray            # A + B Theta
    C: tuple                 # C_k + D_k Theta
    drift_const: np.ndarray  # B v + b
    noise_const: tuple       # D_k v + sigma_k


def check_compatible(system: LinearSystem, weights: CostWeights) -> None:
    if weights.n != system.n or weights.m != system.m:
        raise DimensionError(
            f"weights sized ({weights.n}, {weights.m}) do not match system "
            f"({system.n}, {system.m})"
        )


def closed_loop(system: LinearSystem, strategy: Strategy) -> ClosedLoop:
    Theta, v = strategy.Theta, strategy.v
    if Theta.shape != (system.m, system.n) or v.shape != (system.m,):
        raise DimensionError(
            f"strategy sized {Theta.shape} does not match system "
            f"({system.m}, {system.n})"
        )
    return ClosedLoop(
        A=system.A + system.B @ Theta,
        C=tuple(c + dk @ Theta for c, dk in zip(system.C, system.D)),
        drift_const=system.B @ v + system.b,
        noise_const=tuple(dk @ v + s for dk, s in zip(system.D, system.sigma)),
    )


def stability_matrix(system: LinearSystem, Theta: np.ndarray) -> np.ndarray:
    """Symmetric matrix whose negative definiteness certifies mean-square
    exponential stability of the closed loop under the gain Theta."""
    Theta = np.asarray(Theta, dtype=float)
    Acl = system.A + system.B @ Theta
    F = Acl + Acl.T
    for c, dk in zip(system.C, system.D):
        Ccl = c + dk @ Theta
        F = F + Ccl.T @ Ccl
    return 0.5 * (F + F.T)


def stability_margin(system: LinearSystem, Theta: np.ndarray) -> float:
    """Negated top eigenvalue of the stability matrix; positive iff the gain
    stabilizes the closed loop in mean square."""
    F = stability_matrix(system, Theta)
    return -float(np.linalg.eigvalsh(F)[-1])


def is_stabilizer(system: LinearSystem, Theta: np.ndarray, tol_stab: float = 1e-10) -> bool:
    """Mean-square stability test with a tolerance relative to ||F||.

    Boundary gains (top eigenvalue exactly zero) are rejected.
    """
    F = stability_matrix(system, Theta)
    top = float(np.linalg.eigvalsh(F)[-1])
    return top < -tol_stab * (1.0 + np.linalg.norm(F, 2))


def _top_eig(F: np.ndarray):
    vals, vecs = np.linalg.eigh(F)
    return float(vals[-1]), vecs[:, -1]


def find_stabilizer(
    system: LinearSystem,
    max_iters: int = 500,
    seed: int = 0,
    tol_stab: float = 1e-10,
) -> np.ndarray:
    """Search for a mean-square stabilizing gain.

    Minimizes the top eigenvalue of the stability matrix, which is convex in
    Theta, by normalized subgradient steps: the first round starts from
    Theta = 0, later rounds restart from random gains with doubled scale.
    The total budget is max_iters steps; raises StabilizerNotFound when no
    strictly negative value is reached.  A heuristic search, not a
    completeness claim: failure does not prove the stabilizer set is empty.
    """
    n, m = system.n, system.m
    rng = np.random.default_rng(seed)
    rounds = max(1, max_iters // 100)
    per_round = max(1, max_iters // rounds)
    scale = 1.0 + np.linalg.norm(system.A, 2)

    best = None
    best_val = np.inf
    for rnd in range(rounds):
        if rnd == 0:
            Theta = np.zeros((m, n))
        else:
            Theta = rng.standard_normal((m, n)) * scale
            scale *= 2.0
        step0 = 1.0 + np.linalg.norm(system.A, 2)
        for it in range(per_round):
            F = stability_matrix(system, Theta)
            top, u = _top_eig(F)
            if top < best_val:
                best_val, best = top, Theta.copy()
            if top < -tol_stab * (1.0 + np.linalg.norm(F, 2)):
                return Theta
            # subgradient of the top eigenvalue at the leading eigenvector
            G = system.B.T @ np.outer(u, u)
            for c, dk in zip(system.C, system.D):
                G = G + dk.T @ (c + dk @ Theta) @ np.outer(u, u)
            G *= 2.0
            gnorm = np.linalg.norm(G)
            if gnorm < 1e-14:
                break  # flat direction; this round cannot make progress
            Theta = Theta - (step0 / (1.0 + it)) * (G / gnorm)
    if best is not None and is_stabilizer(system, best, tol_stab):
        return best
    raise StabilizerNotFound(
        f"no stabilizing gain found in {max_iters} subgradient steps "
        f"(best top eigenvalue {best_val:.3e})"
    )
